#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ptmap {

/// Base of every error raised by the library. `kind()` is a stable short name
/// used in diagnostics and by the CLI to choose an exit code.
class Error : public std::runtime_error {
  public:
    Error(std::string kind, const std::string& what)
        : std::runtime_error(what), m_kind(std::move(kind))
    {}

    [[nodiscard]] const std::string& kind() const noexcept { return m_kind; }

  private:
    std::string m_kind;
};

// Data-file errors.

class MalformedRecord : public Error {
  public:
    MalformedRecord(std::size_t line, const std::string& detail)
        : Error("MalformedRecord", "line " + std::to_string(line) + ": " + detail), m_line(line)
    {}
    [[nodiscard]] std::size_t line() const noexcept { return m_line; }

  private:
    std::size_t m_line;
};

class DuplicateId : public Error {
  public:
    explicit DuplicateId(std::string id)
        : Error("DuplicateId", "duplicate id '" + id + "'"), m_id(std::move(id))
    {}
    [[nodiscard]] const std::string& id() const noexcept { return m_id; }

  private:
    std::string m_id;
};

class EmptyTaxonomy : public Error {
  public:
    EmptyTaxonomy() : Error("EmptyTaxonomy", "taxonomy contains no product types") {}
};

class IoError : public Error {
  public:
    explicit IoError(const std::string& what) : Error("IoError", what) {}
};

// Provider errors. Timeout is a ProviderUnavailable so callers that only care
// about "the model could not be reached" can catch the base.

class ProviderError : public Error {
  public:
    using Error::Error;
};

class ProviderUnavailable : public ProviderError {
  public:
    explicit ProviderUnavailable(const std::string& what)
        : ProviderError("ProviderUnavailable", what)
    {}

  protected:
    ProviderUnavailable(std::string kind, const std::string& what)
        : ProviderError(std::move(kind), what)
    {}
};

class Timeout : public ProviderUnavailable {
  public:
    explicit Timeout(const std::string& what) : ProviderUnavailable("Timeout", what) {}
};

class EmptyResponse : public ProviderError {
  public:
    explicit EmptyResponse(const std::string& what) : ProviderError("EmptyResponse", what) {}
};

class UnparseableResponse : public ProviderError {
  public:
    explicit UnparseableResponse(std::string raw)
        : ProviderError("UnparseableResponse", "unparseable model response: '" + raw + "'"),
          m_raw(std::move(raw))
    {}
    [[nodiscard]] const std::string& raw() const noexcept { return m_raw; }

  private:
    std::string m_raw;
};

// Retrieval / evaluation / labeling errors.

class DimensionMismatch : public Error {
  public:
    DimensionMismatch(std::size_t expected, std::size_t actual)
        : Error("DimensionMismatch",
                "dimension mismatch: expected " + std::to_string(expected) + ", got "
                    + std::to_string(actual))
    {}
};

class IndexMismatch : public Error {
  public:
    explicit IndexMismatch(const std::string& what) : Error("IndexMismatch", what) {}
};

class MissingEmbedding : public Error {
  public:
    explicit MissingEmbedding(const std::string& pt_id)
        : Error("MissingEmbedding", "no embedding for pt '" + pt_id + "'")
    {}
};

class EmptyTruth : public Error {
  public:
    EmptyTruth() : Error("EmptyTruth", "truth set is empty") {}
};

class UnsortedEvents : public Error {
  public:
    explicit UnsortedEvents(const std::string& user_id)
        : Error("UnsortedEvents", "events for user '" + user_id + "' are not sorted by timestamp")
    {}
};

class UnknownPt : public Error {
  public:
    explicit UnknownPt(const std::string& pt_id)
        : Error("UnknownPt", "unknown product type '" + pt_id + "'")
    {}
};

class UnknownCampaign : public Error {
  public:
    explicit UnknownCampaign(const std::string& campaign_id)
        : Error("UnknownCampaign", "no coverage for campaign '" + campaign_id + "'")
    {}
};

class AlignmentError : public Error {
  public:
    explicit AlignmentError(const std::string& what) : Error("AlignmentError", what) {}
};

class ConfigError : public Error {
  public:
    ConfigError(const std::string& path, const std::string& what)
        : Error("ConfigError", path + ": " + what)
    {}
};

/// Wraps a lower-level error with the unit of work it happened in
/// (a pt id while indexing, a campaign id while mapping).
template <typename Base>
[[noreturn]] void rethrow_with_context(const Base& err, const std::string& context)
{
    throw Error(err.kind(), context + ": " + err.what());
}

}  // namespace ptmap
