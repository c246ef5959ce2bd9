#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "ptmap/inference.hpp"
#include "ptmap/jsonl.hpp"

namespace ptmap {

/// Append-only coverage output that doubles as a resume checkpoint.
///
/// Opening an existing file keeps every complete record and drops a trailing
/// partial line left by an interrupted run. Records written by a different
/// system are rejected.
class CoverageCheckpoint {
  public:
    CoverageCheckpoint(std::filesystem::path path, std::string system_id)
        : m_path(std::move(path)), m_system_id(std::move(system_id))
    {
        if (m_path.has_parent_path()) {
            std::filesystem::create_directories(m_path.parent_path());
        }
        if (std::filesystem::exists(m_path)) {
            recover();
        }
        m_out.open(m_path, std::ios::binary | std::ios::app);
        if (!m_out) {
            throw IoError("cannot open '" + m_path.string() + "' for appending");
        }
    }

    [[nodiscard]] bool done(const std::string& campaign_id) const { return m_done.contains(campaign_id); }
    [[nodiscard]] std::size_t completed() const noexcept { return m_done.size(); }

    void append(const CoverageSet& cov)
    {
        m_out << jsonl::dump_line(to_json(cov)) << '\n';
        m_out.flush();
        if (!m_out) {
            throw IoError("failed writing '" + m_path.string() + "'");
        }
        m_done.insert(cov.campaign_id);
    }

  private:
    void recover()
    {
        std::string kept;
        {
            auto in = jsonl::open_input(m_path);
            std::string line;
            std::size_t line_no = 0;
            while (std::getline(in, line)) {
                ++line_no;
                const bool complete_line = !in.eof();
                if (line.find_first_not_of(" \t\r") == std::string::npos) {
                    continue;
                }
                jsonl::json obj;
                try {
                    obj = jsonl::json::parse(line);
                } catch (const jsonl::json::parse_error&) {
                    if (!complete_line) {
                        break;  // interrupted mid-write
                    }
                    throw MalformedRecord(line_no, "corrupt checkpoint record in '" + m_path.string() + "'");
                }
                auto cov = coverage_from_json(obj, line_no);
                if (cov.system_id != m_system_id) {
                    throw ConfigError("output", "'" + m_path.string() + "' holds coverage for system '"
                                                    + cov.system_id + "', not '" + m_system_id + "'");
                }
                m_done.insert(cov.campaign_id);
                kept += line;
                kept += '\n';
            }
        }
        jsonl::write_atomic(m_path, kept);
    }

    std::filesystem::path m_path;
    std::string m_system_id;
    std::set<std::string> m_done;
    std::ofstream m_out;
};

struct BatchOptions {
    std::size_t parallelism = 1;
    bool continue_on_error = false;
};

struct BatchResult {
    std::size_t computed = 0;
    std::size_t skipped = 0;   // already present in the checkpoint
    std::size_t failed = 0;
};

/// Runs `fn` over every campaign not yet in the checkpoint. Up to
/// `parallelism` campaigns are in flight; results are appended in input
/// order as soon as the preceding ones have finished. A failure aborts the
/// batch (after flushing completed work) unless `continue_on_error` is set,
/// in which case it is logged to `log` and skipped.
inline BatchResult run_batch(const std::vector<Campaign>& campaigns, CoverageCheckpoint& checkpoint,
                             const std::function<CoverageSet(const Campaign&)>& fn, const BatchOptions& opts,
                             std::ostream& log = std::cerr)
{
    BatchResult result;
    std::vector<const Campaign*> todo;
    for (const auto& c : campaigns) {
        if (checkpoint.done(c.id)) {
            ++result.skipped;
        } else {
            todo.push_back(&c);
        }
    }

    std::vector<std::optional<CoverageSet>> results(todo.size());
    std::vector<std::exception_ptr> errors(todo.size());
    std::vector<bool> finished(todo.size(), false);
    std::size_t next_to_flush = 0;
    std::atomic<std::size_t> next_to_start{0};
    std::atomic<bool> abort{false};
    std::mutex mu;
    std::exception_ptr first_error;

    auto flush_ready = [&] {
        while (next_to_flush < todo.size() && finished[next_to_flush]) {
            if (results[next_to_flush]) {
                checkpoint.append(*results[next_to_flush]);
                results[next_to_flush].reset();
                ++result.computed;
            } else if (errors[next_to_flush]) {
                ++result.failed;
                try {
                    std::rethrow_exception(errors[next_to_flush]);
                } catch (const std::exception& e) {
                    log << "error: " << e.what() << "\n";
                }
                if (!opts.continue_on_error) {
                    if (!first_error) {
                        first_error = errors[next_to_flush];
                    }
                    abort = true;
                    ++next_to_flush;
                    return;
                }
            }
            ++next_to_flush;
        }
    };

    auto worker = [&] {
        while (!abort) {
            const auto i = next_to_start++;
            if (i >= todo.size()) {
                return;
            }
            std::optional<CoverageSet> out;
            std::exception_ptr err;
            try {
                out = fn(*todo[i]);
            } catch (...) {
                err = std::current_exception();
            }
            std::lock_guard lock(mu);
            results[i] = std::move(out);
            errors[i] = err;
            finished[i] = true;
            if (!abort) {
                try {
                    flush_ready();
                } catch (...) {
                    first_error = std::current_exception();
                    abort = true;
                }
            }
        }
    };

    const std::size_t workers = std::max<std::size_t>(1, std::min(opts.parallelism, todo.size()));
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        for (std::size_t w = 0; w < workers; ++w) {
            threads.emplace_back(worker);
        }
        for (auto& t : threads) {
            t.join();
        }
    }
    if (first_error) {
        std::rethrow_exception(first_error);
    }
    return result;
}

}  // namespace ptmap
