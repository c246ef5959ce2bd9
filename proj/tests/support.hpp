#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "ptmap/taxonomy.hpp"

namespace ptmap::testing {

/// Scratch directory removed on destruction.
class TempDir {
  public:
    TempDir()
    {
        static std::atomic<int> counter{0};
        m_path = std::filesystem::temp_directory_path()
            / ("ptmap-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::remove_all(m_path);
        std::filesystem::create_directories(m_path);
    }
    ~TempDir()
    {
        std::error_code ec;
        std::filesystem::remove_all(m_path, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    [[nodiscard]] const std::filesystem::path& path() const noexcept { return m_path; }
    [[nodiscard]] std::filesystem::path operator/(const std::string& name) const { return m_path / name; }

  private:
    std::filesystem::path m_path;
};

inline void write_file(const std::filesystem::path& path, const std::string& content)
{
    std::ofstream out(path, std::ios::binary);
    out << content;
}

inline std::string read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline PtNode node(std::string id, std::string category, std::string family, std::string type)
{
    return PtNode{std::move(id), std::move(category), std::move(family), std::move(type), std::nullopt};
}

/// Grocery and money-handling nodes shared by several suites.
inline Taxonomy grocery_taxonomy()
{
    return Taxonomy({
        node("pt1", "Food", "Fresh Produce", "Apples"),
        node("pt2", "Food", "Fresh Produce", "Salad Greens"),
        node("pt3", "Food", "Pantry Staples", "Emergency Food"),
        node("pt4", "Office & Stationery", "Money Handling", "Money Deposit Bags"),
        node("pt5", "Office & Stationery", "Money Handling", "Cash Registers"),
        node("pt6", "Electronics", "Audio Equipment", "Wireless Headphones"),
    });
}

inline std::uint64_t draw(std::mt19937_64& rng, std::uint64_t n) { return rng() % n; }

inline double unit_draw(std::mt19937_64& rng)
{
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace ptmap::testing
