#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

// Small helpers shared by the line-oriented file formats.
namespace cadclust::text {

std::vector<std::string_view> split(std::string_view line, char sep);

/// Splits on runs of spaces and tabs.
std::vector<std::string_view> split_ws(std::string_view line);

std::string_view trim(std::string_view s);

/// Strict full-token parses; return false on any trailing garbage or overflow.
bool parse_double(std::string_view token, double& out);
bool parse_u64(std::string_view token, std::uint64_t& out);

/// printf-style `%.<precision>g` in the C locale.
std::string format_g(double value, int precision);

/// Whole-file read in binary mode. Throws cadclust::Error when unreadable.
std::string read_file(const std::filesystem::path& path);

/// Writes through a sibling temp file and renames it into place.
void write_file(const std::filesystem::path& path, std::string_view contents);

/// Iterates lines without their terminator; a trailing "\r" is dropped.
class LineReader {
public:
    explicit LineReader(std::string_view text) : text_(text) {}

    bool next(std::string_view& line);
    std::size_t line_number() const noexcept { return line_no_; }

private:
    std::string_view text_;
    std::size_t pos_ = 0;
    std::size_t line_no_ = 0;
};

/// 64-bit FNV-1a, incremental.
class Fnv1a {
public:
    void update(const void* data, std::size_t size);
    void update(std::string_view s) { update(s.data(), s.size()); }
    std::uint64_t digest() const noexcept { return state_; }

private:
    std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

}  // namespace cadclust::text
