#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace streamvad {

// Shortest round-trip decimal form of a double (to_chars); parsing it back
// recovers the exact bits.
std::string format_double(double value);

// Strict full-field parses; return false on any trailing garbage.
bool parse_double(std::string_view text, double& out);
bool parse_int64(std::string_view text, std::int64_t& out);
bool parse_uint64(std::string_view text, std::uint64_t& out);

std::vector<std::string_view> split_fields(std::string_view line, char sep = ',');

// FNV-1a 64-bit
std::uint64_t fnv1a(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ULL);

std::string read_text_file(const std::string& path);

}  // namespace streamvad
