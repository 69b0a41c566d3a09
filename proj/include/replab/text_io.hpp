#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace replab {

// Shortest round-trip decimal form of a double (std::to_chars), locale-free.
// Guarantees parse_double(format_double(v)) == v bit-for-bit.
std::string format_double(double v);

// Strict parsers: the whole field must be consumed, otherwise they throw
// std::invalid_argument with the offending text.
double parse_double(std::string_view text);
int64_t parse_int64(std::string_view text);
uint64_t parse_uint64(std::string_view text);
bool parse_bool(std::string_view text);  // accepts true/false/1/0

std::string_view trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char delim);

// Joins fields with commas; no quoting (fields must not contain commas).
std::string join_csv(const std::vector<std::string>& fields);

void write_text_file(const std::string& path, std::string_view content);
std::string read_text_file(const std::string& path);

}  // namespace replab
