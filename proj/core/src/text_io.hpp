#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ssr::detail {

// Shortest round-trip representation; output is byte-stable across runs.
std::string format_double(double value);
void append_double(std::string& out, double value);

double parse_double(std::string_view token, std::string_view context);
long long parse_int(std::string_view token, std::string_view context);

std::vector<std::string_view> split_ws(std::string_view line);
std::string_view trim(std::string_view s);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

// Splits on '\n', dropping a trailing '\r' from each line.
std::vector<std::string_view> split_lines(std::string_view text);

}  // namespace ssr::detail

namespace ssr::detail {

// RFC 4180 style: fields containing separators, quotes or newlines are quoted.
std::string csv_field(std::string_view value);
std::string csv_row(std::span<const std::string> fields);
// Splits one record; quoted fields may contain commas and doubled quotes.
std::vector<std::string> parse_csv_row(std::string_view line);

}  // namespace ssr::detail
