#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace flowlens {

// Shortest round-trip decimal formatting (std::to_chars). Locale-free and
// deterministic, so repeated runs emit byte-identical CSV files.
std::string format_double(double v);

// Strict numeric parsers: the whole token must be consumed.
double parse_double(std::string_view token, const std::string& context);
int64_t parse_int(std::string_view token, const std::string& context);

// Splits one CSV line on commas. Fields in our formats never contain commas
// or quotes, so no quoting rules are needed.
std::vector<std::string_view> split_csv_line(std::string_view line);

std::vector<std::string> split_list(std::string_view text, char sep);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view content);

}  // namespace flowlens
