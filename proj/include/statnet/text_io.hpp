#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace statnet {

/// 17 significant digits, '.' decimal separator, independent of locale.
std::string format_real(double v);

/// Locale-independent parse of a full token; throws ConfigError on junk.
double parse_real(std::string_view token);

std::vector<std::string_view> split_csv_line(std::string_view line);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

} // namespace statnet
