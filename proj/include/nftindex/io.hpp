#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace nftidx::io {

std::string read_text(const std::filesystem::path& path);

/// Writes to a sibling temp file and renames over `path`.
void write_text_atomic(const std::filesystem::path& path, std::string_view content);

void write_json_atomic(const std::filesystem::path& path, const nlohmann::json& j);

nlohmann::json read_json(const std::filesystem::path& path);

/// Splits one CSV record (RFC 4180 quoting, no embedded newlines).
std::vector<std::string> split_csv_line(std::string_view line);

/// Quotes a CSV field when it holds a separator, quote or leading/trailing space.
std::string csv_field(std::string_view value);

/// Lossless decimal rendering of a double (shortest round-trip form).
std::string format_double(double v);

/// Splits text into lines, dropping a trailing '\r' from each.
std::vector<std::string> split_lines(std::string_view text);

}  // namespace nftidx::io
