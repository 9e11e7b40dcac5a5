#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace kedmd::io {

/// Decimal formatting with 17 significant digits; round-trips doubles exactly.
std::string fmt(double value);

double parse_double(const std::string& text);

std::vector<std::string> split_csv_line(const std::string& line);

void write_text_file(const std::filesystem::path& path, const std::string& content);
std::string read_text_file(const std::filesystem::path& path);

/// Rejects JSON objects carrying keys outside `allowed`; `where` names the
/// object in the error message.
void require_keys_subset(const nlohmann::json& object,
                         const std::vector<std::string>& allowed,
                         const std::string& where);

} // namespace kedmd::io
