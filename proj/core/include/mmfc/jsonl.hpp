#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace mmfc {

// Calls `visit(record, line_number)` for every non-blank line. Line numbers are
// 1-based. Malformed JSON raises SchemaViolation; a missing file raises
// MissingFile.
void read_jsonl(const std::filesystem::path& path,
                const std::function<void(const nlohmann::json&, std::size_t)>& visit);

// One compact JSON object per line, '\n' terminated, keys in sorted order.
std::string to_jsonl(const std::vector<nlohmann::json>& records);

std::string read_file(const std::filesystem::path& path);

// Writes to a sibling temporary file and renames it into place so readers
// never observe a partial file.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

}  // namespace mmfc
