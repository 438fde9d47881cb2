#pragma once

#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace dars {

using json = nlohmann::json;
// Insertion-ordered variant used for everything we write to disk, so file
// bytes depend only on the data.
using ojson = nlohmann::ordered_json;

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

/// One parsed object per non-empty line. Throws ParseError with the line
/// number on malformed lines.
std::vector<ojson> read_jsonl(const std::string& path);

/// One compact object per line, newline-terminated.
void write_jsonl(const std::string& path, const std::vector<ojson>& records);
void append_jsonl(const std::string& path, const std::vector<ojson>& records);

/// First well-formed JSON object embedded in free text, or nullopt. Tolerates
/// surrounding prose and code fences; respects string escapes when matching
/// braces.
std::optional<json> extract_first_json_object(const std::string& text);

/// FNV-1a over a canonical (key-sorted, whitespace-free) dump. Stable across
/// runs and platforms.
std::string canonical_json_hash(const json& value);

}  // namespace dars
