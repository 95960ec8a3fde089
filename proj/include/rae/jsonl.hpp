#pragma once

#include <json.hpp>

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>

namespace rae {

using json = nlohmann::json;

// Calls `fn(record, line_number)` for every non-blank line. Throws ParseError
// naming the line on malformed JSON or non-object records.
void for_each_jsonl(std::istream& in, const std::function<void(const json&, std::size_t)>& fn);
void for_each_jsonl(const std::filesystem::path& path,
                    const std::function<void(const json&, std::size_t)>& fn);

// Required string field; ParseError if absent or not a string.
std::string required_string(const json& record, const char* key, std::size_t line);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& content);

}  // namespace rae
