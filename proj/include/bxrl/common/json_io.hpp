#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

namespace bxrl {

using json = nlohmann::ordered_json;

json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const json& value);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

// Shortest decimal text that parses back to the same double.
std::string format_double(double value);

// Creates `dir` (and parents) and checks it is writable; throws ConfigError
// naming the path otherwise.
void ensure_writable_dir(const std::filesystem::path& dir);

}  // namespace bxrl
