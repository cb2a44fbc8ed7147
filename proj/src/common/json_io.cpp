#include "bxrl/common/json_io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <system_error>

#include "bxrl/common/errors.hpp"
#include "bxrl/common/types.hpp"

namespace bxrl {

json read_json_file(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const json& value) {
  write_text_file(path, value.dump(2) + "\n");
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LookupError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
  if (!out) throw ConfigError("write failed: " + path.string());
}

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc{}) return "nan";
  return std::string(buf, ptr);
}

void ensure_writable_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir))
    throw ConfigError("cannot create directory " + dir.string() + ": " + ec.message());
  const auto probe = dir / ".write_probe";
  {
    std::ofstream out(probe);
    if (!out) throw ConfigError("directory is not writable: " + dir.string());
  }
  std::filesystem::remove(probe, ec);
}

std::string_view action_name(Action a) {
  switch (a) {
    case Action::Left: return "LEFT";
    case Action::Idle: return "IDLE";
    case Action::Right: return "RIGHT";
    case Action::Faster: return "FASTER";
    case Action::Slower: return "SLOWER";
  }
  return "?";
}

std::optional<Action> parse_action(std::string_view name) {
  for (Action a : kAllActions)
    if (action_name(a) == name) return a;
  return std::nullopt;
}

Action action_from_id(int id) {
  if (id < 0 || id >= kNumActions)
    throw ContractError("action id out of range: " + std::to_string(id));
  return static_cast<Action>(id);
}

}  // namespace bxrl
