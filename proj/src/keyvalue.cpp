#include "mdlod/keyvalue.hpp"

#include "mdlod/error.hpp"

#include <fmt/core.h>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace mdlod {

namespace {

std::string strip_comment(const std::string& line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (c == '"' && (i == 0 || line[i - 1] != '\\')) in_string = !in_string;
    if (c == '#' && !in_string) return line.substr(0, i);
  }
  return line;
}

bool is_blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

int bracket_balance(std::string_view s) {
  int depth = 0;
  bool in_string = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (c == '"' && (i == 0 || s[i - 1] != '\\')) in_string = !in_string;
    if (in_string) continue;
    if (c == '[' || c == '{') ++depth;
    if (c == ']' || c == '}') --depth;
  }
  return depth;
}

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

bool valid_key(std::string_view key) {
  if (key.empty() || !(std::isalpha(static_cast<unsigned char>(key[0])) || key[0] == '_')) return false;
  return std::all_of(key.begin(), key.end(), [](unsigned char c) { return std::isalnum(c) || c == '_'; });
}

}  // namespace

KeyValueDocument KeyValueDocument::parse(std::string_view text) {
  KeyValueDocument doc;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_comment(line);
    if (is_blank(line)) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(fmt::format("line {}: expected 'key = value'", line_no));
    const std::string key = trim(std::string_view(line).substr(0, eq));
    if (!valid_key(key)) throw ConfigError(fmt::format("line {}: invalid key '{}'", line_no, key));
    std::string value = line.substr(eq + 1);
    const int start_line = line_no;
    while (bracket_balance(value) > 0) {
      if (!std::getline(in, line))
        throw ConfigError(fmt::format("line {}: unterminated value for '{}'", start_line, key));
      ++line_no;
      value += '\n' + strip_comment(line);
    }
    if (bracket_balance(value) < 0)
      throw ConfigError(fmt::format("line {}: unbalanced brackets in '{}'", start_line, key));
    if (doc.contains(key)) throw ConfigError(fmt::format("line {}: duplicate key '{}'", start_line, key));
    nlohmann::json parsed;
    try {
      parsed = nlohmann::json::parse(value);
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError(fmt::format("line {}: cannot parse value of '{}': {}", start_line, key, e.what()));
    }
    doc.entries_.emplace_back(key, std::move(parsed));
  }
  return doc;
}

KeyValueDocument KeyValueDocument::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open '{}'", path.string()));
  std::stringstream buffer;
  buffer << in.rdbuf();
  try {
    return parse(buffer.str());
  } catch (const ConfigError& e) {
    throw ConfigError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

bool KeyValueDocument::contains(std::string_view key) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const auto& kv) { return kv.first == key; });
}

const nlohmann::json& KeyValueDocument::at(std::string_view key) const {
  for (const auto& [k, v] : entries_)
    if (k == key) return v;
  throw ConfigError(fmt::format("missing required key '{}'", key));
}

void KeyValueDocument::require_known_keys(std::initializer_list<std::string_view> allowed) const {
  for (const auto& [k, v] : entries_) {
    if (std::find(allowed.begin(), allowed.end(), k) == allowed.end())
      throw ConfigError(fmt::format("unknown key '{}'", k));
  }
}

}  // namespace mdlod
