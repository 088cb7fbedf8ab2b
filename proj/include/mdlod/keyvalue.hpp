#pragma once

#include <nlohmann/json.hpp>

#include <filesystem>
#include <initializer_list>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace mdlod {

/// One `key = value` document. Values use JSON literal syntax (numbers,
/// strings, arrays, objects) and may span several lines while brackets are
/// open. `#` starts a comment that runs to the end of the line.
///
///     domain = [0, 0, 1, 1]
///     interfaces = [
///       [[0.5, 0], [0.5, 1]],   # vertical
///       [[0, 0.5], [1, 0.5]]
///     ]
class KeyValueDocument {
 public:
  static KeyValueDocument parse(std::string_view text);
  static KeyValueDocument load(const std::filesystem::path& path);

  bool contains(std::string_view key) const;
  const nlohmann::json& at(std::string_view key) const;
  const std::vector<std::pair<std::string, nlohmann::json>>& entries() const { return entries_; }

  /// Throws ConfigError naming the first key not in `allowed`.
  void require_known_keys(std::initializer_list<std::string_view> allowed) const;

 private:
  std::vector<std::pair<std::string, nlohmann::json>> entries_;
};

}  // namespace mdlod
