#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>

namespace bt {

// Flat "key = value" configuration. Keys are dotted ("selection.t"); '#' starts
// a comment; blank lines are ignored. Later assignments override earlier ones,
// which is how command-line flags are layered over a file.
class ConfigFile {
 public:
  ConfigFile() = default;

  // Throws InvalidArgument with "<origin>:<line>" for a line without '='.
  static ConfigFile parse(std::string_view text, const std::string& origin = "<config>");
  static ConfigFile load(const std::filesystem::path& path);

  void set(const std::string& key, std::string value);
  void erase(const std::string& key);
  // Copies every entry of other over this one.
  void merge(const ConfigFile& other);

  bool contains(const std::string& key) const;
  std::optional<std::string> find(const std::string& key) const;

  // Typed getters throw InvalidArgument naming the key on a malformed value.
  std::string get_string(const std::string& key, const std::string& fallback) const;
  long get_int(const std::string& key, long fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;  // true/false/1/0/yes/no/on/off

  // Throws InvalidArgument "missing required config field '<key>'".
  std::string require(const std::string& key) const;

  // Sorted "key = value" lines for keys starting with prefix (all when empty).
  // Used for hashing, so formatting is fixed.
  std::string canonical(std::string_view prefix = {}) const;

  const std::map<std::string, std::string>& entries() const { return entries_; }

 private:
  std::map<std::string, std::string> entries_;
};

}  // namespace bt
