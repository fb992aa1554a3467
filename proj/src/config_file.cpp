#include "biastracer/config_file.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <sstream>

#include "biastracer/artifacts.hpp"
#include "biastracer/error.hpp"

namespace bt {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* want) {
  throw Error(ErrorCode::InvalidArgument,
              "config field '" + key + "': expected " + want + ", got '" + value + "'");
}

}  // namespace

ConfigFile ConfigFile::parse(std::string_view text, const std::string& origin) {
  ConfigFile cfg;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::InvalidArgument,
                  origin + ":" + std::to_string(n) + ": expected 'key = value'");
    }
    const auto key = trim(std::string_view(body).substr(0, eq));
    if (key.empty()) {
      throw Error(ErrorCode::InvalidArgument, origin + ":" + std::to_string(n) + ": empty key");
    }
    cfg.set(key, trim(std::string_view(body).substr(eq + 1)));
  }
  return cfg;
}

ConfigFile ConfigFile::load(const std::filesystem::path& path) {
  return parse(read_text_file(path), path.string());
}

void ConfigFile::set(const std::string& key, std::string value) { entries_[key] = std::move(value); }

void ConfigFile::erase(const std::string& key) { entries_.erase(key); }

void ConfigFile::merge(const ConfigFile& other) {
  for (const auto& [k, v] : other.entries_) entries_[k] = v;
}

bool ConfigFile::contains(const std::string& key) const { return entries_.count(key) != 0; }

std::optional<std::string> ConfigFile::find(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

std::string ConfigFile::get_string(const std::string& key, const std::string& fallback) const {
  return find(key).value_or(fallback);
}

long ConfigFile::get_int(const std::string& key, long fallback) const {
  const auto v = find(key);
  if (!v) return fallback;
  long out = 0;
  const auto [p, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
  if (ec != std::errc() || p != v->data() + v->size()) bad_value(key, *v, "an integer");
  return out;
}

std::uint64_t ConfigFile::get_u64(const std::string& key, std::uint64_t fallback) const {
  const auto v = find(key);
  if (!v) return fallback;
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
  if (ec != std::errc() || p != v->data() + v->size()) bad_value(key, *v, "a non-negative integer");
  return out;
}

double ConfigFile::get_double(const std::string& key, double fallback) const {
  const auto v = find(key);
  if (!v) return fallback;
  double out = 0.0;
  const auto [p, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
  if (ec != std::errc() || p != v->data() + v->size()) bad_value(key, *v, "a number");
  return out;
}

bool ConfigFile::get_bool(const std::string& key, bool fallback) const {
  const auto v = find(key);
  if (!v) return fallback;
  std::string s = *v;
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  bad_value(key, *v, "a boolean");
}

std::string ConfigFile::require(const std::string& key) const {
  const auto v = find(key);
  if (!v || v->empty()) {
    throw Error(ErrorCode::InvalidArgument, "missing required config field '" + key + "'");
  }
  return *v;
}

std::string ConfigFile::canonical(std::string_view prefix) const {
  std::string out;
  for (const auto& [k, v] : entries_) {
    if (k.compare(0, prefix.size(), prefix) != 0) continue;
    out += k;
    out += " = ";
    out += v;
    out += '\n';
  }
  return out;
}

}  // namespace bt
