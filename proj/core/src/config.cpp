// Copyright contributors to the nfula project.
// SPDX-License-Identifier: Apache-2.0

#include "nfula/config.hpp"

#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "nfula/error.hpp"

namespace nfula {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

bool valid_key(const std::string& key) {
  if (key.empty()) return false;
  for (char c : key) {
    bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' ||
              c == '-';
    if (!ok) return false;
  }
  return true;
}

}  // namespace

Config Config::parse_string(const std::string& text, const std::string& origin) {
  Config cfg;
  cfg.origin_ = origin;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ParseError(origin + ":" + std::to_string(line_no) +
                       ": expected `key = value`");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (!valid_key(key))
      throw ParseError(origin + ":" + std::to_string(line_no) + ": bad key `" + key +
                       "`");
    if (value.empty())
      throw ParseError(origin + ":" + std::to_string(line_no) + ": empty value for `" +
                       key + "`");
    if (cfg.entries_.count(key))
      throw ParseError(origin + ":" + std::to_string(line_no) + ": duplicate key `" +
                       key + "`");
    cfg.entries_[key] = Entry{value, line_no, false};
  }
  return cfg;
}

Config Config::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_string(buf.str(), path);
}

const Config::Entry* Config::find(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return nullptr;
  it->second.consumed = true;
  return &it->second;
}

bool Config::has(const std::string& key) const { return entries_.count(key) != 0; }

std::string Config::get_string(const std::string& key, const std::string& def) const {
  const Entry* e = find(key);
  return e ? e->value : def;
}

std::string Config::require_string(const std::string& key) const {
  const Entry* e = find(key);
  if (!e) throw ParseError(origin_ + ": missing required key `" + key + "`");
  return e->value;
}

double Config::get_double(const std::string& key, double def) const {
  const Entry* e = find(key);
  if (!e) return def;
  char* end = nullptr;
  double v = std::strtod(e->value.c_str(), &end);
  if (end == e->value.c_str() || *end != '\0')
    throw ParseError(origin_ + ":" + std::to_string(e->line) + ": key `" + key +
                     "` is not a number: " + e->value);
  return v;
}

std::uint64_t Config::get_u64(const std::string& key, std::uint64_t def) const {
  const Entry* e = find(key);
  if (!e) return def;
  char* end = nullptr;
  unsigned long long v = std::strtoull(e->value.c_str(), &end, 10);
  if (end == e->value.c_str() || *end != '\0' || e->value[0] == '-')
    throw ParseError(origin_ + ":" + std::to_string(e->line) + ": key `" + key +
                     "` is not a nonnegative integer: " + e->value);
  return v;
}

bool Config::get_bool(const std::string& key, bool def) const {
  const Entry* e = find(key);
  if (!e) return def;
  if (e->value == "true" || e->value == "1") return true;
  if (e->value == "false" || e->value == "0") return false;
  throw ParseError(origin_ + ":" + std::to_string(e->line) + ": key `" + key +
                   "` is not a boolean (use true/false): " + e->value);
}

void Config::set(const std::string& key, const std::string& value) {
  if (!valid_key(key)) throw ParseError("bad config key `" + key + "`");
  entries_[key] = Entry{value, 0, false};
}

void Config::set_double(const std::string& key, double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  set(key, buf);
}

void Config::set_u64(const std::string& key, std::uint64_t value) {
  set(key, std::to_string(value));
}

void Config::reject_unknown() const {
  std::string bad;
  for (const auto& [key, entry] : entries_) {
    if (entry.consumed) continue;
    if (!bad.empty()) bad += ", ";
    bad += "`" + key + "` (line " + std::to_string(entry.line) + ")";
  }
  if (!bad.empty()) throw ParseError(origin_ + ": unknown config keys: " + bad);
}

void Config::write_file(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write config file: " + path);
  for (const auto& [key, entry] : entries_) out << key << " = " << entry.value << "\n";
  if (!out.good()) throw IoError("failed while writing config file: " + path);
}

std::map<std::string, std::string> Config::entries() const {
  std::map<std::string, std::string> out;
  for (const auto& [key, entry] : entries_) out[key] = entry.value;
  return out;
}

}  // namespace nfula
