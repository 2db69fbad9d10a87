// Copyright contributors to the nfula project.
// SPDX-License-Identifier: Apache-2.0
//
// Line-based `key = value` configuration with `#` comments and dotted key
// names. Keys are tracked as they are consumed so leftover (misspelled)
// keys can be rejected, and a resolved config can be written back out as a
// reparseable provenance record.

#pragma once

#include <cstdint>
#include <map>
#include <string>

namespace nfula {

class Config {
public:
  Config() = default;

  static Config parse_file(const std::string& path);
  static Config parse_string(const std::string& text,
                             const std::string& origin = "<string>");

  bool has(const std::string& key) const;

  // Getters mark the key consumed and fall back to the default when the
  // key is absent. Malformed values raise ParseError with the source line.
  std::string get_string(const std::string& key, const std::string& def) const;
  double get_double(const std::string& key, double def) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t def) const;
  bool get_bool(const std::string& key, bool def) const;

  std::string require_string(const std::string& key) const;

  void set(const std::string& key, const std::string& value);
  void set_double(const std::string& key, double value);
  void set_u64(const std::string& key, std::uint64_t value);

  // Throws ParseError naming every key that was never consumed.
  void reject_unknown() const;

  // Sorted `key = value` lines; parse_file() on the output reproduces the
  // same entries.
  void write_file(const std::string& path) const;

  std::map<std::string, std::string> entries() const;

private:
  struct Entry {
    std::string value;
    std::size_t line = 0;
    mutable bool consumed = false;
  };
  const Entry* find(const std::string& key) const;
  std::map<std::string, Entry> entries_;
  std::string origin_ = "<empty>";
};

}  // namespace nfula
