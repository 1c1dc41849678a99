// Copyright (C) 2026 the ssdkan authors
// SPDX-License-Identifier: Apache-2.0
//
// Line-oriented `key = value` config files with `#` comments. Consumers read
// the keys they know and then call reject_unknown(), which fails on any key
// nobody consumed.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>

#include "ssdkan/errors.hpp"

namespace ssdkan {

class ConfigMap {
 public:
  static ConfigMap from_file(const std::filesystem::path& path);
  static ConfigMap from_string(const std::string& text,
                               const std::string& origin = "<config>");

  bool has(const std::string& key) const;

  std::string get_string(const std::string& key) const;
  std::string get_string(const std::string& key,
                         const std::string& fallback) const;
  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  int64_t get_int(const std::string& key) const;
  int64_t get_int(const std::string& key, int64_t fallback) const;
  uint64_t get_u64(const std::string& key) const;
  uint64_t get_u64(const std::string& key, uint64_t fallback) const;
  bool get_bool(const std::string& key) const;
  bool get_bool(const std::string& key, bool fallback) const;

  // Throws ConfigError naming every key that was never read.
  void reject_unknown() const;

  const std::string& origin() const { return origin_; }

 private:
  std::string raw(const std::string& key) const;
  std::map<std::string, std::string> values_;
  mutable std::set<std::string> consumed_;
  std::string origin_;
};

}  // namespace ssdkan
