// Copyright (C) 2026 the ssdkan authors
// SPDX-License-Identifier: Apache-2.0

#include "ssdkan/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace ssdkan {

namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

ConfigMap ConfigMap::from_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config file '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_string(buf.str(), path.string());
}

ConfigMap ConfigMap::from_string(const std::string& text,
                                 const std::string& origin) {
  ConfigMap cfg;
  cfg.origin_ = origin;
  std::istringstream in(text);
  std::string line;
  int64_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ParseError(origin + ":" + std::to_string(lineno) +
                       ": expected 'key = value'");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw ParseError(origin + ":" + std::to_string(lineno) + ": empty key");
    }
    if (!cfg.values_.emplace(key, value).second) {
      throw ParseError(origin + ":" + std::to_string(lineno) +
                       ": duplicate key '" + key + "'");
    }
  }
  return cfg;
}

bool ConfigMap::has(const std::string& key) const {
  consumed_.insert(key);
  return values_.count(key) != 0;
}

std::string ConfigMap::raw(const std::string& key) const {
  consumed_.insert(key);
  auto it = values_.find(key);
  if (it == values_.end()) {
    throw ConfigError(origin_ + ": missing required key '" + key + "'");
  }
  return it->second;
}

std::string ConfigMap::get_string(const std::string& key) const {
  return raw(key);
}

std::string ConfigMap::get_string(const std::string& key,
                                  const std::string& fallback) const {
  consumed_.insert(key);
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double ConfigMap::get_double(const std::string& key) const {
  const std::string v = raw(key);
  size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    throw ConfigError(origin_ + ": key '" + key + "': invalid number '" + v +
                      "'");
  }
  if (used != v.size() || !std::isfinite(out)) {
    throw ConfigError(origin_ + ": key '" + key + "': invalid number '" + v +
                      "'");
  }
  return out;
}

double ConfigMap::get_double(const std::string& key, double fallback) const {
  if (!has(key)) return fallback;
  return get_double(key);
}

int64_t ConfigMap::get_int(const std::string& key) const {
  const std::string v = raw(key);
  size_t used = 0;
  int64_t out = 0;
  try {
    out = std::stoll(v, &used);
  } catch (const std::exception&) {
    throw ConfigError(origin_ + ": key '" + key + "': invalid integer '" + v +
                      "'");
  }
  if (used != v.size()) {
    throw ConfigError(origin_ + ": key '" + key + "': invalid integer '" + v +
                      "'");
  }
  return out;
}

int64_t ConfigMap::get_int(const std::string& key, int64_t fallback) const {
  if (!has(key)) return fallback;
  return get_int(key);
}

uint64_t ConfigMap::get_u64(const std::string& key) const {
  const std::string v = raw(key);
  size_t used = 0;
  uint64_t out = 0;
  try {
    out = std::stoull(v, &used);
  } catch (const std::exception&) {
    throw ConfigError(origin_ + ": key '" + key +
                      "': invalid unsigned integer '" + v + "'");
  }
  if (used != v.size()) {
    throw ConfigError(origin_ + ": key '" + key +
                      "': invalid unsigned integer '" + v + "'");
  }
  return out;
}

uint64_t ConfigMap::get_u64(const std::string& key, uint64_t fallback) const {
  if (!has(key)) return fallback;
  return get_u64(key);
}

bool ConfigMap::get_bool(const std::string& key) const {
  const std::string v = raw(key);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(origin_ + ": key '" + key + "': invalid boolean '" + v +
                    "'");
}

bool ConfigMap::get_bool(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  return get_bool(key);
}

void ConfigMap::reject_unknown() const {
  std::string unknown;
  for (const auto& [key, value] : values_) {
    if (consumed_.count(key) == 0) {
      if (!unknown.empty()) unknown += ", ";
      unknown += "'" + key + "'";
    }
  }
  if (!unknown.empty()) {
    throw ConfigError(origin_ + ": unknown key(s): " + unknown);
  }
}

}  // namespace ssdkan
