#include "attriflip/config.hpp"

#include <fstream>
#include <stdexcept>

namespace attriflip {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

Config Config::from_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read config: " + path);
  Config cfg;
  std::string line;
  int row = 0;
  while (std::getline(is, line)) {
    ++row;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    std::size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(path + ":" + std::to_string(row) +
                               ": expected key = value");
    std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    if (key.empty())
      throw std::runtime_error(path + ":" + std::to_string(row) +
                               ": empty key");
    cfg.values_[key] = value;
  }
  return cfg;
}

std::string Config::get_string(const std::string& key,
                               const std::string& dflt) const {
  auto it = values_.find(key);
  return it == values_.end() ? dflt : it->second;
}

double Config::get_double(const std::string& key, double dflt) const {
  auto it = values_.find(key);
  if (it == values_.end()) return dflt;
  try {
    return std::stod(it->second);
  } catch (const std::exception&) {
    throw std::runtime_error("config value for '" + key +
                             "' is not a number: " + it->second);
  }
}

int Config::get_int(const std::string& key, int dflt) const {
  auto it = values_.find(key);
  if (it == values_.end()) return dflt;
  try {
    return std::stoi(it->second);
  } catch (const std::exception&) {
    throw std::runtime_error("config value for '" + key +
                             "' is not an integer: " + it->second);
  }
}

std::uint64_t Config::get_u64(const std::string& key,
                              std::uint64_t dflt) const {
  auto it = values_.find(key);
  if (it == values_.end()) return dflt;
  try {
    return std::stoull(it->second);
  } catch (const std::exception&) {
    throw std::runtime_error("config value for '" + key +
                             "' is not an integer: " + it->second);
  }
}

}  // namespace attriflip
