#pragma once

#include <cstdint>
#include <map>
#include <string>

namespace attriflip {

// Key-value text config: one `key = value` per line, '#' comments, blank
// lines ignored. The same file drives training and attack parameters.
class Config {
 public:
  Config() = default;
  static Config from_file(const std::string& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  void set(const std::string& key, const std::string& value) {
    values_[key] = value;
  }

  std::string get_string(const std::string& key, const std::string& dflt) const;
  double get_double(const std::string& key, double dflt) const;
  int get_int(const std::string& key, int dflt) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t dflt) const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace attriflip
