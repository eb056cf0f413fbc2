#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

namespace jarn::config {

// Flat key=value configuration, fully resolved (defaults, then file values,
// then flag overrides). The echo feeds every output artifact.
class RunConfig {
 public:
  bool has(const std::string& key) const { return values_.count(key) != 0; }
  void set(const std::string& key, const std::string& value) { values_[key] = value; }

  std::string get(const std::string& key, const std::string& fallback) const;
  int64_t get_int(const std::string& key, int64_t fallback) const;
  double get_real(const std::string& key, double fallback) const;
  bool get_flag(const std::string& key, bool fallback) const;
  uint64_t get_seed(const std::string& key, uint64_t fallback) const;

  // Required lookups throw PreconditionError naming the missing key.
  std::string require(const std::string& key) const;

  // Sorted key=value pairs for artifact embedding.
  std::vector<std::pair<std::string, std::string>> echo() const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

// Grammar (documented in the README): one `key = value` per line, keys over
// [A-Za-z0-9_.-], '#' starts a comment, blank lines ignored, later keys win.
std::map<std::string, std::string> parse_config_file(const std::string& path);
std::map<std::string, std::string> parse_config_text(const std::string& text,
                                                     const std::string& origin);

RunConfig resolve(const std::map<std::string, std::string>& file_values,
                  const std::map<std::string, std::string>& flag_overrides);

// $JARN_OUT_DIR, else ".".
std::string default_out_dir();

}  // namespace jarn::config
