#pragma once

#include <map>
#include <string>

#include "voila/common.hpp"

namespace voila {

// Flat "section.key = value" config text with '#' comments. Every paper-gap
// constant lives here with a default; files only override.
class Config {
  public:
    Config() = default;

    static Config parse_file(const std::string &path);
    static Config parse_text(const std::string &text);

    bool has(const std::string &key) const { return kv_.count(key) != 0; }

    std::string get_str(const std::string &key, const std::string &def) const;
    int64_t get_int(const std::string &key, int64_t def) const;
    double get_real(const std::string &key, double def) const;
    bool get_bool(const std::string &key, bool def) const;

    void set(const std::string &key, const std::string &value) { kv_[key] = value; }

    const std::map<std::string, std::string> &entries() const { return kv_; }

  private:
    std::map<std::string, std::string> kv_;
};

}  // namespace voila
