#pragma once

#include <fstream>
#include <map>
#include <stdexcept>
#include <string>

namespace rcgp {

/*! Plain-text config: `key = value` lines, `[section]` headers,
 * `#` comments.  Keys outside any section land in the "" section. */
using ConfigMap = std::map<std::string, std::map<std::string, std::string>>;

namespace detail {
inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t");
  return s.substr(a, b - a + 1);
}
}  // namespace detail

inline ConfigMap parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot open " + path);
  ConfigMap cfg;
  std::string line, section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw std::invalid_argument("config: malformed section at line " +
                                    std::to_string(line_no));
      section = detail::trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config: expected key = value at line " +
                                  std::to_string(line_no));
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (key.empty())
      throw std::invalid_argument("config: empty key at line " +
                                  std::to_string(line_no));
    cfg[section][key] = value;
  }
  return cfg;
}

}  // namespace rcgp
