#ifndef KEYMOTION_SRC_TEXT_UTIL_HPP_
#define KEYMOTION_SRC_TEXT_UTIL_HPP_

#include <charconv>
#include <string>
#include <string_view>
#include <vector>

#include "keymotion/common.hpp"

namespace keymotion::text {

inline std::string_view Trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

// Strips a trailing '#' comment and surrounding whitespace.
inline std::string_view StripComment(std::string_view line) {
  const auto hash = line.find('#');
  return Trim(hash == std::string_view::npos ? line : line.substr(0, hash));
}

inline std::vector<std::string_view> SplitFields(std::string_view line, char sep = ',') {
  std::vector<std::string_view> out;
  size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(Trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline double ParseDouble(std::string_view s, const std::string& where) {
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw ConfigError(where + ": expected a number, got '" + std::string(s) + "'");
  }
  return value;
}

inline long long ParseInt(std::string_view s, const std::string& where) {
  long long value = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw ConfigError(where + ": expected an integer, got '" + std::string(s) + "'");
  }
  return value;
}

}  // namespace keymotion::text

#endif  // KEYMOTION_SRC_TEXT_UTIL_HPP_
