#ifndef OODBENCH_TEXT_HPP
#define OODBENCH_TEXT_HPP

#include <algorithm>
#include <cctype>
#include <string>
#include <string_view>
#include <vector>

namespace oodbench::text {

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.emplace_back(s.substr(start));
      return out;
    }
    out.emplace_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

inline std::vector<std::string> split_ws(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    const std::size_t start = i;
    while (i < s.size() && !std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    if (i > start) out.emplace_back(s.substr(start, i - start));
  }
  return out;
}

inline std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

inline std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

inline std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

/// Dataset namespace of a `dataset:class` name, empty if none.
inline std::string namespace_of(std::string_view name) {
  const auto pos = name.find(':');
  return pos == std::string_view::npos ? std::string() : std::string(name.substr(0, pos));
}

inline std::string strip_namespace(std::string_view name) {
  const auto pos = name.find(':');
  return std::string(pos == std::string_view::npos ? name : name.substr(pos + 1));
}

/// Head term of a scene label. Handles the `/x/label` index prefix and
/// `label/qualifier` suffixes: "/c/church/indoor" -> "church".
inline std::string scene_head(std::string_view label) {
  auto parts = split(label, '/');
  std::vector<std::string> kept;
  for (auto& p : parts)
    if (!p.empty()) kept.push_back(std::move(p));
  if (kept.empty()) return {};
  if (label.starts_with('/') && kept.size() > 1 && kept.front().size() == 1)
    kept.erase(kept.begin());
  return kept.front();
}

}  // namespace oodbench::text

#endif  // OODBENCH_TEXT_HPP
