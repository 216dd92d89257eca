#ifndef OODBENCH_IO_HPP
#define OODBENCH_IO_HPP

#include <atomic>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <unistd.h>

#include "error.hpp"

namespace oodbench::io {

namespace fs = std::filesystem;

/// Writes through a sibling temp file and renames it over `path`, so readers
/// see either the old file or the complete new one.
inline void write_atomic(const fs::path& path, const std::function<void(std::ostream&)>& body) {
  static std::atomic<unsigned> counter{0};
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter++);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw UserError("cannot open " + tmp.string() + " for writing");
    body(out);
    out.flush();
    if (!out) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw UserError("write failed: " + path.string());
    }
  }
  fs::rename(tmp, path);
}

inline void write_atomic(const fs::path& path, const std::string& content) {
  write_atomic(path, [&](std::ostream& out) { out << content; });
}

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UserError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::ifstream open_input(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UserError("cannot open " + path.string());
  return in;
}

}  // namespace oodbench::io

#endif  // OODBENCH_IO_HPP
