#ifndef OODBENCH_MATRIX_STORE_HPP
#define OODBENCH_MATRIX_STORE_HPP

#include <Eigen/Dense>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "error.hpp"
#include "io.hpp"
#include "text.hpp"

namespace oodbench {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// N×cols values with per-row sample ids and binary OODness (z = 0 for ID).
/// Logit matrices optionally carry ground-truth class indices in `y`.
struct SampleMatrix {
  std::string name;  // layer key or logits tag
  RowMatrix values;
  std::vector<std::string> ids;
  std::vector<int> z;
  std::vector<int> y;  // empty when absent

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index cols() const { return values.cols(); }

  void validate(Eigen::Index min_cols = 1) const {
    const auto n = static_cast<std::size_t>(values.rows());
    if (values.cols() < min_cols)
      throw UserError("matrix '" + name + "' needs at least " + std::to_string(min_cols) +
                      " columns, has " + std::to_string(values.cols()));
    if (ids.size() != n || z.size() != n || (!y.empty() && y.size() != n))
      throw UserError("matrix '" + name + "': id/z/y lengths do not match " +
                      std::to_string(n) + " rows");
    if (!values.allFinite()) throw UserError("matrix '" + name + "' has non-finite entries");
    for (int v : z)
      if (v != 0 && v != 1) throw UserError("matrix '" + name + "': z must be 0 or 1");
  }

  /// Rows whose z equals `label`, in order.
  SampleMatrix select_z(int label) const {
    std::vector<Eigen::Index> keep;
    for (std::size_t i = 0; i < z.size(); ++i)
      if (z[i] == label) keep.push_back(static_cast<Eigen::Index>(i));
    SampleMatrix out;
    out.name = name;
    out.values.resize(static_cast<Eigen::Index>(keep.size()), values.cols());
    for (std::size_t k = 0; k < keep.size(); ++k) {
      out.values.row(static_cast<Eigen::Index>(k)) = values.row(keep[k]);
      out.ids.push_back(ids[static_cast<std::size_t>(keep[k])]);
      out.z.push_back(label);
      if (!y.empty()) out.y.push_back(y[static_cast<std::size_t>(keep[k])]);
    }
    return out;
  }
};

namespace store {

namespace fs = std::filesystem;

inline constexpr std::size_t kCsvRowCap = 10000;

namespace detail {

inline std::uint32_t bswap32(std::uint32_t x) {
  return (x >> 24) | ((x >> 8) & 0xff00u) | ((x << 8) & 0xff0000u) | (x << 24);
}

inline void put_f32_le(std::string& buf, float f) {
  auto bits = std::bit_cast<std::uint32_t>(f);
  if constexpr (std::endian::native == std::endian::big) bits = bswap32(bits);
  char bytes[4];
  std::memcpy(bytes, &bits, 4);
  buf.append(bytes, 4);
}

inline float get_f32_le(const char* p) {
  std::uint32_t bits;
  std::memcpy(&bits, p, 4);
  if constexpr (std::endian::native == std::endian::big) bits = bswap32(bits);
  return std::bit_cast<float>(bits);
}

inline std::vector<std::string> read_lines(const fs::path& path) {
  auto in = io::open_input(path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

inline int parse_int(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw UserError("bad integer '" + s + "' in " + what);
  }
}

inline double parse_double(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw UserError("bad number '" + s + "' in " + what);
  }
}

}  // namespace detail

/// Directory layout: header.json, values.bin (row-major little-endian f32),
/// ids.txt, z.txt and optionally y.txt. The header is written last, so a
/// directory without one (or with a short values.bin) never loads.
inline void write_dir(const fs::path& dir, const SampleMatrix& m) {
  m.validate(0);
  fs::create_directories(dir);
  // Invalidate any previous store before touching its payload.
  std::error_code ec;
  fs::remove(dir / "header.json", ec);
  const auto n = static_cast<std::size_t>(m.rows());
  const auto cols = static_cast<std::size_t>(m.cols());

  std::string payload;
  payload.reserve(n * cols * 4);
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      detail::put_f32_le(payload, static_cast<float>(m.values(i, j)));
  io::write_atomic(dir / "values.bin", payload);

  io::write_atomic(dir / "ids.txt", [&](std::ostream& out) {
    for (const auto& id : m.ids) out << id << '\n';
  });
  io::write_atomic(dir / "z.txt", [&](std::ostream& out) {
    for (int v : m.z) out << v << '\n';
  });
  if (!m.y.empty())
    io::write_atomic(dir / "y.txt", [&](std::ostream& out) {
      for (int v : m.y) out << v << '\n';
    });

  nlohmann::ordered_json header;
  header["name"] = m.name;
  header["rows"] = n;
  header["cols"] = cols;
  header["dtype"] = "f32";
  header["byte_order"] = "little-endian";
  header["ids"] = "ids.txt";
  header["z"] = "z.txt";
  if (!m.y.empty()) header["y"] = "y.txt";
  io::write_atomic(dir / "header.json", header.dump(2) + "\n");
}

inline SampleMatrix read_dir(const fs::path& dir) {
  const auto header_path = dir / "header.json";
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(io::read_file(header_path));
  } catch (const nlohmann::json::exception& e) {
    throw UserError(header_path.string() + ": " + e.what());
  }
  if (header.value("dtype", "") != "f32" || header.value("byte_order", "") != "little-endian")
    throw UserError(header_path.string() + ": only f32 little-endian stores are supported");

  SampleMatrix m;
  m.name = header.value("name", "");
  const auto n = header.at("rows").get<std::size_t>();
  const auto cols = header.at("cols").get<std::size_t>();

  const std::string payload = io::read_file(dir / "values.bin");
  if (payload.size() != n * cols * 4)
    throw UserError((dir / "values.bin").string() + ": expected " + std::to_string(n * cols * 4) +
                    " bytes, found " + std::to_string(payload.size()));
  m.values.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(cols));
  const char* p = payload.data();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < cols; ++j, p += 4)
      m.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = detail::get_f32_le(p);

  m.ids = detail::read_lines(dir / header.value("ids", "ids.txt"));
  for (const auto& s : detail::read_lines(dir / header.value("z", "z.txt")))
    m.z.push_back(detail::parse_int(s, "z file"));
  if (header.contains("y"))
    for (const auto& s : detail::read_lines(dir / header["y"].get<std::string>()))
      m.y.push_back(detail::parse_int(s, "y file"));
  if (m.ids.size() != n || m.z.size() != n || (!m.y.empty() && m.y.size() != n))
    throw UserError(dir.string() + ": id/z/y line counts do not match rows=" + std::to_string(n));
  m.validate(0);
  return m;
}

/// CSV fallback: header `sample_id,z[,y],c0,c1,...`, values printed with
/// enough digits to round-trip f32.
inline void write_csv(const fs::path& path, const SampleMatrix& m) {
  m.validate(0);
  if (static_cast<std::size_t>(m.rows()) > kCsvRowCap)
    throw UserError("CSV matrix stores are capped at " + std::to_string(kCsvRowCap) + " rows");
  io::write_atomic(path, [&](std::ostream& out) {
    out << "sample_id,z";
    if (!m.y.empty()) out << ",y";
    for (Eigen::Index j = 0; j < m.cols(); ++j) out << ",c" << j;
    out << '\n';
    out.precision(9);
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      const auto r = static_cast<std::size_t>(i);
      out << m.ids[r] << ',' << m.z[r];
      if (!m.y.empty()) out << ',' << m.y[r];
      for (Eigen::Index j = 0; j < m.cols(); ++j) out << ',' << static_cast<float>(m.values(i, j));
      out << '\n';
    }
  });
}

inline SampleMatrix read_csv(const fs::path& path) {
  const auto lines = detail::read_lines(path);
  if (lines.empty()) throw UserError(path.string() + ": empty CSV");
  const auto head = text::split(lines[0], ',');
  if (head.size() < 2 || head[0] != "sample_id" || head[1] != "z")
    throw UserError(path.string() + ": header must start with sample_id,z");
  const bool has_y = head.size() > 2 && head[2] == "y";
  const std::size_t first = has_y ? 3 : 2;
  const std::size_t cols = head.size() - first;
  std::vector<std::string> rows;
  for (std::size_t i = 1; i < lines.size(); ++i)
    if (!lines[i].empty()) rows.push_back(lines[i]);

  SampleMatrix m;
  m.name = path.stem().string();
  m.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto f = text::split(rows[i], ',');
    if (f.size() != head.size())
      throw ParseError(path.string(), i + 2, "expected " + std::to_string(head.size()) + " fields");
    m.ids.push_back(f[0]);
    m.z.push_back(detail::parse_int(f[1], path.string()));
    if (has_y) m.y.push_back(detail::parse_int(f[2], path.string()));
    for (std::size_t j = 0; j < cols; ++j)
      m.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          static_cast<float>(detail::parse_double(f[first + j], path.string()));
  }
  m.validate(0);
  return m;
}

/// Reads a store directory or a `.csv` file.
inline SampleMatrix read(const fs::path& path) {
  if (fs::is_directory(path)) return read_dir(path);
  if (path.extension() == ".csv") return read_csv(path);
  throw UserError(path.string() + " is neither a matrix store directory nor a .csv file");
}

inline void write(const fs::path& path, const SampleMatrix& m) {
  if (path.extension() == ".csv")
    write_csv(path, m);
  else
    write_dir(path, m);
}

/// A feature archive is a directory of per-layer stores plus `archive.json`
/// listing the layer keys in order.
struct Archive {
  std::vector<SampleMatrix> layers;

  const SampleMatrix& at(const std::string& key) const {
    for (const auto& l : layers)
      if (l.name == key) return l;
    throw UserError("archive has no layer '" + key + "'");
  }
};

inline std::string layer_dirname(const std::string& key) {
  std::string out = "layer_";
  for (char c : key) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-') ? c : '_';
  return out;
}

inline void write_archive(const fs::path& dir, const Archive& a) {
  nlohmann::ordered_json index;
  index["layers"] = nlohmann::json::array();
  for (const auto& layer : a.layers) {
    const auto sub = layer_dirname(layer.name);
    write_dir(dir / sub, layer);
    index["layers"].push_back({{"key", layer.name}, {"dir", sub}});
  }
  io::write_atomic(dir / "archive.json", index.dump(2) + "\n");
}

inline Archive read_archive(const fs::path& dir) {
  nlohmann::json index;
  try {
    index = nlohmann::json::parse(io::read_file(dir / "archive.json"));
  } catch (const nlohmann::json::exception& e) {
    throw UserError((dir / "archive.json").string() + ": " + e.what());
  }
  Archive a;
  for (const auto& entry : index.at("layers")) {
    auto m = read_dir(dir / entry.at("dir").get<std::string>());
    m.name = entry.at("key").get<std::string>();
    a.layers.push_back(std::move(m));
  }
  return a;
}

}  // namespace store
}  // namespace oodbench

#endif  // OODBENCH_MATRIX_STORE_HPP
