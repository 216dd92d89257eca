#ifndef OODBENCH_SCORES_HPP
#define OODBENCH_SCORES_HPP

#include <cmath>
#include <string>
#include <vector>

#include "error.hpp"
#include "io.hpp"
#include "text.hpp"

namespace oodbench {

/// Per-sample confidence scores: higher means more in-distribution.
/// The OOD score of a detector is the negation; use `ood_scores()`.
struct ScoreVector {
  std::vector<std::string> ids;
  std::vector<double> scores;
  std::vector<int> z;  // 0 = ID, 1 = OOD

  std::size_t size() const { return scores.size(); }

  std::vector<double> ood_scores() const {
    std::vector<double> out(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) out[i] = -scores[i];
    return out;
  }

  void validate() const {
    if (z.size() != scores.size() || (!ids.empty() && ids.size() != scores.size()))
      throw UserError("score vector: id/score/z lengths differ");
    for (double s : scores)
      if (!std::isfinite(s)) throw UserError("score vector has non-finite scores");
    for (int v : z)
      if (v != 0 && v != 1) throw UserError("score vector: z must be 0 or 1");
  }
};

/// `sample_id,score,z` with 17 significant digits so scores round-trip.
inline void write_scores_csv(const std::filesystem::path& path, const ScoreVector& s) {
  s.validate();
  io::write_atomic(path, [&](std::ostream& out) {
    out << "sample_id,score,z\n";
    out.precision(17);
    for (std::size_t i = 0; i < s.size(); ++i)
      out << (s.ids.empty() ? std::to_string(i) : s.ids[i]) << ',' << s.scores[i] << ',' << s.z[i]
          << '\n';
  });
}

inline ScoreVector read_scores_csv(const std::filesystem::path& path) {
  auto in = io::open_input(path);
  std::string line;
  if (!std::getline(in, line) || text::trim(line) != "sample_id,score,z")
    throw UserError(path.string() + ": header must be sample_id,score,z");
  ScoreVector s;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    line = text::trim(line);
    if (line.empty()) continue;
    const auto f = text::split(line, ',');
    if (f.size() != 3) throw ParseError(path.string(), lineno, "expected 3 fields");
    try {
      std::size_t used = 0;
      s.scores.push_back(std::stod(f[1], &used));
      if (used != f[1].size()) throw std::invalid_argument(f[1]);
      s.z.push_back(std::stoi(f[2], &used));
      if (used != f[2].size()) throw std::invalid_argument(f[2]);
    } catch (const std::logic_error&) {
      throw ParseError(path.string(), lineno, "bad number");
    }
    s.ids.push_back(f[0]);
  }
  s.validate();
  return s;
}

}  // namespace oodbench

#endif  // OODBENCH_SCORES_HPP
