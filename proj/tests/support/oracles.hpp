// Brute-force reference implementations. Deliberately naive; they share no
// code with the library beyond plain data types.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <set>
#include <vector>

namespace oracle {

// --- ranking metrics -------------------------------------------------------

/// Pairwise win counting, ties ½; ID (z = 0) is positive.
inline double auroc(const std::vector<double>& s, const std::vector<int>& z) {
  double wins = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (z[i] != 0) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (z[j] != 1) continue;
      ++pairs;
      if (s[i] > s[j]) wins += 1.0;
      else if (s[i] == s[j]) wins += 0.5;
    }
  }
  return wins / static_cast<double>(pairs);
}

struct Point {
  double tpr, fpr;
};

/// One (tpr, fpr) point per candidate threshold: +inf and every observed score,
/// accepting score >= threshold. O(n²).
inline std::vector<Point> sweep(const std::vector<double>& s, const std::vector<int>& z) {
  std::vector<double> thresholds{std::numeric_limits<double>::infinity()};
  thresholds.insert(thresholds.end(), s.begin(), s.end());
  std::size_t np = 0, nn = 0;
  for (int v : z) (v == 0 ? np : nn)++;
  std::vector<Point> pts;
  for (double th : thresholds) {
    std::size_t tp = 0, fp = 0;
    for (std::size_t i = 0; i < s.size(); ++i)
      if (s[i] >= th) (z[i] == 0 ? tp : fp)++;
    pts.push_back({static_cast<double>(tp) / static_cast<double>(np),
                   static_cast<double>(fp) / static_cast<double>(nn)});
  }
  return pts;
}

/// FPR at TPR = target on the piecewise-linear ROC: the cheapest point at or
/// above the target and the most expensive point below it, interpolated.
inline double fpr_at_tpr(const std::vector<double>& s, const std::vector<int>& z, double target) {
  const auto pts = sweep(s, z);
  Point hi{2.0, 2.0}, lo{-1.0, -1.0};
  for (const auto& p : pts) {
    if (p.tpr >= target) {
      if (p.tpr < hi.tpr || (p.tpr == hi.tpr && p.fpr < hi.fpr)) hi = p;
    } else if (p.tpr > lo.tpr || (p.tpr == lo.tpr && p.fpr > lo.fpr)) {
      lo = p;
    }
  }
  if (hi.tpr == target || lo.tpr < 0.0) return hi.fpr;
  return lo.fpr + (target - lo.tpr) * (hi.fpr - lo.fpr) / (hi.tpr - lo.tpr);
}

inline double detection_error(const std::vector<double>& s, const std::vector<int>& z, double target) {
  return 0.5 * (1.0 - target) + 0.5 * fpr_at_tpr(s, z, target);
}

inline double min_detection_error(const std::vector<double>& s, const std::vector<int>& z) {
  double best = 1.0;
  for (const auto& p : sweep(s, z)) best = std::min(best, 0.5 * (1.0 - p.tpr) + 0.5 * p.fpr);
  return best;
}

// --- taxonomies ------------------------------------------------------------

/// Nodes 0..n-1 with parent lists; node n is the virtual root, parent of every
/// node without hypernyms.
struct Dag {
  std::vector<std::vector<std::size_t>> parents;

  std::size_t root() const { return parents.size(); }

  std::vector<std::size_t> up(std::size_t v) const {
    if (v == root()) return {};
    if (parents[v].empty()) return {root()};
    return parents[v];
  }

  /// Enumerates every upward path from v, recording the shortest length to
  /// each node reached.
  std::map<std::size_t, int> ancestors(std::size_t v) const {
    std::map<std::size_t, int> best;
    std::vector<std::pair<std::size_t, int>> stack{{v, 0}};
    while (!stack.empty()) {
      auto [u, d] = stack.back();
      stack.pop_back();
      auto it = best.find(u);
      if (it == best.end() || d < it->second) best[u] = d;
      for (auto p : up(u)) stack.push_back({p, d + 1});
    }
    return best;
  }

  /// Longest upward path to the virtual root, counted in real nodes.
  int depth(std::size_t v) const {
    if (v == root()) return 0;
    int best = 0;
    for (auto p : up(v)) best = std::max(best, depth(p));
    return best + 1;
  }

  int max_depth() const {
    int d = 0;
    for (std::size_t v = 0; v < parents.size(); ++v) d = std::max(d, depth(v));
    return d;
  }

  int shortest_path(std::size_t a, std::size_t b) const {
    const auto da = ancestors(a), db = ancestors(b);
    int best = std::numeric_limits<int>::max();
    for (const auto& [s, d] : da)
      if (db.count(s)) best = std::min(best, d + db.at(s));
    return best;
  }

  /// Deepest common ancestor; ties to the lowest index; root last resort.
  std::size_t lcs(std::size_t a, std::size_t b) const {
    const auto da = ancestors(a), db = ancestors(b);
    std::size_t best = root();
    int best_depth = 0;
    for (const auto& [s, _] : da) {
      if (!db.count(s) || s == root()) continue;
      const int d = depth(s);
      if (d > best_depth || (d == best_depth && s < best)) {
        best = s;
        best_depth = d;
      }
    }
    return best;
  }
};

}  // namespace oracle
