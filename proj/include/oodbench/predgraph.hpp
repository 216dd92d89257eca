#ifndef OODBENCH_PREDGRAPH_HPP
#define OODBENCH_PREDGRAPH_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <numbers>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "error.hpp"
#include "io.hpp"
#include "rng.hpp"
#include "text.hpp"

namespace oodbench::graph {

using Edge = std::pair<std::string, std::string>;

/// Directed misclassification graph over `dataset:class` nodes; the weight
/// of (a, b) counts the samples of class a predicted as b.
struct PredictionGraph {
  std::set<std::string> nodes;
  std::map<Edge, std::uint64_t> edges;

  std::size_t node_count() const { return nodes.size(); }
  std::size_t edge_count() const { return edges.size(); }

  std::uint64_t total_weight() const {
    std::uint64_t total = 0;
    for (const auto& [_, w] : edges) total += w;
    return total;
  }

  void add(const std::string& src, const std::string& dst, std::uint64_t weight = 1) {
    if (weight == 0) throw UserError("edge weights must be positive");
    nodes.insert(src);
    nodes.insert(dst);
    edges[{src, dst}] += weight;
  }

  friend bool operator==(const PredictionGraph&, const PredictionGraph&) = default;
};

inline PredictionGraph build_graph(const std::vector<Edge>& predictions) {
  PredictionGraph g;
  for (const auto& [gt, pred] : predictions) g.add(gt, pred);
  return g;
}

/// Dataset namespace and scene qualifiers stripped, lowercase, underscores
/// as spaces, tokens sorted: "places:/s/shoe_shop" and "in:Shop Shoe" agree.
inline std::string normalize_class_name(std::string_view name) {
  const std::string head = text::lower(text::scene_head(text::strip_namespace(name)));
  std::string spaced = head;
  std::replace(spaced.begin(), spaced.end(), '_', ' ');
  auto tokens = text::split_ws(spaced);
  std::sort(tokens.begin(), tokens.end());
  return text::join(tokens, " ");
}

struct PruneConfig {
  bool drop_self_loops = true;
  bool drop_intra_dataset = true;
  bool drop_same_name = true;
  std::uint64_t min_weight = 3;
  bool drop_isolated = true;
};

struct StageCount {
  std::string stage;
  std::size_t nodes = 0;
  std::size_t edges = 0;
};

struct PruneResult {
  PredictionGraph graph;
  std::vector<StageCount> log;
};

/// Stages run in order: self-loops, intra-dataset edges, same-name edges,
/// low-weight edges, isolated nodes. The log has the input counts followed by
/// one entry per stage.
inline PruneResult prune_graph(const PredictionGraph& g, const PruneConfig& cfg) {
  if (cfg.min_weight < 1) throw UserError("min_weight must be a positive integer");
  PruneResult r{g, {{"input", g.node_count(), g.edge_count()}}};
  auto stage = [&](const std::string& name, bool enabled, auto drop) {
    if (enabled) std::erase_if(r.graph.edges, drop);
    r.log.push_back({name, r.graph.node_count(), r.graph.edge_count()});
  };
  stage("self_loops", cfg.drop_self_loops, [](const auto& e) { return e.first.first == e.first.second; });
  stage("intra_dataset", cfg.drop_intra_dataset, [](const auto& e) {
    return text::namespace_of(e.first.first) == text::namespace_of(e.first.second);
  });
  stage("same_name", cfg.drop_same_name, [](const auto& e) {
    return normalize_class_name(e.first.first) == normalize_class_name(e.first.second);
  });
  stage("min_weight", true, [&](const auto& e) { return e.second < cfg.min_weight; });
  if (cfg.drop_isolated) {
    std::set<std::string> used;
    for (const auto& [e, _] : r.graph.edges) {
      used.insert(e.first);
      used.insert(e.second);
    }
    r.graph.nodes = std::move(used);
  }
  r.log.push_back({"isolated", r.graph.node_count(), r.graph.edge_count()});
  return r;
}

// ---------------------------------------------------------------------------
// ForceAtlas2 layout (no Barnes-Hut; exact O(n²) repulsion).

struct Fa2Params {
  double gravity = 1.0;
  double scaling = 2.0;
  bool linlog = false;
  double jitter_tolerance = 1.0;
  double init_extent = 100.0;  // initial positions uniform in [-extent, extent]²
};

using Vec2 = std::array<double, 2>;

struct Layout {
  std::map<std::string, Vec2> positions;
  std::size_t iterations = 0;
  double swing = 0.0;
};

class ForceAtlas2 {
 public:
  static constexpr double kMinDistance = 0.01;

  ForceAtlas2(const PredictionGraph& g, std::uint64_t seed, Fa2Params params = {})
      : params_(params), seed_(seed), names_(g.nodes.begin(), g.nodes.end()) {
    const std::size_t n = names_.size();
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < n; ++i) index[names_[i]] = i;
    mass_.assign(n, 1.0);
    for (const auto& [e, w] : g.edges) {
      const auto u = index.at(e.first);
      const auto v = index.at(e.second);
      if (u == v) continue;
      links_.push_back({u, v, static_cast<double>(w)});
      mass_[u] += 1.0;
      mass_[v] += 1.0;
    }
    Rng rng(derive_seed(seed, "forceatlas2/init"));
    pos_.resize(n);
    for (auto& p : pos_) p = {rng.uniform(-params.init_extent, params.init_extent),
                              rng.uniform(-params.init_extent, params.init_extent)};
    old_force_.assign(n, {0.0, 0.0});
  }

  /// Net force on every node at the current positions.
  std::vector<Vec2> forces() const {
    const std::size_t n = pos_.size();
    std::vector<Vec2> f(n, {0.0, 0.0});
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        double dx = pos_[i][0] - pos_[j][0];
        double dy = pos_[i][1] - pos_[j][1];
        double d2 = dx * dx + dy * dy;
        if (d2 < kMinDistance * kMinDistance) {
          // Coincident or nearly so: push apart along a seeded direction.
          Rng jitter(derive_seed(derive_seed(seed_, iterations_), i * n + j));
          const double a = jitter.uniform(0.0, 2.0 * std::numbers::pi);
          dx = kMinDistance * std::cos(a);
          dy = kMinDistance * std::sin(a);
          d2 = kMinDistance * kMinDistance;
        }
        const double k = params_.scaling * mass_[i] * mass_[j] / d2;
        f[i][0] += k * dx;
        f[i][1] += k * dy;
        f[j][0] -= k * dx;
        f[j][1] -= k * dy;
      }
    for (const auto& l : links_) {
      const double dx = pos_[l.u][0] - pos_[l.v][0];
      const double dy = pos_[l.u][1] - pos_[l.v][1];
      double k = l.weight;
      if (params_.linlog) {
        const double d = std::sqrt(dx * dx + dy * dy);
        k = d > 0.0 ? l.weight * std::log1p(d) / d : 0.0;
      }
      f[l.u][0] -= k * dx;
      f[l.u][1] -= k * dy;
      f[l.v][0] += k * dx;
      f[l.v][1] += k * dy;
    }
    if (params_.gravity != 0.0)
      for (std::size_t i = 0; i < n; ++i) {
        const double d = std::hypot(pos_[i][0], pos_[i][1]);
        if (d > 0.0) {
          const double k = params_.gravity * mass_[i] / d;
          f[i][0] -= k * pos_[i][0];
          f[i][1] -= k * pos_[i][1];
        }
      }
    return f;
  }

  /// One iteration: forces, global speed from swing/traction, then per-node
  /// displacement damped by the node's own swing.
  void step() {
    const auto f = forces();
    const std::size_t n = pos_.size();
    std::vector<double> node_swing(n);
    double total_swing = 0.0, total_traction = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      node_swing[i] = mass_[i] * std::hypot(f[i][0] - old_force_[i][0], f[i][1] - old_force_[i][1]);
      total_swing += node_swing[i];
      total_traction +=
          mass_[i] * std::hypot(f[i][0] + old_force_[i][0], f[i][1] + old_force_[i][1]) / 2.0;
    }
    if (total_swing > 0.0) {
      const double jt = params_.jitter_tolerance;
      const double target = jt * jt * total_traction / total_swing;
      constexpr double kMaxRise = 0.5;
      speed_ += std::min(target - speed_, kMaxRise * speed_);
    }
    for (std::size_t i = 0; i < n; ++i) {
      const double factor = speed_ / (1.0 + std::sqrt(speed_ * node_swing[i]));
      pos_[i][0] += f[i][0] * factor;
      pos_[i][1] += f[i][1] * factor;
    }
    old_force_ = f;
    swing_ = total_swing;
    ++iterations_;
  }

  void run(std::size_t iterations) {
    for (std::size_t k = 0; k < iterations; ++k) step();
  }

  Layout layout() const {
    Layout out;
    for (std::size_t i = 0; i < names_.size(); ++i) out.positions[names_[i]] = pos_[i];
    out.iterations = iterations_;
    out.swing = swing_;
    return out;
  }

  const std::vector<Vec2>& positions() const { return pos_; }

 private:
  struct Link {
    std::size_t u, v;
    double weight;
  };

  Fa2Params params_;
  std::uint64_t seed_;
  std::vector<std::string> names_;
  std::vector<double> mass_;
  std::vector<Link> links_;
  std::vector<Vec2> pos_;
  std::vector<Vec2> old_force_;
  double speed_ = 1.0;
  double swing_ = 0.0;
  std::size_t iterations_ = 0;
};

inline Layout layout_forceatlas2(const PredictionGraph& g, std::size_t iterations,
                                 std::uint64_t seed, Fa2Params params = {}) {
  ForceAtlas2 fa2(g, seed, params);
  fa2.run(iterations);
  return fa2.layout();
}

// ---------------------------------------------------------------------------
// I/O

inline std::vector<Edge> read_predictions(const std::filesystem::path& path) {
  auto in = io::open_input(path);
  std::vector<Edge> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (text::trim(line).empty() || line.front() == '#') continue;
    const auto f = text::split(line, '\t');
    if (f.size() != 2) throw ParseError(path.string(), lineno, "expected gt<TAB>pred");
    out.emplace_back(f[0], f[1]);
  }
  return out;
}

inline void write_graph_tsv(const std::filesystem::path& path, const PredictionGraph& g) {
  io::write_atomic(path, [&](std::ostream& out) {
    for (const auto& [e, w] : g.edges) out << e.first << '\t' << e.second << '\t' << w << '\n';
  });
}

inline PredictionGraph read_graph_tsv(const std::filesystem::path& path) {
  auto in = io::open_input(path);
  PredictionGraph g;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (text::trim(line).empty()) continue;
    const auto f = text::split(line, '\t');
    if (f.size() != 3) throw ParseError(path.string(), lineno, "expected src<TAB>dst<TAB>weight");
    std::uint64_t w = 0;
    try {
      std::size_t used = 0;
      w = std::stoull(f[2], &used);
      if (used != f[2].size() || w == 0) throw std::invalid_argument(f[2]);
    } catch (const std::logic_error&) {
      throw ParseError(path.string(), lineno, "weight must be a positive integer");
    }
    g.add(f[0], f[1], w);
  }
  return g;
}

inline std::string stage_log_json(const std::vector<StageCount>& log) {
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (const auto& s : log) j.push_back({{"stage", s.stage}, {"nodes", s.nodes}, {"edges", s.edges}});
  return j.dump(2) + "\n";
}

inline std::string layout_json(const Layout& layout) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [node, p] : layout.positions) j[node] = {p[0], p[1]};
  return j.dump(2) + "\n";
}

}  // namespace oodbench::graph

#endif  // OODBENCH_PREDGRAPH_HPP
