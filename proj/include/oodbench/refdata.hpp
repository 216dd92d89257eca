#ifndef OODBENCH_REFDATA_HPP
#define OODBENCH_REFDATA_HPP

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include "error.hpp"
#include "matrix_store.hpp"
#include "rng.hpp"
#include "scorers.hpp"

namespace oodbench::refdata {

// ---------------------------------------------------------------------------
// Toy taxonomies in WordNet data-file format.

enum class TaxonomyKind { chain, diamond, star, random };

struct TaxonomySpec {
  TaxonomyKind kind = TaxonomyKind::chain;
  std::size_t nodes = 3;
  double edge_probability = 0.2;  // random: chance that j < i is a hypernym of i
  std::uint64_t seed = 0;
};

/// Node names: "a".."z" for small fixtures, "node_<i>" beyond that.
inline std::string node_name(std::size_t i, std::size_t n) {
  if (n <= 26) return std::string(1, static_cast<char>('a' + i));
  return "node_" + std::to_string(i);
}

/// Hypernym lists by node index; node 0 is created first.
inline std::vector<std::vector<std::size_t>> taxonomy_edges(const TaxonomySpec& spec) {
  const std::size_t n = spec.nodes;
  std::vector<std::vector<std::size_t>> parents(n);
  switch (spec.kind) {
    case TaxonomyKind::chain:
      for (std::size_t i = 1; i < n; ++i) parents[i] = {i - 1};
      break;
    case TaxonomyKind::diamond:
      // a is the top, the last node sits under every middle node.
      if (n < 3) throw UserError("diamond taxonomy needs at least 3 nodes");
      for (std::size_t i = 1; i + 1 < n; ++i) {
        parents[i] = {0};
        parents[n - 1].push_back(i);
      }
      break;
    case TaxonomyKind::star:
      for (std::size_t i = 1; i < n; ++i) parents[i] = {0};
      break;
    case TaxonomyKind::random: {
      if (!(spec.edge_probability >= 0.0 && spec.edge_probability <= 1.0))
        throw UserError("edge probability must lie in [0, 1]");
      Rng rng(derive_seed(spec.seed, "refdata/taxonomy"));
      for (std::size_t i = 1; i < n; ++i)
        for (std::size_t j = 0; j < i; ++j)
          if (rng.uniform() < spec.edge_probability) parents[i].push_back(j);
      break;
    }
  }
  return parents;
}

/// Renders hypernym lists as `data.noun` text with true byte offsets.
inline std::string render_data_noun(const std::vector<std::vector<std::size_t>>& parents,
                                    const std::vector<std::string>& names) {
  const std::size_t n = parents.size();
  if (names.size() != n) throw UserError("one name per node required");
  if (n > 255) throw UserError("fixture taxonomies are limited to 255 nodes");
  auto line_for = [&](std::size_t i, const std::vector<std::uint32_t>& offsets) {
    char buf[64];
    std::string line;
    std::snprintf(buf, sizeof buf, "%08u 03 n 01 ", offsets[i]);
    line += buf;
    line += names[i];
    std::snprintf(buf, sizeof buf, " 0 %03zu", parents[i].size());
    line += buf;
    for (auto p : parents[i]) {
      std::snprintf(buf, sizeof buf, " @ %08u n 0000", offsets[p]);
      line += buf;
    }
    line += " | fixture node " + names[i] + "  \n";
    return line;
  };
  // Line lengths do not depend on offset values (fixed-width fields).
  std::vector<std::uint32_t> offsets(n, 0);
  std::uint32_t at = 0;
  for (std::size_t i = 0; i < n; ++i) {
    offsets[i] = at;
    at += static_cast<std::uint32_t>(line_for(i, std::vector<std::uint32_t>(n, 0)).size());
  }
  std::string out;
  for (std::size_t i = 0; i < n; ++i) out += line_for(i, offsets);
  return out;
}

inline std::string gen_taxonomy(const TaxonomySpec& spec) {
  if (spec.nodes > 255) throw UserError("fixture taxonomies are limited to 255 nodes");
  const auto parents = taxonomy_edges(spec);
  std::vector<std::string> names;
  for (std::size_t i = 0; i < spec.nodes; ++i) names.push_back(node_name(i, spec.nodes));
  return render_data_noun(parents, names);
}

// ---------------------------------------------------------------------------
// Gaussian feature clouds.

struct GaussianSpec {
  std::string layer = "features";
  Eigen::Index dims = 2;
  std::size_t n_train = 2000;
  std::size_t n_val_id = 2000;
  std::size_t n_val_ood = 500;
  double separation = 6.0;  // OOD mean offset in every coordinate, in σ units
  double sigma = 1.0;
  std::uint64_t seed = 0;
};

struct FeatureSplit {
  SampleMatrix train;  // ID only
  SampleMatrix val;    // ID rows first, then OOD rows
};

namespace detail {

inline std::string sample_id(const char* prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s-%06zu", prefix, i);
  return buf;
}

inline void fill_gaussian(RowMatrix& m, Eigen::Index row0, std::size_t n, double mean, double sigma,
                          Rng& rng) {
  for (std::size_t i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      m(row0 + static_cast<Eigen::Index>(i), j) = mean + sigma * rng.normal();
}

}  // namespace detail

inline FeatureSplit gen_gaussians(const GaussianSpec& spec) {
  if (spec.dims < 1) throw UserError("gaussian fixture needs at least one dimension");
  if (!(spec.sigma > 0.0)) throw UserError("gaussian fixture needs sigma > 0");
  if (spec.n_train == 0 || spec.n_val_id == 0 || spec.n_val_ood == 0)
    throw UserError("gaussian fixture needs non-empty train, val-ID and val-OOD sets");
  Rng rng(derive_seed(spec.seed, "refdata/gaussians/" + spec.layer));
  FeatureSplit out;
  out.train.name = out.val.name = spec.layer;
  out.train.values.resize(static_cast<Eigen::Index>(spec.n_train), spec.dims);
  detail::fill_gaussian(out.train.values, 0, spec.n_train, 0.0, spec.sigma, rng);
  for (std::size_t i = 0; i < spec.n_train; ++i) {
    out.train.ids.push_back(detail::sample_id("train", i));
    out.train.z.push_back(0);
  }
  out.val.values.resize(static_cast<Eigen::Index>(spec.n_val_id + spec.n_val_ood), spec.dims);
  detail::fill_gaussian(out.val.values, 0, spec.n_val_id, 0.0, spec.sigma, rng);
  detail::fill_gaussian(out.val.values, static_cast<Eigen::Index>(spec.n_val_id), spec.n_val_ood,
                        spec.separation * spec.sigma, spec.sigma, rng);
  for (std::size_t i = 0; i < spec.n_val_id; ++i) {
    out.val.ids.push_back(detail::sample_id("val-id", i));
    out.val.z.push_back(0);
  }
  for (std::size_t i = 0; i < spec.n_val_ood; ++i) {
    out.val.ids.push_back(detail::sample_id("val-ood", i));
    out.val.z.push_back(1);
  }
  return out;
}

/// Per-layer Gaussian clouds sharing sample ids, e.g. one separable layer and
/// one pure-noise layer.
inline std::pair<store::Archive, store::Archive> gen_layer_archive(
    const std::vector<GaussianSpec>& layers) {
  std::pair<store::Archive, store::Archive> out;
  for (const auto& spec : layers) {
    auto split = gen_gaussians(spec);
    out.first.layers.push_back(std::move(split.train));
    out.second.layers.push_back(std::move(split.val));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Toy classification problem with a trained RefNet.

struct ClassifierSpec {
  std::size_t classes = 2;
  Eigen::Index dims = 2;
  Eigen::Index hidden = 8;
  std::size_t n_per_class = 200;
  std::size_t n_ood = 0;       // extra rows from a displaced cluster, z = 1, y = -1
  double separation = 6.0;     // class means sit this many σ apart from the origin
  double ood_shift = -6.0;     // OOD cluster mean in every coordinate, in σ units
  double sigma = 1.0;
  std::size_t iterations = 300;
  double learning_rate = 0.5;
  double target_accuracy = 0.95;
  std::vector<std::string> layers{"input", "hidden"};
  std::uint64_t seed = 0;
};

struct ClassifierProblem {
  SampleMatrix inputs;  // y = class (or -1 for OOD rows)
  scorers::RefNet net;
  double train_accuracy = 0.0;
};

namespace detail {

inline RowMatrix class_means(const ClassifierSpec& spec, Rng& rng) {
  RowMatrix means = RowMatrix::Zero(static_cast<Eigen::Index>(spec.classes), spec.dims);
  for (std::size_t k = 0; k < spec.classes; ++k) {
    if (static_cast<Eigen::Index>(k) < spec.dims) {
      means(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k)) = spec.separation * spec.sigma;
    } else {
      Eigen::RowVectorXd dir(spec.dims);
      for (Eigen::Index j = 0; j < spec.dims; ++j) dir(j) = rng.normal();
      means.row(static_cast<Eigen::Index>(k)) = dir.normalized() * spec.separation * spec.sigma;
    }
  }
  return means;
}

inline double accuracy(const scorers::RefNet& net, const RowMatrix& x, const std::vector<int>& y) {
  std::size_t hits = 0, n = 0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const int label = y[static_cast<std::size_t>(i)];
    if (label < 0) continue;
    Eigen::Index arg = 0;
    scorers::refnet_forward(net, x.row(i).transpose()).maxCoeff(&arg);
    hits += arg == label;
    ++n;
  }
  return n == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(n);
}

}  // namespace detail

/// Full-batch gradient descent on mean cross-entropy over the ID rows.
inline void train_refnet(scorers::RefNet& net, const RowMatrix& x, const std::vector<int>& y,
                         std::size_t iterations, double lr) {
  std::vector<Eigen::Index> rows;
  for (std::size_t i = 0; i < y.size(); ++i)
    if (y[i] >= 0) rows.push_back(static_cast<Eigen::Index>(i));
  const auto n = static_cast<Eigen::Index>(rows.size());
  if (n == 0) throw UserError("no labelled rows to train on");
  RowMatrix xs(n, x.cols());
  Eigen::MatrixXd onehot = Eigen::MatrixXd::Zero(n, net.classes());
  for (Eigen::Index r = 0; r < n; ++r) {
    xs.row(r) = x.row(rows[static_cast<std::size_t>(r)]);
    onehot(r, y[static_cast<std::size_t>(rows[static_cast<std::size_t>(r)])]) = 1.0;
  }
  for (std::size_t it = 0; it < iterations; ++it) {
    Eigen::MatrixXd a = xs * net.w1.transpose();
    a.rowwise() += net.b1.transpose();
    const Eigen::MatrixXd h = net.activation == scorers::Activation::tanh
                                  ? Eigen::MatrixXd(a.array().tanh().matrix())
                                  : a;
    Eigen::MatrixXd l = h * net.w2.transpose();
    l.rowwise() += net.b2.transpose();
    Eigen::MatrixXd p(l.rows(), l.cols());
    for (Eigen::Index r = 0; r < l.rows(); ++r) p.row(r) = scorers::softmax(l.row(r).transpose()).transpose();
    const Eigen::MatrixXd g_l = (p - onehot) / static_cast<double>(n);
    const Eigen::MatrixXd g_w2 = g_l.transpose() * h;
    const Vector g_b2 = g_l.colwise().sum().transpose();
    Eigen::MatrixXd g_a = g_l * net.w2;
    if (net.activation == scorers::Activation::tanh)
      g_a = (g_a.array() * (1.0 - h.array().square())).matrix();
    const Eigen::MatrixXd g_w1 = g_a.transpose() * xs;
    const Vector g_b1 = g_a.colwise().sum().transpose();
    net.w2 -= lr * g_w2;
    net.b2 -= lr * g_b2;
    net.w1 -= lr * g_w1;
    net.b1 -= lr * g_b1;
  }
}

inline ClassifierProblem gen_classifier_problem(const ClassifierSpec& spec) {
  if (spec.classes < 2 || spec.dims < 1 || spec.hidden < 1 || spec.n_per_class == 0)
    throw UserError("classifier fixture needs >= 2 classes and positive sizes");
  for (const auto& l : spec.layers)
    if (l != "input" && l != "hidden" && l != "logits")
      throw UserError("unknown classifier layer '" + l + "' (input, hidden, logits)");
  Rng rng(derive_seed(spec.seed, "refdata/classifier"));
  const RowMatrix means = detail::class_means(spec, rng);

  ClassifierProblem p;
  p.inputs.name = "input";
  const std::size_t n_id = spec.classes * spec.n_per_class;
  p.inputs.values.resize(static_cast<Eigen::Index>(n_id + spec.n_ood), spec.dims);
  std::size_t row = 0;
  for (std::size_t k = 0; k < spec.classes; ++k)
    for (std::size_t i = 0; i < spec.n_per_class; ++i, ++row) {
      for (Eigen::Index j = 0; j < spec.dims; ++j)
        p.inputs.values(static_cast<Eigen::Index>(row), j) =
            means(static_cast<Eigen::Index>(k), j) + spec.sigma * rng.normal();
      p.inputs.ids.push_back(detail::sample_id(("c" + std::to_string(k)).c_str(), i));
      p.inputs.z.push_back(0);
      p.inputs.y.push_back(static_cast<int>(k));
    }
  for (std::size_t i = 0; i < spec.n_ood; ++i, ++row) {
    for (Eigen::Index j = 0; j < spec.dims; ++j)
      p.inputs.values(static_cast<Eigen::Index>(row), j) =
          spec.ood_shift * spec.sigma + spec.sigma * rng.normal();
    p.inputs.ids.push_back(detail::sample_id("ood", i));
    p.inputs.z.push_back(1);
    p.inputs.y.push_back(-1);
  }

  auto& net = p.net;
  const auto k = static_cast<Eigen::Index>(spec.classes);
  net.w1.resize(spec.hidden, spec.dims);
  net.w2.resize(k, spec.hidden);
  const double s1 = 1.0 / std::sqrt(static_cast<double>(spec.dims));
  const double s2 = 1.0 / std::sqrt(static_cast<double>(spec.hidden));
  for (Eigen::Index i = 0; i < net.w1.size(); ++i) net.w1.data()[i] = s1 * rng.normal();
  for (Eigen::Index i = 0; i < net.w2.size(); ++i) net.w2.data()[i] = s2 * rng.normal();
  net.b1 = Vector::Zero(spec.hidden);
  net.b2 = Vector::Zero(k);

  train_refnet(net, p.inputs.values, p.inputs.y, spec.iterations, spec.learning_rate);
  p.train_accuracy = detail::accuracy(net, p.inputs.values, p.inputs.y);
  if (p.train_accuracy < spec.target_accuracy)
    throw InvariantError("classifier fixture reached only " + std::to_string(p.train_accuracy) +
                         " train accuracy (target " + std::to_string(spec.target_accuracy) + ")");
  return p;
}

/// Per-layer feature archive for the configured layer keys.
inline store::Archive classifier_archive(const ClassifierProblem& p,
                                         const std::vector<std::string>& layers) {
  store::Archive a;
  for (const auto& key : layers) {
    SampleMatrix m;
    m.name = key;
    m.ids = p.inputs.ids;
    m.z = p.inputs.z;
    m.y = p.inputs.y;
    if (key == "input") {
      m.values = p.inputs.values;
    } else if (key == "hidden") {
      m.values.resize(p.inputs.rows(), p.net.hidden_dim());
      for (Eigen::Index i = 0; i < p.inputs.rows(); ++i)
        m.values.row(i) = p.net.hidden(p.inputs.values.row(i).transpose()).transpose();
    } else if (key == "logits") {
      m.values = scorers::refnet_logits(p.net, p.inputs).values;
    } else {
      throw UserError("unknown classifier layer '" + key + "'");
    }
    a.layers.push_back(std::move(m));
  }
  return a;
}

}  // namespace oodbench::refdata

#endif  // OODBENCH_REFDATA_HPP
