#ifndef OODBENCH_OODL_HPP
#define OODBENCH_OODL_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "error.hpp"
#include "matrix_store.hpp"
#include "metrics.hpp"
#include "rng.hpp"
#include "scores.hpp"

namespace oodbench::oodl {

// ---------------------------------------------------------------------------
// Streaming standardization (pairwise merge of per-batch moments).

class StreamingScaler {
 public:
  static constexpr double kSigmaFloor = 1e-12;

  StreamingScaler() = default;
  StreamingScaler(std::size_t n, Vector mean, Vector m2)
      : n_(n), mean_(std::move(mean)), m2_(std::move(m2)) {
    if (mean_.size() != m2_.size()) throw UserError("scaler: mean/m2 widths differ");
  }

  void partial_fit(const RowMatrix& batch) {
    if (batch.rows() == 0) return;
    if (n_ > 0 && batch.cols() != mean_.size())
      throw UserError("scaler: batch width " + std::to_string(batch.cols()) + " != " +
                      std::to_string(mean_.size()));
    const auto nb = static_cast<double>(batch.rows());
    const Vector mean_b = batch.colwise().mean().transpose();
    const Vector m2_b = (batch.rowwise() - mean_b.transpose()).array().square().colwise().sum().transpose();
    if (n_ == 0) {
      mean_ = mean_b;
      m2_ = m2_b;
    } else {
      const auto na = static_cast<double>(n_);
      const double total = na + nb;
      const Vector delta = mean_b - mean_;
      mean_ += delta * (nb / total);
      m2_ += m2_b + delta.cwiseProduct(delta) * (na * nb / total);
    }
    n_ += static_cast<std::size_t>(batch.rows());
  }

  RowMatrix transform(const RowMatrix& batch) const {
    if (n_ == 0) throw UserError("scaler: transform before any partial_fit");
    if (batch.cols() != mean_.size()) throw UserError("scaler: width mismatch in transform");
    const Vector sigma = variance().cwiseSqrt().cwiseMax(kSigmaFloor);
    return ((batch.rowwise() - mean_.transpose()).array().rowwise() / sigma.transpose().array()).matrix();
  }

  std::size_t count() const { return n_; }
  const Vector& mean() const { return mean_; }
  const Vector& m2() const { return m2_; }
  Vector variance() const { return n_ == 0 ? Vector() : Vector(m2_ / static_cast<double>(n_)); }

 private:
  std::size_t n_ = 0;
  Vector mean_;
  Vector m2_;
};

// ---------------------------------------------------------------------------
// Kernel approximations of exp(−γ‖x − y‖²).

struct RandomFourierMap {
  double gamma = 1.0;
  std::uint64_t seed = 0;
  RowMatrix weights;  // D × d, entries ~ N(0, 2γ)
  Vector phase;       // D, uniform on [0, 2π)

  Eigen::Index output_dim() const { return weights.rows(); }

  static RandomFourierMap fit(double gamma, Eigen::Index n_components, Eigen::Index input_dim,
                              std::uint64_t seed) {
    if (!(gamma > 0.0)) throw UserError("RFF: gamma must be positive");
    if (n_components < 1 || input_dim < 1) throw UserError("RFF: dimensions must be positive");
    RandomFourierMap m;
    m.gamma = gamma;
    m.seed = seed;
    Rng rng(seed);
    const double sd = std::sqrt(2.0 * gamma);
    m.weights.resize(n_components, input_dim);
    for (Eigen::Index i = 0; i < n_components; ++i)
      for (Eigen::Index j = 0; j < input_dim; ++j) m.weights(i, j) = sd * rng.normal();
    m.phase.resize(n_components);
    for (Eigen::Index i = 0; i < n_components; ++i) m.phase(i) = rng.uniform(0.0, 2.0 * std::numbers::pi);
    return m;
  }

  RowMatrix transform(const RowMatrix& x) const {
    if (x.cols() != weights.cols()) throw UserError("RFF: input width mismatch");
    RowMatrix proj = x * weights.transpose();
    proj.rowwise() += phase.transpose();
    return std::sqrt(2.0 / static_cast<double>(output_dim())) * proj.array().cos().matrix();
  }
};

inline double rbf_kernel(const Eigen::Ref<const Eigen::RowVectorXd>& a,
                         const Eigen::Ref<const Eigen::RowVectorXd>& b, double gamma) {
  return std::exp(-gamma * (a - b).squaredNorm());
}

inline RowMatrix rbf_kernel_matrix(const RowMatrix& a, const RowMatrix& b, double gamma) {
  RowMatrix k(a.rows(), b.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < b.rows(); ++j) k(i, j) = rbf_kernel(a.row(i), b.row(j), gamma);
  return k;
}

struct NystroemMap {
  static constexpr double kEigenFloor = 1e-12;

  double gamma = 1.0;
  std::uint64_t seed = 0;
  RowMatrix landmarks;   // m × d
  RowMatrix normalizer;  // m × m', U·Λ^{−1/2} over eigenvalues above the floor

  Eigen::Index output_dim() const { return normalizer.cols(); }

  static NystroemMap fit(double gamma, Eigen::Index m, const RowMatrix& source, std::uint64_t seed) {
    if (!(gamma > 0.0)) throw UserError("Nystroem: gamma must be positive");
    if (m < 1) throw UserError("Nystroem: need at least one landmark");
    if (m > source.rows())
      throw UserError("Nystroem: " + std::to_string(m) + " landmarks from " +
                      std::to_string(source.rows()) + " rows");
    NystroemMap map;
    map.gamma = gamma;
    map.seed = seed;
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(source.rows()));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    Rng rng(seed);
    rng.shuffle(idx);
    map.landmarks.resize(m, source.cols());
    for (Eigen::Index i = 0; i < m; ++i) map.landmarks.row(i) = source.row(idx[static_cast<std::size_t>(i)]);

    const RowMatrix k = rbf_kernel_matrix(map.landmarks, map.landmarks, gamma);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(k);
    if (eig.info() != Eigen::Success) throw InvariantError("Nystroem: eigendecomposition failed");
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = eig.eigenvalues().size() - 1; i >= 0; --i)
      if (eig.eigenvalues()(i) > kEigenFloor) keep.push_back(i);
    map.normalizer.resize(m, static_cast<Eigen::Index>(keep.size()));
    for (std::size_t c = 0; c < keep.size(); ++c)
      map.normalizer.col(static_cast<Eigen::Index>(c)) =
          eig.eigenvectors().col(keep[c]) / std::sqrt(eig.eigenvalues()(keep[c]));
    return map;
  }

  RowMatrix transform(const RowMatrix& x) const {
    if (x.cols() != landmarks.cols()) throw UserError("Nystroem: input width mismatch");
    return rbf_kernel_matrix(x, landmarks, gamma) * normalizer;
  }
};

enum class KernelKind { rbf_sampler, nystroem };

inline std::string kernel_name(KernelKind k) {
  return k == KernelKind::rbf_sampler ? "rbf_sampler" : "nystroem";
}

class KernelMap {
 public:
  KernelMap() = default;
  explicit KernelMap(RandomFourierMap m) : impl_(std::move(m)) {}
  explicit KernelMap(NystroemMap m) : impl_(std::move(m)) {}

  bool fitted() const { return !std::holds_alternative<std::monostate>(impl_); }

  KernelKind kind() const {
    if (std::holds_alternative<RandomFourierMap>(impl_)) return KernelKind::rbf_sampler;
    if (std::holds_alternative<NystroemMap>(impl_)) return KernelKind::nystroem;
    throw UserError("kernel map is not fitted");
  }

  RowMatrix transform(const RowMatrix& x) const {
    return std::visit(
        [&](const auto& m) -> RowMatrix {
          if constexpr (std::is_same_v<std::decay_t<decltype(m)>, std::monostate>)
            throw UserError("kernel map is not fitted");
          else
            return m.transform(x);
        },
        impl_);
  }

  const RandomFourierMap* rff() const { return std::get_if<RandomFourierMap>(&impl_); }
  const NystroemMap* nystroem() const { return std::get_if<NystroemMap>(&impl_); }

 private:
  std::variant<std::monostate, RandomFourierMap, NystroemMap> impl_;
};

// ---------------------------------------------------------------------------
// Linear one-class SVM trained by per-sample subgradient steps on
//   (ν/2)‖w‖² + max(0, ρ − ⟨w, φ⟩) − νρ
// (the usual ½‖w‖² + (1/ν)·mean hinge − ρ objective scaled by ν).

class LinearOcSvm {
 public:
  LinearOcSvm() = default;
  LinearOcSvm(double nu, bool averaged, double eta0 = 0.01, double rho0 = 0.0)
      : nu_(nu), averaged_(averaged), eta0_(eta0), rho_(rho0), rho_avg_(rho0) {
    if (!(nu > 0.0 && nu <= 1.0)) throw UserError("one-class SVM: nu must lie in (0, 1]");
    if (!(eta0 > 0.0)) throw UserError("one-class SVM: eta0 must be positive");
  }

  /// One pass over the batch rows in order.
  void partial_fit(const RowMatrix& phi) {
    if (phi.rows() == 0) return;
    if (w_.size() == 0) {
      w_ = Vector::Zero(phi.cols());
      w_avg_ = Vector::Zero(phi.cols());
    } else if (phi.cols() != w_.size()) {
      throw UserError("one-class SVM: feature width changed from " + std::to_string(w_.size()) +
                      " to " + std::to_string(phi.cols()));
    }
    const double lambda = nu_ / 2.0;
    for (Eigen::Index i = 0; i < phi.rows(); ++i) {
      ++t_;
      const double eta = eta0_ / (1.0 + eta0_ * lambda * static_cast<double>(t_));
      const bool active = rho_ - phi.row(i).dot(w_) > 0.0;
      w_ *= (1.0 - eta * nu_);
      rho_ += eta * nu_;
      if (active) {
        w_ += eta * phi.row(i).transpose();
        rho_ -= eta;
      }
      if (averaged_) {
        const double k = 1.0 / static_cast<double>(t_);
        w_avg_ += (w_ - w_avg_) * k;
        rho_avg_ += (rho_ - rho_avg_) * k;
      }
    }
  }

  const Vector& weights() const { return averaged_ ? w_avg_ : w_; }
  double offset() const { return averaged_ ? rho_avg_ : rho_; }

  /// ⟨w, φ⟩ − ρ; non-negative means inlier.
  double decision_row(const Eigen::Ref<const Eigen::RowVectorXd>& phi) const {
    if (w_.size() == 0) return -offset();
    if (phi.size() != w_.size()) throw UserError("one-class SVM: feature width mismatch");
    return phi.dot(weights()) - offset();
  }

  std::vector<double> decision(const RowMatrix& phi) const {
    std::vector<double> out(static_cast<std::size_t>(phi.rows()));
    for (Eigen::Index i = 0; i < phi.rows(); ++i) out[static_cast<std::size_t>(i)] = decision_row(phi.row(i));
    return out;
  }

  /// Training objective at the current (non-averaged) iterate.
  double objective(const RowMatrix& phi) const {
    if (w_.size() == 0 || phi.rows() == 0) return -nu_ * rho_;
    const Eigen::VectorXd margins = (rho_ - (phi * w_).array()).cwiseMax(0.0).matrix();
    return 0.5 * nu_ * w_.squaredNorm() + margins.mean() - nu_ * rho_;
  }

  double nu() const { return nu_; }
  bool averaged() const { return averaged_; }
  double eta0() const { return eta0_; }
  std::uint64_t steps() const { return t_; }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["nu"] = nu_;
    j["averaged"] = averaged_;
    j["eta0"] = eta0_;
    j["t"] = t_;
    j["w"] = std::vector<double>(w_.data(), w_.data() + w_.size());
    j["rho"] = rho_;
    j["w_avg"] = std::vector<double>(w_avg_.data(), w_avg_.data() + w_avg_.size());
    j["rho_avg"] = rho_avg_;
    return j;
  }

  static LinearOcSvm from_json(const nlohmann::json& j) {
    LinearOcSvm s(j.at("nu").get<double>(), j.at("averaged").get<bool>(), j.at("eta0").get<double>());
    s.t_ = j.at("t").get<std::uint64_t>();
    const auto w = j.at("w").get<std::vector<double>>();
    const auto wa = j.at("w_avg").get<std::vector<double>>();
    if (w.size() != wa.size()) throw UserError("one-class SVM JSON: w and w_avg widths differ");
    s.w_ = Eigen::Map<const Vector>(w.data(), static_cast<Eigen::Index>(w.size()));
    s.w_avg_ = Eigen::Map<const Vector>(wa.data(), static_cast<Eigen::Index>(wa.size()));
    s.rho_ = j.at("rho").get<double>();
    s.rho_avg_ = j.at("rho_avg").get<double>();
    return s;
  }

 private:
  double nu_ = 0.5;
  bool averaged_ = false;
  double eta0_ = 0.01;
  Vector w_;
  double rho_ = 0.0;
  Vector w_avg_;
  double rho_avg_ = 0.0;
  std::uint64_t t_ = 0;
};

// ---------------------------------------------------------------------------
// Pipeline, grid training and layer selection.

/// scaler → kernel map → one-class SVM, applied strictly in that order.
struct OodlModel {
  StreamingScaler scaler;
  KernelMap kernel;
  LinearOcSvm svm;
  std::string layer;
  double val_auroc = 0.0;

  std::vector<double> decision(const RowMatrix& features) const {
    return svm.decision(kernel.transform(scaler.transform(features)));
  }

  ScoreVector score(const SampleMatrix& features) const {
    features.validate(1);
    ScoreVector s;
    s.ids = features.ids;
    s.z = features.z;
    s.scores = decision(features.values);
    return s;
  }
};

struct CandidateInfo {
  std::size_t index = 0;
  double nu = 0.0;
  KernelKind kernel = KernelKind::rbf_sampler;
  bool average = false;
  double val_auroc = 0.0;
};

struct DetectorConfig {
  std::uint64_t seed = 0;
  std::size_t epochs = 5;
  Eigen::Index batch_size = 1024;
  Eigen::Index n_components = 100;
  double eta0 = 0.01;
  std::vector<double> nus{0.5, 0.1, 0.01};
  /// Called after every grid cell is evaluated.
  std::function<void(const CandidateInfo&)> on_candidate;
};

struct TrainResult {
  OodlModel model;
  std::vector<CandidateInfo> candidates;
};

namespace detail {

inline std::vector<RowMatrix> batches(const RowMatrix& x, Eigen::Index batch_size) {
  std::vector<RowMatrix> out;
  for (Eigen::Index start = 0; start < x.rows(); start += batch_size)
    out.emplace_back(x.middleRows(start, std::min(batch_size, x.rows() - start)));
  return out;
}

}  // namespace detail

/// Fits the scaler on every training batch, then trains one detector per
/// (ν, kernel, averaging) cell and keeps the first with the best validation
/// AUROC (strict improvement only). Training rows must be in-distribution;
/// rows with z = 1 are dropped.
inline TrainResult train_detector(const SampleMatrix& train, const SampleMatrix& val,
                                  const DetectorConfig& cfg = {}) {
  train.validate(1);
  val.validate(1);
  if (train.cols() != val.cols()) throw UserError("train and validation feature widths differ");
  const auto n_ood = std::count(val.z.begin(), val.z.end(), 1);
  if (n_ood == 0 || n_ood == static_cast<long>(val.z.size()))
    throw UserError("validation set must contain both ID and OOD samples");
  if (cfg.batch_size < 1 || cfg.epochs < 1 || cfg.n_components < 1)
    throw UserError("batch size, epochs and components must be positive");
  const SampleMatrix id_train = train.select_z(0);
  if (id_train.rows() == 0) throw UserError("training set has no ID rows");

  const auto raw_batches = detail::batches(id_train.values, cfg.batch_size);
  StreamingScaler scaler;
  for (const auto& b : raw_batches) scaler.partial_fit(b);
  std::vector<RowMatrix> scaled;
  for (const auto& b : raw_batches) scaled.push_back(scaler.transform(b));
  const RowMatrix val_scaled = scaler.transform(val.values);
  const double gamma = 1.0 / static_cast<double>(train.cols());

  TrainResult result;
  double best = -std::numeric_limits<double>::infinity();
  std::size_t cell = 0;
  for (double nu : cfg.nus) {
    for (KernelKind kind : {KernelKind::rbf_sampler, KernelKind::nystroem}) {
      for (bool average : {true, false}) {
        const std::uint64_t cell_seed = derive_seed(cfg.seed, cell);
        KernelMap kernel;
        if (kind == KernelKind::rbf_sampler)
          kernel = KernelMap(RandomFourierMap::fit(gamma, cfg.n_components, train.cols(), cell_seed));
        else
          kernel = KernelMap(NystroemMap::fit(
              gamma, std::min(cfg.n_components, scaled.front().rows()), scaled.front(), cell_seed));
        std::vector<RowMatrix> mapped;
        for (const auto& b : scaled) mapped.push_back(kernel.transform(b));
        LinearOcSvm svm(nu, average, cfg.eta0);
        for (std::size_t e = 0; e < cfg.epochs; ++e)
          for (const auto& b : mapped) svm.partial_fit(b);

        ScoreVector s;
        s.z = val.z;
        s.scores = svm.decision(kernel.transform(val_scaled));
        CandidateInfo info{cell, nu, kind, average, metrics::auroc(s)};
        result.candidates.push_back(info);
        if (cfg.on_candidate) cfg.on_candidate(info);
        if (info.val_auroc > best) {
          best = info.val_auroc;
          result.model.scaler = scaler;
          result.model.kernel = kernel;
          result.model.svm = svm;
          result.model.layer = train.name;
          result.model.val_auroc = info.val_auroc;
        }
        ++cell;
      }
    }
  }
  return result;
}

struct LayerSelection {
  std::string layer;
  double score = 0.0;
  OodlModel model;
  std::vector<std::pair<std::string, double>> per_layer;
};

/// One detector per archive layer; the first layer with the strictly best
/// validation AUROC wins.
inline LayerSelection select_layer(const store::Archive& train, const store::Archive& val,
                                   const DetectorConfig& cfg = {}) {
  if (train.layers.empty()) throw UserError("feature archive is empty");
  LayerSelection sel;
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& layer : train.layers) {
    const auto& v = val.at(layer.name);
    auto trained = train_detector(layer, v, cfg);
    const double auc = metrics::auroc(trained.model.score(v));
    sel.per_layer.emplace_back(layer.name, auc);
    if (auc > best) {
      best = auc;
      sel.layer = layer.name;
      sel.score = auc;
      sel.model = std::move(trained.model);
    }
  }
  return sel;
}

// ---------------------------------------------------------------------------
// JSON model document.

namespace detail {

inline std::vector<double> flat(const Vector& v) { return {v.data(), v.data() + v.size()}; }

inline nlohmann::json rows_json(const RowMatrix& m) {
  auto out = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::vector<double> r(m.row(i).data(), m.row(i).data() + m.cols());
    out.push_back(std::move(r));
  }
  return out;
}

inline RowMatrix rows_from_json(const nlohmann::json& j) {
  const auto rows = j.get<std::vector<std::vector<double>>>();
  const std::size_t cols = rows.empty() ? 0 : rows.front().size();
  RowMatrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != cols) throw UserError("ragged matrix in model JSON");
    for (std::size_t k = 0; k < cols; ++k)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
  }
  return m;
}

inline Vector vec_from_json(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace detail

inline nlohmann::ordered_json model_to_json(const OodlModel& m) {
  nlohmann::ordered_json j;
  j["layer"] = m.layer;
  j["val_auroc"] = m.val_auroc;
  j["scaler"] = {{"n", m.scaler.count()},
                 {"mean", detail::flat(m.scaler.mean())},
                 {"m2", detail::flat(m.scaler.m2())}};
  nlohmann::ordered_json k;
  k["type"] = kernel_name(m.kernel.kind());
  if (const auto* r = m.kernel.rff()) {
    k["gamma"] = r->gamma;
    k["seed"] = r->seed;
    k["W"] = detail::rows_json(r->weights);
    k["b"] = detail::flat(r->phase);
  } else if (const auto* n = m.kernel.nystroem()) {
    k["gamma"] = n->gamma;
    k["seed"] = n->seed;
    k["landmarks"] = detail::rows_json(n->landmarks);
    k["normalizer"] = detail::rows_json(n->normalizer);
  }
  j["kernel"] = std::move(k);
  j["svm"] = m.svm.to_json();
  return j;
}

inline OodlModel model_from_json(const nlohmann::json& j) {
  OodlModel m;
  try {
    m.layer = j.value("layer", "");
    m.val_auroc = j.value("val_auroc", 0.0);
    const auto& s = j.at("scaler");
    m.scaler = StreamingScaler(s.at("n").get<std::size_t>(), detail::vec_from_json(s.at("mean")),
                               detail::vec_from_json(s.at("m2")));
    const auto& k = j.at("kernel");
    const auto type = k.at("type").get<std::string>();
    if (type == "rbf_sampler") {
      RandomFourierMap r;
      r.gamma = k.at("gamma").get<double>();
      r.seed = k.at("seed").get<std::uint64_t>();
      r.weights = detail::rows_from_json(k.at("W"));
      r.phase = detail::vec_from_json(k.at("b"));
      m.kernel = KernelMap(std::move(r));
    } else if (type == "nystroem") {
      NystroemMap n;
      n.gamma = k.at("gamma").get<double>();
      n.seed = k.at("seed").get<std::uint64_t>();
      n.landmarks = detail::rows_from_json(k.at("landmarks"));
      n.normalizer = detail::rows_from_json(k.at("normalizer"));
      m.kernel = KernelMap(std::move(n));
    } else {
      throw UserError("unknown kernel type '" + type + "'");
    }
    m.svm = LinearOcSvm::from_json(j.at("svm"));
  } catch (const nlohmann::json::exception& e) {
    throw UserError(std::string("bad OODL model JSON: ") + e.what());
  }
  return m;
}

}  // namespace oodbench::oodl

#endif  // OODBENCH_OODL_HPP
