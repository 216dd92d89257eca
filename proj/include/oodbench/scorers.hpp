#ifndef OODBENCH_SCORERS_HPP
#define OODBENCH_SCORERS_HPP

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "error.hpp"
#include "matrix_store.hpp"
#include "scores.hpp"

namespace oodbench::scorers {

enum class Method { msp, ts, mlv, odin, ip_ts_mlv };

inline Method parse_method(std::string_view s) {
  if (s == "msp") return Method::msp;
  if (s == "ts") return Method::ts;
  if (s == "mlv") return Method::mlv;
  if (s == "odin") return Method::odin;
  if (s == "ip_ts_mlv") return Method::ip_ts_mlv;
  throw UserError("unknown scoring method '" + std::string(s) + "' (msp, ts, mlv, odin, ip_ts_mlv)");
}

inline std::string method_name(Method m) {
  switch (m) {
    case Method::msp: return "msp";
    case Method::ts: return "ts";
    case Method::mlv: return "mlv";
    case Method::odin: return "odin";
    case Method::ip_ts_mlv: return "ip_ts_mlv";
  }
  return "?";
}

struct ScorerConfig {
  Method method = Method::msp;
  double temperature = 1000.0;
  double epsilon = 0.0014;

  void validate() const {
    if (!(temperature > 0.0) || !std::isfinite(temperature))
      throw UserError("temperature must be positive");
    if (!(epsilon >= 0.0) || !std::isfinite(epsilon))
      throw UserError("perturbation magnitude must be non-negative");
  }
};

/// Temperature-scaled softmax with max subtraction.
inline Vector softmax(const Eigen::Ref<const Vector>& logits, double temperature = 1.0) {
  if (!(temperature > 0.0)) throw UserError("temperature must be positive");
  if (!logits.allFinite()) throw UserError("softmax: non-finite logits");
  const double top = logits.maxCoeff();
  Vector p = ((logits.array() - top) / temperature).exp().matrix();
  p /= p.sum();
  return p;
}

namespace detail {

inline void check_logits(const SampleMatrix& m) {
  m.validate(2);
}

inline ScoreVector make_scores(const SampleMatrix& m) {
  ScoreVector s;
  s.ids = m.ids;
  s.z = m.z;
  s.scores.resize(static_cast<std::size_t>(m.rows()));
  return s;
}

}  // namespace detail

inline ScoreVector score_ts(const SampleMatrix& logits, double temperature) {
  detail::check_logits(logits);
  auto s = detail::make_scores(logits);
  for (Eigen::Index i = 0; i < logits.rows(); ++i)
    s.scores[static_cast<std::size_t>(i)] = softmax(logits.values.row(i).transpose(), temperature).maxCoeff();
  return s;
}

inline ScoreVector score_msp(const SampleMatrix& logits) { return score_ts(logits, 1.0); }

inline ScoreVector score_mlv(const SampleMatrix& logits) {
  detail::check_logits(logits);
  auto s = detail::make_scores(logits);
  for (Eigen::Index i = 0; i < logits.rows(); ++i)
    s.scores[static_cast<std::size_t>(i)] = logits.values.row(i).maxCoeff();
  return s;
}

/// Logit-only methods. Perturbation methods need a network; see perturb_and_score.
inline ScoreVector score_logits(const SampleMatrix& logits, const ScorerConfig& cfg) {
  cfg.validate();
  switch (cfg.method) {
    case Method::msp: return score_msp(logits);
    case Method::ts: return score_ts(logits, cfg.temperature);
    case Method::mlv: return score_mlv(logits);
    default:
      throw UserError(method_name(cfg.method) + " perturbs inputs and needs a network and inputs");
  }
}

// ---------------------------------------------------------------------------
// Reference network: logits = W2 · act(W1 · x + b1) + b2.

enum class Activation { tanh, identity };

struct RefNet {
  Eigen::MatrixXd w1;  // h × d
  Vector b1;           // h
  Eigen::MatrixXd w2;  // K × h
  Vector b2;           // K
  Activation activation = Activation::tanh;

  Eigen::Index input_dim() const { return w1.cols(); }
  Eigen::Index hidden_dim() const { return w1.rows(); }
  Eigen::Index classes() const { return w2.rows(); }

  void validate() const {
    if (w1.rows() != b1.size() || w2.cols() != w1.rows() || w2.rows() != b2.size())
      throw UserError("RefNet: inconsistent layer shapes");
    if (w2.rows() < 2) throw UserError("RefNet needs at least 2 classes");
    if (!w1.allFinite() || !b1.allFinite() || !w2.allFinite() || !b2.allFinite())
      throw UserError("RefNet: non-finite parameters");
  }

  Vector pre_activation(const Eigen::Ref<const Vector>& x) const { return w1 * x + b1; }

  Vector hidden(const Eigen::Ref<const Vector>& x) const {
    Vector a = pre_activation(x);
    if (activation == Activation::tanh) a = a.array().tanh().matrix();
    return a;
  }
};

inline Vector refnet_forward(const RefNet& net, const Eigen::Ref<const Vector>& x) {
  if (x.size() != net.input_dim()) throw UserError("RefNet: input width mismatch");
  if (!x.allFinite()) throw UserError("RefNet: non-finite input");
  Vector l = net.w2 * net.hidden(x) + net.b2;
  if (!l.allFinite()) throw UserError("RefNet: non-finite logits");
  return l;
}

/// Objective −log max_j softmax(f(x)/T)_j, the ODIN perturbation loss.
inline double refnet_objective(const RefNet& net, const Eigen::Ref<const Vector>& x,
                               double temperature) {
  return -std::log(softmax(refnet_forward(net, x), temperature).maxCoeff());
}

/// Analytic ∂objective/∂x. With c = argmax and p = softmax(l/T):
/// ∂J/∂l = (p − e_c)/T, then back through W2, the activation and W1.
inline Vector refnet_input_gradient(const RefNet& net, const Eigen::Ref<const Vector>& x,
                                    double temperature) {
  const Vector a = net.pre_activation(x);
  const Vector h = net.activation == Activation::tanh ? Vector(a.array().tanh().matrix()) : a;
  const Vector l = net.w2 * h + net.b2;
  if (!l.allFinite()) throw UserError("RefNet: non-finite logits");
  Vector p = softmax(l, temperature);
  Eigen::Index c = 0;
  l.maxCoeff(&c);
  p(c) -= 1.0;
  Vector g_h = net.w2.transpose() * (p / temperature);
  if (net.activation == Activation::tanh) g_h = (g_h.array() * (1.0 - h.array().square())).matrix();
  Vector g = net.w1.transpose() * g_h;
  if (!g.allFinite()) throw UserError("RefNet: non-finite gradient");
  return g;
}

inline double sign0(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

/// x̃ = x − ε·sign(∇x J) with the temperature-scaled objective, then
/// odin: max softmax(f(x̃), T); ip_ts_mlv: max logit of f(x̃).
inline ScoreVector perturb_and_score(const RefNet& net, const SampleMatrix& inputs,
                                     const ScorerConfig& cfg) {
  cfg.validate();
  net.validate();
  if (cfg.method != Method::odin && cfg.method != Method::ip_ts_mlv)
    throw UserError("perturb_and_score supports odin and ip_ts_mlv only");
  inputs.validate(1);
  if (inputs.cols() != net.input_dim()) throw UserError("input width does not match the network");
  ScoreVector s;
  s.ids = inputs.ids;
  s.z = inputs.z;
  s.scores.resize(static_cast<std::size_t>(inputs.rows()));
  for (Eigen::Index i = 0; i < inputs.rows(); ++i) {
    const Vector x = inputs.values.row(i).transpose();
    Vector xt = x;
    if (cfg.epsilon > 0.0) {
      const Vector g = refnet_input_gradient(net, x, cfg.temperature);
      xt = x - cfg.epsilon * g.unaryExpr([](double v) { return sign0(v); });
    }
    const Vector l = refnet_forward(net, xt);
    s.scores[static_cast<std::size_t>(i)] =
        cfg.method == Method::odin ? softmax(l, cfg.temperature).maxCoeff() : l.maxCoeff();
  }
  return s;
}

/// Logits of every input row, as a K-column matrix carrying the input ids/z/y.
inline SampleMatrix refnet_logits(const RefNet& net, const SampleMatrix& inputs) {
  SampleMatrix out;
  out.name = "logits";
  out.ids = inputs.ids;
  out.z = inputs.z;
  out.y = inputs.y;
  out.values.resize(inputs.rows(), net.classes());
  for (Eigen::Index i = 0; i < inputs.rows(); ++i)
    out.values.row(i) = refnet_forward(net, inputs.values.row(i).transpose()).transpose();
  return out;
}

namespace detail {

inline nlohmann::json matrix_json(const Eigen::MatrixXd& m) {
  auto rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::vector<double> r(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index j = 0; j < m.cols(); ++j) r[static_cast<std::size_t>(j)] = m(i, j);
    rows.push_back(r);
  }
  return rows;
}

inline Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  const auto rows = j.get<std::vector<std::vector<double>>>();
  const auto cols = rows.empty() ? 0 : rows.front().size();
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != cols) throw UserError("ragged matrix in JSON");
    for (std::size_t k = 0; k < cols; ++k)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
  }
  return m;
}

inline Vector vector_from_json(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace detail

inline nlohmann::ordered_json refnet_to_json(const RefNet& net) {
  nlohmann::ordered_json j;
  j["activation"] = net.activation == Activation::tanh ? "tanh" : "identity";
  j["w1"] = detail::matrix_json(net.w1);
  j["b1"] = detail::to_std(net.b1);
  j["w2"] = detail::matrix_json(net.w2);
  j["b2"] = detail::to_std(net.b2);
  return j;
}

inline RefNet refnet_from_json(const nlohmann::json& j) {
  RefNet net;
  try {
    const auto act = j.value("activation", "tanh");
    if (act != "tanh" && act != "identity") throw UserError("unknown activation '" + act + "'");
    net.activation = act == "tanh" ? Activation::tanh : Activation::identity;
    net.w1 = detail::matrix_from_json(j.at("w1"));
    net.b1 = detail::vector_from_json(j.at("b1"));
    net.w2 = detail::matrix_from_json(j.at("w2"));
    net.b2 = detail::vector_from_json(j.at("b2"));
  } catch (const nlohmann::json::exception& e) {
    throw UserError(std::string("bad RefNet JSON: ") + e.what());
  }
  net.validate();
  return net;
}

}  // namespace oodbench::scorers

#endif  // OODBENCH_SCORERS_HPP
