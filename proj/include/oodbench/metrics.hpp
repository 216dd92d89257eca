#ifndef OODBENCH_METRICS_HPP
#define OODBENCH_METRICS_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"
#include "scores.hpp"

namespace oodbench::metrics {

// ID (z = 0) is the positive class throughout; scores are confidences.

struct RocPoint {
  double threshold;  // accept when score >= threshold
  std::size_t tp;
  std::size_t fp;
};

struct OperatingPoint {
  double fpr;
  double tpr;
  double threshold;
};

enum class DetectionErrorMode {
  at_target_tpr,  // 0.5·(1 − TPR) + 0.5·FPR at the target-TPR operating point
  minimum,        // minimum of the same expression over all thresholds
};

struct EvalReport {
  std::string method;
  std::string dataset;
  double auroc = 0.0;
  double fpr95 = 0.0;
  double det_err = 0.0;
  std::size_t n_id = 0;
  std::size_t n_ood = 0;
  double threshold = 0.0;
};

namespace detail {

inline void count_classes(const ScoreVector& s, std::size_t& n_pos, std::size_t& n_neg) {
  s.validate();
  n_pos = static_cast<std::size_t>(std::count(s.z.begin(), s.z.end(), 0));
  n_neg = s.z.size() - n_pos;
  if (n_pos == 0 || n_neg == 0)
    throw UserError("metrics need both ID (z=0) and OOD (z=1) samples; got " +
                    std::to_string(n_pos) + " ID and " + std::to_string(n_neg) + " OOD");
}

}  // namespace detail

/// ROC vertices from the strictest threshold (+inf, nothing accepted) down
/// through every distinct score.
inline std::vector<RocPoint> roc_curve(const ScoreVector& s) {
  std::size_t n_pos = 0, n_neg = 0;
  detail::count_classes(s, n_pos, n_neg);
  std::vector<std::size_t> order(s.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return s.scores[a] > s.scores[b]; });
  std::vector<RocPoint> curve{{std::numeric_limits<double>::infinity(), 0, 0}};
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double thr = s.scores[order[i]];
    for (; i < order.size() && s.scores[order[i]] == thr; ++i) (s.z[order[i]] == 0 ? tp : fp)++;
    curve.push_back({thr, tp, fp});
  }
  return curve;
}

/// Mann-Whitney form: P(ID score > OOD score) + ½·P(tie), via midranks.
inline double auroc(const ScoreVector& s) {
  std::size_t n_pos = 0, n_neg = 0;
  detail::count_classes(s, n_pos, n_neg);
  std::vector<std::size_t> order(s.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return s.scores[a] < s.scores[b]; });
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && s.scores[order[j]] == s.scores[order[i]]) ++j;
    const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k)
      if (s.z[order[k]] == 0) rank_sum += midrank;
    i = j;
  }
  const double np = static_cast<double>(n_pos);
  const double u = rank_sum - np * (np + 1.0) / 2.0;
  return u / (np * static_cast<double>(n_neg));
}

/// FPR on the ROC curve at TPR = target, interpolating linearly between the
/// two vertices that bracket the target. The threshold is the largest one
/// whose TPR reaches the target.
inline OperatingPoint fpr_at_tpr(const ScoreVector& s, double target_tpr = 0.95) {
  if (!(target_tpr > 0.0 && target_tpr <= 1.0))
    throw UserError("target TPR must lie in (0, 1]");
  const auto curve = roc_curve(s);
  const double np = static_cast<double>(curve.back().tp);
  const double nn = static_cast<double>(curve.back().fp);
  for (std::size_t k = 1; k < curve.size(); ++k) {
    const double tpr = static_cast<double>(curve[k].tp) / np;
    if (tpr < target_tpr) continue;
    const double fpr = static_cast<double>(curve[k].fp) / nn;
    if (tpr == target_tpr) return {fpr, tpr, curve[k].threshold};
    const double tpr0 = static_cast<double>(curve[k - 1].tp) / np;
    const double fpr0 = static_cast<double>(curve[k - 1].fp) / nn;
    const double interp = fpr0 + (target_tpr - tpr0) * (fpr - fpr0) / (tpr - tpr0);
    return {interp, target_tpr, curve[k].threshold};
  }
  throw InvariantError("ROC curve never reaches TPR 1");
}

inline double detection_error(const ScoreVector& s, double target_tpr = 0.95,
                              DetectionErrorMode mode = DetectionErrorMode::at_target_tpr) {
  if (mode == DetectionErrorMode::at_target_tpr) {
    const auto op = fpr_at_tpr(s, target_tpr);
    return 0.5 * (1.0 - op.tpr) + 0.5 * op.fpr;
  }
  const auto curve = roc_curve(s);
  const double np = static_cast<double>(curve.back().tp);
  const double nn = static_cast<double>(curve.back().fp);
  double best = 1.0;
  for (const auto& p : curve)
    best = std::min(best, 0.5 * (1.0 - static_cast<double>(p.tp) / np) +
                              0.5 * static_cast<double>(p.fp) / nn);
  return best;
}

inline EvalReport evaluate(const ScoreVector& s, double target_tpr = 0.95,
                           DetectionErrorMode mode = DetectionErrorMode::at_target_tpr) {
  EvalReport r;
  r.auroc = auroc(s);
  const auto op = fpr_at_tpr(s, target_tpr);
  r.fpr95 = op.fpr;
  r.threshold = op.threshold;
  r.det_err = detection_error(s, target_tpr, mode);
  r.n_id = static_cast<std::size_t>(std::count(s.z.begin(), s.z.end(), 0));
  r.n_ood = s.size() - r.n_id;
  return r;
}

/// Correctly classified samples are the positives, misclassified ones the
/// negatives.
inline EvalReport misclassification_eval(std::span<const double> confidence,
                                         std::span<const bool> correct,
                                         double target_tpr = 0.95) {
  if (confidence.size() != correct.size())
    throw UserError("misclassification_eval: score and flag lengths differ");
  ScoreVector s;
  s.scores.assign(confidence.begin(), confidence.end());
  for (bool c : correct) s.z.push_back(c ? 0 : 1);
  return evaluate(s, target_tpr);
}

}  // namespace oodbench::metrics

#endif  // OODBENCH_METRICS_HPP
