#include <gtest/gtest.h>

#include <cmath>

#include "oodbench/metrics.hpp"
#include "oodbench/oodl.hpp"
#include "oodbench/refdata.hpp"

using namespace oodbench;
using namespace oodbench::oodl;

namespace {

RowMatrix random_matrix(Eigen::Index n, Eigen::Index d, std::uint64_t seed, double scale = 1.0,
                        double shift = 0.0) {
  Rng rng(seed);
  RowMatrix m(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) m(i, j) = shift + scale * rng.normal() * static_cast<double>(j + 1);
  return m;
}

double rel(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

}  // namespace

// --- scaler ------------------------------------------------------------------------

TEST(Scaler, SingleBatchMatchesBatchStatistics) {
  const auto x = random_matrix(500, 4, 1, 3.0, 10.0);
  StreamingScaler s;
  s.partial_fit(x);
  const Vector mean = x.colwise().mean().transpose();
  for (Eigen::Index j = 0; j < 4; ++j) {
    double var = 0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) var += (x(i, j) - mean(j)) * (x(i, j) - mean(j));
    var /= static_cast<double>(x.rows());
    EXPECT_NEAR(s.mean()(j), mean(j), 1e-12 * std::abs(mean(j)) + 1e-12);
    EXPECT_NEAR(s.variance()(j), var, 1e-12 * var);
  }
  EXPECT_EQ(s.count(), 500u);
}

TEST(Scaler, StreamingEqualsFullBatchForAnySplit) {
  const auto x = random_matrix(300, 3, 2, 2.0, -5.0);
  StreamingScaler full;
  full.partial_fit(x);
  Rng rng(3);
  for (int rep = 0; rep < 50; ++rep) {
    StreamingScaler s;
    Eigen::Index start = 0;
    while (start < x.rows()) {
      const auto len = std::min<Eigen::Index>(1 + static_cast<Eigen::Index>(rng.below(80)), x.rows() - start);
      s.partial_fit(x.middleRows(start, len));
      start += len;
    }
    for (Eigen::Index j = 0; j < 3; ++j) {
      ASSERT_LE(rel(s.mean()(j), full.mean()(j)), 1e-9);
      ASSERT_LE(rel(s.m2()(j), full.m2()(j)), 1e-9);
    }
  }
  StreamingScaler halves;
  halves.partial_fit(x.topRows(150));
  halves.partial_fit(x.bottomRows(150));
  for (Eigen::Index j = 0; j < 3; ++j) EXPECT_LE(rel(halves.m2()(j), full.m2()(j)), 1e-9);
}

TEST(Scaler, ConstantColumnAndErrors) {
  RowMatrix x(4, 2);
  x << 1, 7, 2, 7, 3, 7, 4, 7;
  StreamingScaler s;
  EXPECT_THROW(s.transform(x), UserError);
  s.partial_fit(x);
  const auto t = s.transform(x);
  for (Eigen::Index i = 0; i < 4; ++i) EXPECT_EQ(t(i, 1), 0.0);
  EXPECT_NEAR(t.col(0).mean(), 0.0, 1e-15);
  EXPECT_THROW(s.partial_fit(RowMatrix::Zero(2, 3)), UserError);
  EXPECT_THROW(s.transform(RowMatrix::Zero(2, 3)), UserError);
}

// --- kernel maps ------------------------------------------------------------------------

namespace {

double rff_max_error(Eigen::Index components, std::uint64_t seed) {
  const double gamma = 0.5;
  const auto map = RandomFourierMap::fit(gamma, components, 3, seed);
  const auto a = random_matrix(100, 3, seed + 1, 0.6), b = random_matrix(100, 3, seed + 2, 0.6);
  const auto za = map.transform(a), zb = map.transform(b);
  double worst = 0;
  for (Eigen::Index i = 0; i < 100; ++i)
    worst = std::max(worst, std::abs(za.row(i).dot(zb.row(i)) - rbf_kernel(a.row(i), b.row(i), gamma)));
  return worst;
}

}  // namespace

TEST(Rff, ApproximatesRbfKernel) {
  EXPECT_LE(rff_max_error(4096, 10), 0.05);
  EXPECT_LE(rff_max_error(512, 10), 0.15);
}

TEST(Rff, SelfAndDistantPairs) {
  const double gamma = 1.0;
  const auto map = RandomFourierMap::fit(gamma, 4096, 2, 5);
  RowMatrix x(1, 2), y(1, 2);
  x << 0.3, -0.2;
  y << 0.3 + 5.0, -0.2;  // γ‖x − y‖² = 25
  const auto zx = map.transform(x), zy = map.transform(y);
  EXPECT_NEAR(zx.row(0).squaredNorm(), 1.0, 0.05);
  EXPECT_NEAR(zx.row(0).dot(zy.row(0)), 0.0, 0.05);
}

TEST(Rff, SeededAndValidated) {
  const auto a = RandomFourierMap::fit(0.5, 64, 3, 9), b = RandomFourierMap::fit(0.5, 64, 3, 9);
  EXPECT_EQ(a.weights, b.weights);
  EXPECT_EQ(a.phase, b.phase);
  EXPECT_NE(a.weights, RandomFourierMap::fit(0.5, 64, 3, 10).weights);
  EXPECT_THROW(RandomFourierMap::fit(0.0, 64, 3, 1), UserError);
  EXPECT_THROW(a.transform(RowMatrix::Zero(1, 2)), UserError);
}

TEST(Nystroem, AllPointsReconstructKernel) {
  const auto x = random_matrix(40, 3, 4, 0.5);
  const double gamma = 1.0 / 3;
  const auto map = NystroemMap::fit(gamma, 40, x, 1);
  const auto phi = map.transform(x);
  const RowMatrix approx = phi * phi.transpose();
  EXPECT_LE((approx - rbf_kernel_matrix(x, x, gamma)).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Nystroem, RankOneAndSeeding) {
  const auto x = random_matrix(30, 2, 5);
  const auto one = NystroemMap::fit(0.5, 1, x, 3);
  EXPECT_EQ(one.output_dim(), 1);
  EXPECT_EQ(one.transform(x).cols(), 1);
  EXPECT_EQ(NystroemMap::fit(0.5, 10, x, 3).landmarks, NystroemMap::fit(0.5, 10, x, 3).landmarks);
  EXPECT_THROW(NystroemMap::fit(0.5, 0, x, 3), UserError);
  EXPECT_THROW(NystroemMap::fit(0.5, 31, x, 3), UserError);
}

TEST(Nystroem, DuplicateLandmarksDropNullDirections) {
  RowMatrix x(4, 1);
  x << 1.0, 1.0, 1.0, 1.0;
  const auto map = NystroemMap::fit(1.0, 4, x, 0);
  EXPECT_EQ(map.output_dim(), 1);  // rank-1 kernel matrix
}

// --- one-class SVM ---------------------------------------------------------------------

TEST(OcSvm, InitialStateDecision) {
  LinearOcSvm svm(0.5, false, 0.01, 0.25);
  RowMatrix phi = RowMatrix::Ones(3, 4);
  for (double d : svm.decision(phi)) EXPECT_EQ(d, -0.25);
}

TEST(OcSvm, TrainingPointOutscoresFarPoint) {
  const auto map = RandomFourierMap::fit(0.5, 100, 2, 1);
  RowMatrix train(50, 2);
  for (Eigen::Index i = 0; i < 50; ++i) train.row(i) << 0.5, -0.5;
  RowMatrix far(1, 2);
  far << 8.0, 8.0;
  for (bool avg : {false, true}) {
    LinearOcSvm svm(0.5, avg);
    const auto phi = map.transform(train);
    for (int pass = 0; pass < 10; ++pass) svm.partial_fit(phi);
    EXPECT_GE(svm.decision(phi)[0], svm.decision(map.transform(far))[0]);
    EXPECT_EQ(svm.steps(), 500u);
  }
}

TEST(OcSvm, ObjectiveDecreasesOverPasses) {
  const auto x = random_matrix(200, 2, 8, 0.7);
  const auto phi = RandomFourierMap::fit(0.5, 100, 2, 2).transform(x);
  LinearOcSvm svm(1.0, false);
  const double start = svm.objective(phi);
  svm.partial_fit(phi);
  double prev = svm.objective(phi);
  EXPECT_LT(prev, start);
  for (int pass = 0; pass < 20; ++pass) {
    svm.partial_fit(phi);
    const double now = svm.objective(phi);
    EXPECT_LE(now, prev + 1e-12) << "pass " << pass;
    prev = now;
  }
}

TEST(OcSvm, DecisionIsLinearInFeatures) {
  const auto x = random_matrix(100, 2, 9);
  const auto phi = RandomFourierMap::fit(0.5, 32, 2, 2).transform(x);
  LinearOcSvm svm(0.1, false);
  svm.partial_fit(phi);
  for (double alpha : {2.0, 0.5, -4.0}) {
    for (Eigen::Index i = 0; i < 10; ++i) {
      const Eigen::RowVectorXd p = phi.row(i);
      const double lhs = svm.decision_row(alpha * p);
      const double rhs = alpha * p.dot(svm.weights()) - svm.offset();
      EXPECT_EQ(lhs, rhs);
    }
  }
}

TEST(OcSvm, ValidationAndJson) {
  EXPECT_THROW(LinearOcSvm(0.0, false), UserError);
  EXPECT_THROW(LinearOcSvm(1.5, false), UserError);
  LinearOcSvm svm(0.1, true);
  svm.partial_fit(RowMatrix::Ones(3, 4));
  EXPECT_THROW(svm.partial_fit(RowMatrix::Ones(3, 5)), UserError);
  const auto back = LinearOcSvm::from_json(nlohmann::json::parse(svm.to_json().dump()));
  EXPECT_EQ(back.weights(), svm.weights());
  EXPECT_EQ(back.offset(), svm.offset());
  EXPECT_EQ(back.steps(), svm.steps());
}

// --- grid training and layer selection --------------------------------------------------

namespace {

const refdata::FeatureSplit& gaussian_fixture() {
  static const auto split = refdata::gen_gaussians({.seed = 2024});
  return split;
}

}  // namespace

TEST(TrainDetector, TwelveCandidatesAndHighAuroc) {
  const auto& f = gaussian_fixture();
  DetectorConfig cfg;
  cfg.seed = 1;
  std::size_t calls = 0;
  cfg.on_candidate = [&](const CandidateInfo&) { ++calls; };
  const auto r = train_detector(f.train, f.val, cfg);
  EXPECT_EQ(calls, 12u);
  ASSERT_EQ(r.candidates.size(), 12u);
  EXPECT_GE(r.model.val_auroc, 0.95);
  EXPECT_EQ(r.model.val_auroc, metrics::auroc(r.model.score(f.val)));
  // grid order: ν outermost, then kernel, then averaging
  EXPECT_EQ(r.candidates[0].nu, 0.5);
  EXPECT_EQ(r.candidates[2].kernel, KernelKind::nystroem);
  EXPECT_FALSE(r.candidates[1].average);
  EXPECT_EQ(r.candidates[11].nu, 0.01);
  double best = -1;
  for (const auto& c : r.candidates) best = std::max(best, c.val_auroc);
  EXPECT_EQ(r.model.val_auroc, best);
}

TEST(TrainDetector, TiesKeepTheFirstCandidate) {
  for (double sep : {40.0, 6.0, 2.0}) {
    const auto f = refdata::gen_gaussians({.n_train = 300, .n_val_id = 100, .n_val_ood = 100,
                                           .separation = sep, .seed = 5});
    const auto r = train_detector(f.train, f.val, {.seed = 3});
    std::size_t first = 0;
    for (std::size_t i = 1; i < r.candidates.size(); ++i)
      if (r.candidates[i].val_auroc > r.candidates[first].val_auroc) first = i;
    const auto& want = r.candidates[first];
    EXPECT_EQ(r.model.kernel.kind(), want.kernel) << sep;
    EXPECT_EQ(r.model.svm.averaged(), want.average) << sep;
    EXPECT_EQ(r.model.svm.nu(), want.nu) << sep;
    EXPECT_EQ(r.model.val_auroc, want.val_auroc) << sep;
  }
}

TEST(TrainDetector, DeterministicGivenSeed) {
  const auto f = refdata::gen_gaussians({.n_train = 500, .n_val_id = 200, .n_val_ood = 100, .seed = 8});
  const auto a = model_to_json(train_detector(f.train, f.val, {.seed = 4}).model).dump();
  const auto b = model_to_json(train_detector(f.train, f.val, {.seed = 4}).model).dump();
  EXPECT_EQ(a, b);
}

TEST(TrainDetector, Errors) {
  const auto f = refdata::gen_gaussians({.n_train = 50, .n_val_id = 20, .n_val_ood = 20});
  EXPECT_THROW(train_detector(f.train, f.train, {}), UserError);  // validation without OOD
  auto wrong = f.val;
  wrong.values = RowMatrix::Zero(wrong.rows(), 3);
  EXPECT_THROW(train_detector(f.train, wrong, {}), UserError);
}

TEST(TrainDetector, TrainingUsesOnlyIdRows) {
  auto f = refdata::gen_gaussians({.n_train = 200, .n_val_id = 50, .n_val_ood = 50, .seed = 2});
  const auto clean = train_detector(f.train, f.val, {.seed = 1});
  auto polluted = f.train;
  polluted.values.conservativeResize(polluted.rows() + 1, Eigen::NoChange);
  polluted.values.row(polluted.rows() - 1) << 100.0, 100.0;
  polluted.ids.push_back("x");
  polluted.z.push_back(1);
  const auto r = train_detector(polluted, f.val, {.seed = 1});
  EXPECT_EQ(model_to_json(r.model).dump(), model_to_json(clean.model).dump());
}

TEST(SelectLayer, SeparableBeatsNoise) {
  refdata::GaussianSpec noise{.layer = "noise", .n_train = 500, .n_val_id = 300, .n_val_ood = 300,
                              .separation = 0.0, .seed = 6};
  refdata::GaussianSpec sep{.layer = "separable", .n_train = 500, .n_val_id = 300, .n_val_ood = 300,
                            .separation = 6.0, .seed = 6};
  const auto [train, val] = refdata::gen_layer_archive({noise, sep});
  const auto s = select_layer(train, val, {.seed = 2});
  EXPECT_EQ(s.layer, "separable");
  ASSERT_EQ(s.per_layer.size(), 2u);
  EXPECT_LT(s.per_layer[0].second, 0.7);
  EXPECT_GE(s.per_layer[1].second, 0.95);

  const auto [t1, v1] = refdata::gen_layer_archive({noise});
  const auto single = select_layer(t1, v1, {.seed = 2});
  EXPECT_EQ(single.layer, "noise");
  EXPECT_EQ(single.score, single.per_layer[0].second);

  EXPECT_THROW(select_layer(store::Archive{}, store::Archive{}, {}), UserError);
}

TEST(SelectLayer, TieGoesToFirstKey) {
  refdata::GaussianSpec a{.layer = "5.0", .n_train = 300, .n_val_id = 100, .n_val_ood = 100,
                          .separation = 40.0, .seed = 1};
  auto b = a;
  b.layer = "4.2";
  const auto [train, val] = refdata::gen_layer_archive({a, b});
  const auto s = select_layer(train, val, {.seed = 2});
  EXPECT_EQ(s.per_layer[0].second, s.per_layer[1].second);
  EXPECT_EQ(s.layer, "5.0");
}

TEST(ModelJson, RoundTripScoresIdentically) {
  const auto f = refdata::gen_gaussians({.n_train = 300, .n_val_id = 100, .n_val_ood = 100, .seed = 3});
  for (auto kind : {KernelKind::rbf_sampler, KernelKind::nystroem}) {
    OodlModel m;
    m.scaler.partial_fit(f.train.values);
    const auto scaled = m.scaler.transform(f.train.values);
    m.kernel = kind == KernelKind::rbf_sampler ? KernelMap(RandomFourierMap::fit(0.5, 20, 2, 1))
                                               : KernelMap(NystroemMap::fit(0.5, 20, scaled, 1));
    m.svm = LinearOcSvm(0.1, true);
    m.svm.partial_fit(m.kernel.transform(scaled));
    m.layer = "features";
    const auto back = model_from_json(nlohmann::json::parse(model_to_json(m).dump()));
    EXPECT_EQ(back.score(f.val).scores, m.score(f.val).scores);
    EXPECT_EQ(back.kernel.kind(), kind);
  }
  EXPECT_THROW(model_from_json(nlohmann::json::object()), UserError);
}
