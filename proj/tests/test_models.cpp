#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

#include "sensrank/models.hpp"
#include "sensrank/oracle.hpp"
#include "test_support.hpp"

using namespace sensrank;
using sensrank::testing::TempDir;

namespace {

Dataset linear_data(std::size_t n) {
  Matrix x(n, 1);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    x(i, 0) = static_cast<double>(i) / 7.0 - 3.0;
    y[i] = 2.0 * x(i, 0) + 1.0;
  }
  return Dataset(std::move(x), {"x0"}, std::move(y));
}

Dataset bench_data(std::size_t n, std::uint64_t seed, std::size_t k = 10) {
  BenchmarkSpec spec;
  spec.function = k >= 5 ? AnalyticFunction::friedman1() : AnalyticFunction::additive(std::vector<double>(k, 1.0));
  spec.n = n;
  spec.k_total = k;
  spec.seed = seed;
  return generate_dataset(spec);
}

double sd(const std::vector<double>& v) {
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size()));
}

PredictorSpec spec_of(ModelKind kind, std::uint64_t seed = 1) {
  PredictorSpec s;
  s.kind = kind;
  s.seed = seed;
  return s;
}

}  // namespace

TEST(Linear, ExactAffineRecovery) {
  const auto fitted = fit(spec_of(ModelKind::linear), linear_data(50));
  EXPECT_LE(fitted.holdout_mae(), 1e-9);
}

TEST(Linear, PredictIsDotPlusIntercept) {
  const FittedPredictor p(std::make_shared<LinearModel>(std::vector<double>{2.0}, 1.0), 0.0);
  EXPECT_EQ(p.predict(Matrix{{3}}), std::vector<double>{7.0});
}

TEST(Linear, ReproducesTrainingTargetsOfAffineFunction) {
  const auto d = bench_data(60, 2, 5);
  std::vector<double> y(d.rows());
  for (std::size_t r = 0; r < d.rows(); ++r) {
    auto row = d.features().row(r);
    y[r] = 0.5 - row[0] + 3.0 * row[1] + 0.25 * row[4];
  }
  const auto m = LinearModel::fit(d.features(), y);
  EXPECT_LT(mean_absolute_error(m.predict_rows(d.features()), y), 1e-9);
}

TEST(Linear, CollinearColumnsDoNotCrash) {
  Matrix x(20, 3);
  std::vector<double> y(20);
  for (std::size_t i = 0; i < 20; ++i) {
    x(i, 0) = static_cast<double>(i);
    x(i, 1) = 2.0 * static_cast<double>(i);
    x(i, 2) = 5.0;
    y[i] = 3.0 * static_cast<double>(i);
  }
  const auto m = LinearModel::fit(x, y);
  EXPECT_LT(mean_absolute_error(m.predict_rows(x), y), 1e-4);
}

TEST(Knn, FullNeighbourhoodPredictsTrainingMean) {
  const auto d = bench_data(50, 4, 3);
  auto spec = spec_of(ModelKind::knn, 9);
  spec.knn_k = d.rows();
  const auto fitted = fit(spec, d);
  const auto pred = fitted.predict(d.features());
  const double mean = std::accumulate(d.target().begin(), d.target().end(), 0.0) / static_cast<double>(d.rows());
  for (double p : pred) EXPECT_NEAR(p, mean, 1e-12);

  // Holdout MAE equals the constant-mean predictor on the same holdout split.
  const auto perm = seeded_permutation(d.rows(), derive_seed(spec.seed, 0x401d));
  const std::size_t h = 10;  // 0.2 * 50
  double train_mean = 0.0;
  for (std::size_t i = h; i < d.rows(); ++i) train_mean += d.target()[perm[i]];
  train_mean /= static_cast<double>(d.rows() - h);
  double mae = 0.0;
  for (std::size_t i = 0; i < h; ++i) mae += std::abs(d.target()[perm[i]] - train_mean);
  EXPECT_NEAR(fitted.holdout_mae(), mae / static_cast<double>(h), 1e-12);
}

TEST(Knn, SingleNeighbourReproducesTrainingTargets) {
  const auto d = bench_data(80, 5, 4);
  const auto m = KnnModel::fit(d.features(), d.target(), 1);
  EXPECT_EQ(m.predict_rows(d.features()), d.target());
}

TEST(Forest, BeatsConstantPredictorOnFriedman1) {
  const auto d = bench_data(2000, 6, 20);
  const auto fitted = fit(spec_of(ModelKind::random_forest, 6), d);
  EXPECT_TRUE(std::isfinite(fitted.holdout_mae()));
  EXPECT_LT(fitted.holdout_mae(), sd(d.target()));
}

TEST(Forest, PredictionsStayWithinTrainingRange) {
  const auto d = bench_data(500, 7, 6);
  const auto forest = RandomForest::fit(d.features(), d.target(), {}, 7);
  const auto [lo, hi] = std::minmax_element(d.target().begin(), d.target().end());
  const auto probe = bench_data(300, 99, 6);
  for (double p : forest.predict(probe.features())) {
    EXPECT_GE(p, *lo);
    EXPECT_LE(p, *hi);
  }
}

TEST(Forest, FitIsDeterministicAndPredictIsPure) {
  const auto d = bench_data(400, 8, 6);
  const auto a = fit(spec_of(ModelKind::random_forest, 3), d);
  const auto b = fit(spec_of(ModelKind::random_forest, 3), d);
  EXPECT_EQ(a.predict(d.features()), b.predict(d.features()));
  EXPECT_EQ(a.predict(d.features()), a.predict(d.features()));
  EXPECT_EQ(a.holdout_mae(), b.holdout_mae());
}

TEST(Predict, EmptyMatrixGivesEmptyVector) {
  const auto d = bench_data(100, 1, 3);
  for (auto kind : {ModelKind::linear, ModelKind::knn, ModelKind::random_forest}) {
    const auto m = fit(spec_of(kind), d);
    EXPECT_TRUE(m.predict(Matrix(0, 3)).empty());
  }
}

TEST(Predict, RejectsWrongColumnCount) {
  const auto m = fit(spec_of(ModelKind::linear), bench_data(100, 1, 3));
  EXPECT_THROW(m.predict(Matrix(4, 2)), Error);
}

TEST(Predict, ConcurrentCallsAgree) {
  const auto d = bench_data(600, 2, 8);
  const auto m = fit(spec_of(ModelKind::random_forest, 2), d);
  const auto expected = m.predict(d.features());
  std::vector<std::vector<double>> got(4);
  {
    std::vector<std::jthread> threads;
    for (std::size_t t = 0; t < got.size(); ++t) threads.emplace_back([&, t] { got[t] = m.predict(d.features()); });
  }
  for (const auto& g : got) EXPECT_EQ(g, expected);
}

TEST(Fit, Preconditions) {
  const auto d = bench_data(100, 1, 3);
  EXPECT_THROW(fit(spec_of(ModelKind::linear), Dataset(d.features(), d.names())), Error);
  EXPECT_THROW(fit(spec_of(ModelKind::linear), d.select_rows(std::vector<std::size_t>{0, 1, 2, 3, 4})), Error);
  auto bad = spec_of(ModelKind::external);
  EXPECT_THROW(fit(bad, d), Error);
  auto holdout = spec_of(ModelKind::linear);
  holdout.holdout_fraction = 0.7;
  EXPECT_THROW(fit(holdout, d), Error);
}

// --- external protocol ------------------------------------------------------

TEST(ExternalProtocol, PayloadEncoding) {
  const Matrix m{{0.1, 2.0}, {-3.5, 1e-300}};
  EXPECT_EQ(encode_payload("#predict", m), "#predict\n0.1,2\n-3.5,1e-300\n");
  const std::vector<double> y{1.0, 0.3};
  EXPECT_EQ(encode_payload("#fit", m, &y), "#fit\n0.1,2,1\n-3.5,1e-300,0.3\n");
}

TEST(ExternalProtocol, DecodeIsStrict) {
  EXPECT_EQ(decode_predictions("1\n2.5\n", 2), (std::vector<double>{1.0, 2.5}));
  EXPECT_THROW(decode_predictions("1\n", 2), Error);
  EXPECT_THROW(decode_predictions("1\nx\n", 2), Error);
  EXPECT_THROW(decode_predictions("1,2\n3\n", 2), Error);
}

TEST(ExternalModel, ZeroStubReturnsZeros) {
  ExternalModel m("tail -n +2 | sed 's/.*/0/'", 3);
  const FittedPredictor p(std::make_shared<ExternalModel>("tail -n +2 | sed 's/.*/0/'", 3), 0.0);
  EXPECT_EQ(p.predict(Matrix(4, 3, 0.5)), (std::vector<double>{0, 0, 0, 0}));
}

TEST(ExternalModel, ReceivesExactPayload) {
  TempDir dir;
  const auto capture = dir / "payload.txt";
  const FittedPredictor p(
      std::make_shared<ExternalModel>("cat > '" + capture.string() + "'; printf '1\\n2\\n'", 2), 0.0);
  const Matrix m{{0.25, 1.0 / 3.0}, {4.0, -0.0}};
  EXPECT_EQ(p.predict(m), (std::vector<double>{1, 2}));
  EXPECT_EQ(read_file(capture), encode_payload("#predict", m));
}

TEST(ExternalModel, ProtocolViolations) {
  const Matrix m(3, 2, 1.0);
  EXPECT_THROW(FittedPredictor(std::make_shared<ExternalModel>("cat >/dev/null; echo 1", 2), 0).predict(m), Error);
  EXPECT_THROW(FittedPredictor(std::make_shared<ExternalModel>("cat >/dev/null; exit 3", 2), 0).predict(m), Error);
  EXPECT_THROW(FittedPredictor(std::make_shared<ExternalModel>("definitely-not-a-command-xyz", 2), 0).predict(m),
               Error);
  // Process that ignores its input and closes stdin early.
  EXPECT_THROW(FittedPredictor(std::make_shared<ExternalModel>("exec 0<&-; echo 1", 2), 0).predict(Matrix(20000, 2, 1.0)),
               Error);
}

TEST(ExternalModel, FitSendsTargetAndHandshakes) {
  TempDir dir;
  const auto log = dir / "calls.txt";
  // fit: record the mode line; predict: echo the first feature of each row.
  const std::string cmd = "read mode; echo \"$mode\" >> '" + log.string() +
                          "'; if [ \"$mode\" = '#fit' ]; then cat >/dev/null; else cut -d, -f1; fi";
  auto spec = spec_of(ModelKind::external);
  spec.external_command = cmd;
  const auto d = bench_data(20, 3, 2);
  const auto fitted = fit(spec, d);
  // fit on train, predict holdout, fit on full, one-row handshake
  EXPECT_EQ(read_file(log), "#fit\n#predict\n#fit\n#predict\n");
  EXPECT_EQ(fitted.predict(d.features()), d.features().column(0));
  auto missing = spec;
  missing.external_command = "definitely-not-a-command-xyz";
  EXPECT_THROW(fit(missing, d), Error);
}
