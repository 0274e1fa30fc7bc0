#pragma once

// Variance-based sensitivity indices from a trained model.
//
// With predictions f on the full data D (n rows) and on the sampling halves
// A, B and hybrids A_B^(i) (A with column i from B, n' rows each):
//
//   f0   = mean f(D)
//   V    = mean f(D)^2 - f0^2
//   S_Ti = 1 - [ (1/n') sum_j f(A)_j f(A_B^(i))_j - f0^2 ] / V
//   S_i  =     [ (1/n') sum_j f(B)_j (f(A_B^(i))_j - f(A)_j) ] / V
//
// S_Ti is the Homma-Saltelli estimate of 1 - Var(E[Y | X_~i]) / V. S_i reuses
// the same prediction vectors plus f(B).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sensrank/dataset.hpp"
#include "sensrank/error.hpp"
#include "sensrank/io.hpp"
#include "sensrank/models.hpp"
#include "sensrank/parallel.hpp"
#include "sensrank/sampling.hpp"

namespace sensrank {

struct MomentPair {
  double f0 = 0.0;
  double variance = 0.0;
};

/// Population mean and variance, V = mean(f^2) - f0^2. Values at the
/// round-off floor of that difference (or below zero) become exactly 0.
inline MomentPair moments(std::span<const double> predictions) {
  const std::size_t n = predictions.size();
  if (n < 2) throw Error(Stage::estimate, "moments need at least 2 predictions");
  // Neumaier-compensated sums
  double sum = 0.0, c_sum = 0.0, sum_sq = 0.0, c_sq = 0.0;
  auto add = [](double& s, double& c, double v) {
    const double t = s + v;
    c += std::abs(s) >= std::abs(v) ? (s - t) + v : (v - t) + s;
    s = t;
  };
  bool constant = true;
  for (double v : predictions) {
    if (!std::isfinite(v)) throw Error(Stage::estimate, "non-finite prediction");
    add(sum, c_sum, v);
    add(sum_sq, c_sq, v * v);
    constant = constant && v == predictions[0];
  }
  const double f0 = (sum + c_sum) / static_cast<double>(n);
  const double mean_sq = (sum_sq + c_sq) / static_cast<double>(n);
  double var = mean_sq - f0 * f0;
  if (constant || var <= 8.0 * std::numeric_limits<double>::epsilon() * mean_sq) var = 0.0;
  return {f0, var};
}

namespace detail {

inline void require_estimable(std::size_t a, std::size_t b, const MomentPair& mom) {
  if (a != b) throw Error(Stage::estimate, "prediction vectors differ in length");
  if (a < 2) throw Error(Stage::estimate, "need at least 2 rows per half");
  if (!(mom.variance > 0.0))
    throw Error(Stage::estimate, "model output variance is zero; sensitivity indices are undefined");
}

}  // namespace detail

/// Total-effect index, raw (may fall outside [0, 1]).
inline double total_index(std::span<const double> f_a, std::span<const double> f_ab, const MomentPair& mom) {
  detail::require_estimable(f_a.size(), f_ab.size(), mom);
  double s = 0.0;
  for (std::size_t j = 0; j < f_a.size(); ++j) s += f_a[j] * f_ab[j];
  const double conditional = s / static_cast<double>(f_a.size()) - mom.f0 * mom.f0;
  return 1.0 - conditional / mom.variance;
}

/// First-order index, raw.
inline double first_order_index(std::span<const double> f_a, std::span<const double> f_b,
                                std::span<const double> f_ab, const MomentPair& mom) {
  detail::require_estimable(f_a.size(), f_ab.size(), mom);
  detail::require_estimable(f_a.size(), f_b.size(), mom);
  double s = 0.0;
  for (std::size_t j = 0; j < f_a.size(); ++j) s += f_b[j] * (f_ab[j] - f_a[j]);
  return s / static_cast<double>(f_a.size()) / mom.variance;
}

/// Standard error of the mean of per-row terms, divided by V.
inline double scaled_standard_error(std::span<const double> terms, double variance) {
  const auto n = static_cast<double>(terms.size());
  const double mean = std::accumulate(terms.begin(), terms.end(), 0.0) / n;
  double ss = 0.0;
  for (double t : terms) ss += (t - mean) * (t - mean);
  return std::sqrt(ss / (n - 1.0)) / std::sqrt(n) / variance;
}

/// Rank 1 is the largest value; equal values rank by ascending index.
inline std::vector<std::size_t> rank(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
  std::vector<std::size_t> ranks(values.size());
  for (std::size_t pos = 0; pos < order.size(); ++pos) ranks[order[pos]] = pos + 1;
  return ranks;
}

struct FeatureSensitivity {
  std::string name;
  double first_raw = 0.0;
  double total_raw = 0.0;
  double first = 0.0;  // clamped to [0, 1]
  double total = 0.0;  // clamped to [0, 1]
  double first_se = 0.0;
  double total_se = 0.0;
  std::size_t rank_first = 0;
  std::size_t rank_total = 0;

  bool operator==(const FeatureSensitivity&) const = default;
};

struct SensitivityReport {
  std::vector<FeatureSensitivity> features;
  double f0 = 0.0;
  double variance = 0.0;
  std::size_t n_half = 0;
  std::optional<double> holdout_mae;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> model;  // echo of the model configuration

  std::vector<double> first_raw() const {
    std::vector<double> v;
    for (const auto& f : features) v.push_back(f.first_raw);
    return v;
  }
  std::vector<double> total_raw() const {
    std::vector<double> v;
    for (const auto& f : features) v.push_back(f.total_raw);
    return v;
  }
  std::vector<std::size_t> ranks_total() const {
    std::vector<std::size_t> v;
    for (const auto& f : features) v.push_back(f.rank_total);
    return v;
  }
  std::vector<std::size_t> ranks_first() const {
    std::vector<std::size_t> v;
    for (const auto& f : features) v.push_back(f.rank_first);
    return v;
  }

  bool operator==(const SensitivityReport&) const = default;
};

inline std::map<std::string, std::string> describe(const PredictorSpec& spec) {
  std::map<std::string, std::string> m;
  m["kind"] = std::string(to_string(spec.kind));
  m["seed"] = std::to_string(spec.seed);
  m["holdout_fraction"] = format_double(spec.holdout_fraction);
  switch (spec.kind) {
    case ModelKind::knn: m["knn_k"] = std::to_string(spec.knn_k); break;
    case ModelKind::random_forest:
      m["rf_trees"] = std::to_string(spec.rf_trees);
      m["rf_min_leaf"] = std::to_string(spec.rf_min_leaf);
      m["rf_mtry"] = spec.rf_mtry == 0 ? "auto" : std::to_string(spec.rf_mtry);
      break;
    case ModelKind::external: m["external_command"] = spec.external_command; break;
    case ModelKind::linear: break;
  }
  return m;
}

struct EvaluateOptions {
  std::size_t workers = default_workers();
};

/// Steps 2-5 of the ranking procedure for an already trained model.
inline SensitivityReport evaluate_predictor(const FittedPredictor& model, const Dataset& d, std::uint64_t seed,
                                            const EvaluateOptions& opts = {}) {
  const std::size_t k = d.cols();
  const MomentPair mom = moments(model.predict(d.features()));
  if (!(mom.variance > 0.0))
    throw Error(Stage::estimate, "model output variance is zero; sensitivity indices are undefined");

  PickFreezePair pair{shuffle_split_halves(d, seed), std::nullopt, std::nullopt};
  pair.f_a = model.predict(pair.split.a);
  pair.f_b = model.predict(pair.split.b);
  const auto& f_a = *pair.f_a;
  const auto& f_b = *pair.f_b;
  const std::size_t half = pair.split.half_rows();

  SensitivityReport report;
  report.features.resize(k);
  parallel_for(k, opts.workers, [&](std::size_t i) {
    const auto f_ab = model.predict(build_pick_freeze(pair.split, i));
    auto& out = report.features[i];
    out.name = d.names()[i];
    out.total_raw = total_index(f_a, f_ab, mom);
    out.first_raw = first_order_index(f_a, f_b, f_ab, mom);
    out.total = std::clamp(out.total_raw, 0.0, 1.0);
    out.first = std::clamp(out.first_raw, 0.0, 1.0);
    std::vector<double> terms(half);
    for (std::size_t j = 0; j < half; ++j) terms[j] = f_a[j] * f_ab[j];
    out.total_se = scaled_standard_error(terms, mom.variance);
    for (std::size_t j = 0; j < half; ++j) terms[j] = f_b[j] * (f_ab[j] - f_a[j]);
    out.first_se = scaled_standard_error(terms, mom.variance);
  });

  const auto rt = rank(report.total_raw());
  const auto rf = rank(report.first_raw());
  for (std::size_t i = 0; i < k; ++i) {
    report.features[i].rank_total = rt[i];
    report.features[i].rank_first = rf[i];
  }
  report.f0 = mom.f0;
  report.variance = mom.variance;
  report.n_half = half;
  report.holdout_mae = model.holdout_mae();
  report.seed = seed;
  return report;
}

/// Full procedure: train the surrogate on `d`, then estimate every index.
inline SensitivityReport evaluate_features(const PredictorSpec& spec, const Dataset& d, std::uint64_t seed,
                                           const EvaluateOptions& opts = {}) {
  if (d.rows() < 4) throw Error(Stage::estimate, "need at least 4 rows");
  const FittedPredictor model = fit(spec, d);
  auto report = evaluate_predictor(model, d, seed, opts);
  report.model = describe(spec);
  return report;
}

}  // namespace sensrank
