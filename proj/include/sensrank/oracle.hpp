#pragma once

// Closed-form benchmark functions, synthetic data generation, and brute-force
// (double-loop Monte Carlo) estimates of Var(E[Y | X_S]) used as ground truth
// for the pick-freeze estimators.

#include <algorithm>
#include <bit>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sensrank/dataset.hpp"
#include "sensrank/error.hpp"
#include "sensrank/matrix.hpp"
#include "sensrank/models.hpp"
#include "sensrank/parallel.hpp"
#include "sensrank/random.hpp"

namespace sensrank {

enum class FunctionKind { friedman1, friedman2, additive_linear, product_interaction, constant };

struct AnalyticFunction {
  FunctionKind kind = FunctionKind::friedman1;
  std::vector<double> coefficients;  // additive_linear only
  double constant_value = 0.0;       // constant only
  double sigma = 0.0;

  static AnalyticFunction friedman1(double sigma = 0.0) { return {FunctionKind::friedman1, {}, 0.0, sigma}; }
  static AnalyticFunction friedman2(double sigma = 0.0) { return {FunctionKind::friedman2, {}, 0.0, sigma}; }
  static AnalyticFunction additive(std::vector<double> coef, double sigma = 0.0) {
    return {FunctionKind::additive_linear, std::move(coef), 0.0, sigma};
  }
  static AnalyticFunction interaction(double sigma = 0.0) {
    return {FunctionKind::product_interaction, {}, 0.0, sigma};
  }
  static AnalyticFunction constant(double c) { return {FunctionKind::constant, {}, c, 0.0}; }

  void validate() const {
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw Error(Stage::usage, "noise sigma must be >= 0");
    if (kind == FunctionKind::additive_linear && coefficients.empty())
      throw Error(Stage::usage, "additive function needs at least one coefficient");
  }

  std::size_t relevant_count() const {
    switch (kind) {
      case FunctionKind::friedman1: return 5;
      case FunctionKind::friedman2: return 4;
      case FunctionKind::additive_linear: return coefficients.size();
      case FunctionKind::product_interaction: return 2;
      case FunctionKind::constant: return 0;
    }
    return 0;
  }

  std::string name() const {
    switch (kind) {
      case FunctionKind::friedman1: return "friedman1";
      case FunctionKind::friedman2: return "friedman2";
      case FunctionKind::additive_linear: return "additive";
      case FunctionKind::product_interaction: return "interaction";
      case FunctionKind::constant: return "constant";
    }
    return "unknown";
  }

  /// Noise-free value.
  double operator()(std::span<const double> x) const {
    if (x.size() < relevant_count()) throw Error(Stage::estimate, "row shorter than the function's input count");
    switch (kind) {
      case FunctionKind::friedman1:
        return 10.0 * std::sin(std::numbers::pi * x[0] * x[1]) + 20.0 * (x[2] - 0.5) * (x[2] - 0.5) + 10.0 * x[3] +
               5.0 * x[4];
      case FunctionKind::friedman2: {
        const double denom = x[1] * x[3];
        if (denom == 0.0) throw Error(Stage::estimate, "friedman2 undefined where x1 * x3 = 0");
        const double inner = x[1] * x[2] - 1.0 / denom;
        return std::sqrt(x[0] * x[0] + inner * inner);
      }
      case FunctionKind::additive_linear: {
        double s = 0.0;
        for (std::size_t i = 0; i < coefficients.size(); ++i) s += coefficients[i] * x[i];
        return s;
      }
      case FunctionKind::product_interaction: return (x[0] - 0.5) * (x[1] - 0.5);
      case FunctionKind::constant: return constant_value;
    }
    return 0.0;
  }

  double eval(std::span<const double> x, double noise_draw) const { return (*this)(x) + sigma * noise_draw; }
};

inline std::optional<AnalyticFunction> parse_function(std::string_view name, std::vector<double> coef = {},
                                                      double sigma = 0.0) {
  if (name == "friedman1") return AnalyticFunction::friedman1(sigma);
  if (name == "friedman2") return AnalyticFunction::friedman2(sigma);
  if (name == "additive") return AnalyticFunction::additive(coef.empty() ? std::vector<double>{2.0, 1.0} : coef, sigma);
  if (name == "interaction") return AnalyticFunction::interaction(sigma);
  return std::nullopt;
}

enum class FeatureDistribution { uniform01, normal, paper_ranges };

inline std::string_view to_string(FeatureDistribution d) {
  switch (d) {
    case FeatureDistribution::uniform01: return "uniform01";
    case FeatureDistribution::normal: return "normal(0.5,0.25)";
    case FeatureDistribution::paper_ranges: return "paper_ranges";
  }
  return "unknown";
}

inline std::optional<FeatureDistribution> parse_distribution(std::string_view s) {
  if (s == "uniform" || s == "uniform01") return FeatureDistribution::uniform01;
  if (s == "normal") return FeatureDistribution::normal;
  if (s == "paper_ranges" || s == "ranges") return FeatureDistribution::paper_ranges;
  return std::nullopt;
}

struct BenchmarkSpec {
  AnalyticFunction function;
  std::size_t n = 10000;
  std::size_t k_total = 20;
  FeatureDistribution distribution = FeatureDistribution::uniform01;
  std::uint64_t seed = 0;

  void validate() const {
    function.validate();
    if (k_total < std::max<std::size_t>(function.relevant_count(), 1))
      throw Error(Stage::usage, "k_total smaller than the function's relevant feature count");
    if (n < 4) throw Error(Stage::usage, "benchmark needs n >= 4");
  }
};

// Friedman-2 input ranges; other functions and columns use U[0, 1].
inline std::pair<double, double> uniform_range(const BenchmarkSpec& spec, std::size_t column) {
  if (spec.distribution == FeatureDistribution::paper_ranges && spec.function.kind == FunctionKind::friedman2) {
    switch (column) {
      case 0: return {0.0, 100.0};
      case 1: return {40.0 * std::numbers::pi, 560.0 * std::numbers::pi};
      case 2: return {0.0, 1.0};
      case 3: return {1.0, 11.0};
      default: break;
    }
  }
  return {0.0, 1.0};
}

/// One feature draw. Normal draws are not clipped.
inline double draw_feature(const BenchmarkSpec& spec, std::size_t column, Rng& rng) {
  if (spec.distribution == FeatureDistribution::normal) return rng.normal(0.5, 0.25);
  const auto [lo, hi] = uniform_range(spec, column);
  return rng.uniform(lo, hi);
}

inline void draw_row(const BenchmarkSpec& spec, Rng& rng, std::span<double> row) {
  for (std::size_t c = 0; c < row.size(); ++c) row[c] = draw_feature(spec, c, rng);
}

/// Features come from stream `seed`, noise from an independent derived
/// stream, so the feature matrix does not depend on sigma.
inline Dataset generate_dataset(const BenchmarkSpec& spec) {
  spec.validate();
  Matrix x(spec.n, spec.k_total);
  Rng feature_rng(spec.seed);
  for (std::size_t r = 0; r < spec.n; ++r) draw_row(spec, feature_rng, x.row(r));
  Rng noise_rng(derive_seed(spec.seed, 0x6e6f697365));
  std::vector<double> y(spec.n);
  for (std::size_t r = 0; r < spec.n; ++r) y[r] = spec.function.eval(x.row(r), noise_rng.normal());
  std::vector<std::string> names;
  for (std::size_t c = 0; c < spec.k_total; ++c) names.push_back("x" + std::to_string(c));
  return Dataset(std::move(x), std::move(names), std::move(y), "y");
}

// The analytic function used directly as the surrogate model. By default it is
// noise-free. With a noise seed, sigma * N(0,1) is added where the normal draw
// is a hash of the row's bits, so predict stays a pure function of its input.
class AnalyticPredictor final : public Predictor {
 public:
  AnalyticPredictor(AnalyticFunction f, std::size_t k, std::optional<std::uint64_t> noise_seed = std::nullopt)
      : f_(std::move(f)), k_(k), noise_seed_(noise_seed) {
    if (k_ < f_.relevant_count()) throw Error(Stage::fit, "too few columns for the analytic function");
  }

  std::size_t input_columns() const override { return k_; }

  std::vector<double> predict_rows(const Matrix& m) const override {
    std::vector<double> out(m.rows());
    for (std::size_t r = 0; r < m.rows(); ++r) {
      out[r] = f_(m.row(r));
      if (noise_seed_ && f_.sigma > 0.0) out[r] += f_.sigma * row_noise(m.row(r));
    }
    return out;
  }

  const AnalyticFunction& function() const noexcept { return f_; }

 private:
  double row_noise(std::span<const double> row) const {
    std::uint64_t h = mix_seed(*noise_seed_);
    for (double v : row) h = mix_seed(h ^ std::bit_cast<std::uint64_t>(v));
    const double u1 = 1.0 - static_cast<double>(mix_seed(h) >> 11) * 0x1.0p-53;
    const double u2 = static_cast<double>(mix_seed(h + 1) >> 11) * 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  AnalyticFunction f_;
  std::size_t k_;
  std::optional<std::uint64_t> noise_seed_;
};

inline FittedPredictor true_function_predictor(const AnalyticFunction& f, std::size_t k,
                                               std::optional<std::uint64_t> noise_seed = std::nullopt) {
  return FittedPredictor(std::make_shared<AnalyticPredictor>(f, k, noise_seed), 0.0);
}

struct OracleBudget {
  std::size_t n_outer = 2000;
  std::size_t n_inner = 2000;
  std::size_t n_variance = 0;  // plain Monte Carlo draws for V(Y); 0 -> n_outer * n_inner
  std::size_t workers = default_workers();
};

struct VarianceEstimate {
  double value = 0.0;
  double std_error = 0.0;
};

// Double loop for Var(E[Y | X_S]). Outer iteration j draws a full row from its
// own derived stream and keeps the subset coordinates; the inner loop redraws
// the complement n_inner times and averages f plus sigma * N(0,1). The
// variance of the outer means is corrected for inner-loop sampling noise by
// subtracting mean(inner variance) / n_inner. Every subset sees the same
// outer and inner draws (common random numbers).
template <typename Fn>
  requires std::invocable<const Fn&, std::span<const double>>
VarianceEstimate conditional_variance(const Fn& f, double sigma, std::span<const std::size_t> subset,
                                      const BenchmarkSpec& spec, const OracleBudget& budget) {
  if (subset.empty()) return {0.0, 0.0};
  for (auto s : subset)
    if (s >= spec.k_total) throw Error(Stage::usage, "subset index out of range");
  if (budget.n_outer < 2 || budget.n_inner < 1) throw Error(Stage::usage, "oracle budgets too small");

  std::vector<char> fixed(spec.k_total, 0);
  for (auto s : subset) fixed[s] = 1;
  const std::size_t n_outer = budget.n_outer;
  const std::size_t n_inner = budget.n_inner;
  std::vector<double> means(n_outer), inner_vars(n_outer);

  parallel_for(n_outer, budget.workers, [&](std::size_t j) {
    Rng rng(derive_seed(spec.seed ^ 0x6f7261636c65ULL, j));
    std::vector<double> outer(spec.k_total), row(spec.k_total);
    draw_row(spec, rng, outer);
    double sum = 0.0, sum_sq = 0.0;
    for (std::size_t t = 0; t < n_inner; ++t) {
      draw_row(spec, rng, row);
      for (std::size_t c = 0; c < spec.k_total; ++c)
        if (fixed[c]) row[c] = outer[c];
      const double noise = rng.normal();
      const double y = f(std::span<const double>(row)) + sigma * noise;
      sum += y;
      sum_sq += y * y;
    }
    const double m = sum / static_cast<double>(n_inner);
    means[j] = m;
    inner_vars[j] = n_inner > 1 ? std::max(0.0, (sum_sq - sum * m) / static_cast<double>(n_inner - 1)) : 0.0;
  });

  double grand = 0.0;
  for (double m : means) grand += m;
  grand /= static_cast<double>(n_outer);
  double ss = 0.0, mean_inner_var = 0.0;
  for (std::size_t j = 0; j < n_outer; ++j) {
    ss += (means[j] - grand) * (means[j] - grand);
    mean_inner_var += inner_vars[j];
  }
  mean_inner_var /= static_cast<double>(n_outer);
  const double raw = ss / static_cast<double>(n_outer - 1);
  const double value = raw - (n_inner > 1 ? mean_inner_var / static_cast<double>(n_inner) : 0.0);

  double sq_dev_mean = ss / static_cast<double>(n_outer);
  double ss4 = 0.0;
  for (double m : means) {
    const double d = (m - grand) * (m - grand) - sq_dev_mean;
    ss4 += d * d;
  }
  const double se = std::sqrt(ss4 / static_cast<double>(n_outer - 1) / static_cast<double>(n_outer));
  return {value, se};
}

inline VarianceEstimate conditional_variance(const AnalyticFunction& f, std::span<const std::size_t> subset,
                                             const BenchmarkSpec& spec, const OracleBudget& budget) {
  return conditional_variance(f, f.sigma, subset, spec, budget);
}

/// Var(E[Y | X_S]) by brute force.
inline double double_loop_variance(const AnalyticFunction& f, std::span<const std::size_t> subset,
                                   const BenchmarkSpec& spec, std::size_t n_outer, std::size_t n_inner) {
  OracleBudget b;
  b.n_outer = n_outer;
  b.n_inner = n_inner;
  return conditional_variance(f, subset, spec, b).value;
}

/// V(Y) including noise, by plain Monte Carlo over all features.
template <typename Fn>
  requires std::invocable<const Fn&, std::span<const double>>
VarianceEstimate output_variance(const Fn& f, double sigma, const BenchmarkSpec& spec, std::size_t draws) {
  if (draws < 2) throw Error(Stage::usage, "need at least 2 draws");
  Rng rng(derive_seed(spec.seed ^ 0x766172ULL, 0));
  std::vector<double> row(spec.k_total), ys(draws);
  for (auto& y : ys) {
    draw_row(spec, rng, row);
    y = f(std::span<const double>(row)) + sigma * rng.normal();
  }
  double mean = 0.0;
  for (double y : ys) mean += y;
  mean /= static_cast<double>(draws);
  double ss = 0.0;
  for (double y : ys) ss += (y - mean) * (y - mean);
  const double var = ss / static_cast<double>(draws - 1);
  double ss4 = 0.0;
  for (double y : ys) {
    const double d = (y - mean) * (y - mean) - var;
    ss4 += d * d;
  }
  return {var, std::sqrt(ss4 / static_cast<double>(draws - 1) / static_cast<double>(draws))};
}

inline VarianceEstimate output_variance(const AnalyticFunction& f, const BenchmarkSpec& spec, std::size_t draws) {
  return output_variance(f, f.sigma, spec, draws);
}

// Interaction-only component by inclusion-exclusion:
//   V'_S = sum over nonempty T subset of S of (-1)^(|S|-|T|) Var(E[Y | X_T]).
// The reported standard error is the sum of the terms' errors (an upper bound).
template <typename Fn>
  requires std::invocable<const Fn&, std::span<const double>>
VarianceEstimate partial_variance_estimate(const Fn& f, double sigma, std::span<const std::size_t> subset,
                                           const BenchmarkSpec& spec, const OracleBudget& budget) {
  if (subset.empty()) throw Error(Stage::usage, "partial variance needs a nonempty subset");
  if (subset.size() > 4) throw Error(Stage::usage, "partial variance supports subsets of at most 4 features");
  const std::size_t s = subset.size();
  VarianceEstimate total;
  for (std::uint32_t mask = 1; mask < (1u << s); ++mask) {
    std::vector<std::size_t> part;
    for (std::size_t b = 0; b < s; ++b)
      if (mask & (1u << b)) part.push_back(subset[b]);
    const auto term = conditional_variance(f, sigma, part, spec, budget);
    const bool negative = ((s - part.size()) % 2) == 1;
    total.value += negative ? -term.value : term.value;
    total.std_error += term.std_error;
  }
  return total;
}

inline VarianceEstimate partial_variance_estimate(const AnalyticFunction& f, std::span<const std::size_t> subset,
                                                  const BenchmarkSpec& spec, const OracleBudget& budget) {
  return partial_variance_estimate(f, f.sigma, subset, spec, budget);
}

inline double partial_variance_component(const AnalyticFunction& f, std::span<const std::size_t> subset,
                                         const BenchmarkSpec& spec, const OracleBudget& budget) {
  return partial_variance_estimate(f, subset, spec, budget).value;
}

struct OracleIndices {
  std::vector<double> first;
  std::vector<double> total;
  double variance = 0.0;
};

/// S_i = Var(E[Y|X_i]) / V and S_Ti = 1 - Var(E[Y|X_~i]) / V for every feature.
inline OracleIndices brute_force_indices(const AnalyticFunction& f, const BenchmarkSpec& spec,
                                         const OracleBudget& budget) {
  spec.validate();
  const std::size_t k = spec.k_total;
  const std::size_t draws = budget.n_variance ? budget.n_variance : budget.n_outer * budget.n_inner;
  OracleIndices out;
  out.variance = output_variance(f, spec, draws).value;
  if (!(out.variance > 0.0))
    throw Error(Stage::estimate, "output variance is zero; sensitivity indices are undefined");
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t single[] = {i};
    std::vector<std::size_t> rest;
    for (std::size_t c = 0; c < k; ++c)
      if (c != i) rest.push_back(c);
    out.first.push_back(conditional_variance(f, single, spec, budget).value / out.variance);
    out.total.push_back(1.0 - conditional_variance(f, rest, spec, budget).value / out.variance);
  }
  return out;
}

}  // namespace sensrank
