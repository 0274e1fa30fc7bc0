#pragma once

// Recursive feature elimination: refit on the surviving features, drop the
// least important one, repeat until a single feature is left.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

#include "sensrank/dataset.hpp"
#include "sensrank/error.hpp"
#include "sensrank/forest.hpp"
#include "sensrank/models.hpp"

namespace sensrank {

enum class RfeEstimator { linear, random_forest };

inline std::string_view to_string(RfeEstimator e) { return e == RfeEstimator::linear ? "linear" : "random_forest"; }

struct RfeResult {
  std::vector<std::size_t> elimination_order;  // first eliminated first
  std::vector<std::size_t> ranks;              // 1 = sole survivor

  bool operator==(const RfeResult&) const = default;
};

/// |w| per feature, intercept excluded.
inline std::vector<double> linear_importance(const LinearModel& m) {
  std::vector<double> out;
  for (double w : m.weights()) out.push_back(std::abs(w));
  return out;
}

/// Impurity decrease per feature summed over trees, normalized to sum 1
/// (left as zeros when the forest never split).
inline std::vector<double> rf_importance(const RandomForest& forest) {
  auto imp = forest.raw_importance();
  const double total = std::accumulate(imp.begin(), imp.end(), 0.0);
  if (total > 0.0)
    for (auto& v : imp) v /= total;
  return imp;
}

inline RfeResult rfe(const Dataset& d, RfeEstimator estimator, std::uint64_t seed,
                     const ForestParams& forest_params = {}) {
  const std::size_t k = d.cols();
  if (k < 2) throw Error(Stage::fit, "RFE needs at least 2 features");
  if (!d.has_target()) throw Error(Stage::fit, "RFE needs a target column");
  if (estimator == RfeEstimator::linear && d.rows() <= k)
    throw Error(Stage::fit, "RFE with a linear model needs more rows than features");

  std::vector<std::size_t> alive(k);
  std::iota(alive.begin(), alive.end(), std::size_t{0});
  RfeResult result;
  std::uint64_t round = 0;
  while (alive.size() > 1) {
    const Matrix x = d.features().select_cols(alive);
    std::vector<double> importance;
    try {
      if (estimator == RfeEstimator::linear) {
        importance = linear_importance(LinearModel::fit(ScalingSpec::fit(x).apply(x), d.target()));
      } else {
        importance = rf_importance(RandomForest::fit(x, d.target(), forest_params, derive_seed(seed, round)));
      }
    } catch (const Error& e) {
      std::string names;
      for (auto c : alive) names += (names.empty() ? "" : ",") + d.names()[c];
      throw Error(Stage::fit, std::string("RFE fit failed with features {") + names + "}: " + e.what());
    }
    // Lowest importance goes; ties drop the lowest original index.
    std::size_t victim = 0;
    for (std::size_t j = 1; j < alive.size(); ++j)
      if (importance[j] < importance[victim]) victim = j;
    result.elimination_order.push_back(alive[victim]);
    alive.erase(alive.begin() + static_cast<std::ptrdiff_t>(victim));
    ++round;
  }
  result.elimination_order.push_back(alive.front());
  result.ranks.assign(k, 0);
  for (std::size_t pos = 0; pos < k; ++pos) result.ranks[result.elimination_order[pos]] = k - pos;
  return result;
}

}  // namespace sensrank
