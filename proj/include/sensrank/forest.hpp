#pragma once

// Regression forest of CART trees.
//
// Splits maximize the reduction in sum of squared errors over midpoints of
// adjacent distinct sorted values. A node becomes a leaf when it holds fewer
// than 2 * min_leaf samples, its targets are all equal, or no candidate split
// leaves min_leaf samples on both sides. Each tree sees a bootstrap resample
// and draws `mtry` candidate features per split. There is no depth limit.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include "sensrank/matrix.hpp"
#include "sensrank/random.hpp"

namespace sensrank {

struct ForestParams {
  std::size_t trees = 10;
  std::size_t min_leaf = 5;
  std::size_t mtry = 0;  // 0 -> ceil(k / 3)
};

class RegressionTree {
 public:
  struct Node {
    std::int32_t feature = -1;  // -1 marks a leaf
    double threshold = 0.0;     // x <= threshold goes left
    double value = 0.0;
    std::uint32_t left = 0;
    std::uint32_t right = 0;
  };

  /// `rows` indexes into x/y and may repeat (bootstrap). `importance` receives
  /// the SSE decrease of every split, accumulated per feature.
  static RegressionTree grow(const Matrix& x, std::span<const double> y, std::vector<std::size_t> rows,
                             std::size_t min_leaf, std::size_t mtry, Rng& rng, std::vector<double>& importance) {
    RegressionTree tree;
    const std::size_t k = x.cols();
    mtry = std::clamp<std::size_t>(mtry, 1, k);
    min_leaf = std::max<std::size_t>(min_leaf, 1);
    std::vector<std::size_t> feature_pool(k);
    std::vector<std::pair<double, double>> scratch;  // (x, y) sorted per candidate feature

    struct Pending {
      std::uint32_t node;
      std::size_t begin, end;
    };
    std::vector<Pending> stack;
    tree.nodes_.push_back({});
    stack.push_back({0, 0, rows.size()});

    while (!stack.empty()) {
      const Pending job = stack.back();
      stack.pop_back();
      const std::size_t n = job.end - job.begin;

      double sum = 0.0;
      double lo = y[rows[job.begin]], hi = lo;
      for (std::size_t i = job.begin; i < job.end; ++i) {
        const double v = y[rows[i]];
        sum += v;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      tree.nodes_[job.node].value = sum / static_cast<double>(n);
      if (n < 2 * min_leaf || lo == hi) continue;

      std::iota(feature_pool.begin(), feature_pool.end(), std::size_t{0});
      for (std::size_t j = 0; j < mtry; ++j) {
        const auto pick = j + static_cast<std::size_t>(rng.index(k - j));
        std::swap(feature_pool[j], feature_pool[pick]);
      }

      const double parent_score = sum * sum / static_cast<double>(n);
      double best_gain = 0.0;
      std::int32_t best_feature = -1;
      double best_threshold = 0.0;

      for (std::size_t j = 0; j < mtry; ++j) {
        const std::size_t f = feature_pool[j];
        scratch.clear();
        for (std::size_t i = job.begin; i < job.end; ++i) scratch.emplace_back(x(rows[i], f), y[rows[i]]);
        std::sort(scratch.begin(), scratch.end());
        double left_sum = 0.0;
        for (std::size_t p = 1; p < n; ++p) {
          left_sum += scratch[p - 1].second;
          if (p < min_leaf) continue;
          if (n - p < min_leaf) break;
          if (!(scratch[p - 1].first < scratch[p].first)) continue;
          const double right_sum = sum - left_sum;
          const double score = left_sum * left_sum / static_cast<double>(p) +
                               right_sum * right_sum / static_cast<double>(n - p);
          const double gain = score - parent_score;
          if (gain > best_gain) {
            best_gain = gain;
            best_feature = static_cast<std::int32_t>(f);
            double mid = 0.5 * (scratch[p - 1].first + scratch[p].first);
            if (!(mid < scratch[p].first)) mid = scratch[p - 1].first;
            best_threshold = mid;
          }
        }
      }
      if (best_feature < 0) continue;

      auto first = rows.begin() + static_cast<std::ptrdiff_t>(job.begin);
      auto last = rows.begin() + static_cast<std::ptrdiff_t>(job.end);
      const auto f = static_cast<std::size_t>(best_feature);
      auto mid = std::stable_partition(first, last, [&](std::size_t r) { return x(r, f) <= best_threshold; });
      const auto split_at = static_cast<std::size_t>(mid - rows.begin());

      importance[f] += best_gain;
      const auto left = static_cast<std::uint32_t>(tree.nodes_.size());
      tree.nodes_.push_back({});
      tree.nodes_.push_back({});
      Node& node = tree.nodes_[job.node];
      node.feature = best_feature;
      node.threshold = best_threshold;
      node.left = left;
      node.right = left + 1;
      stack.push_back({left + 1, split_at, job.end});
      stack.push_back({left, job.begin, split_at});
    }
    return tree;
  }

  double predict(std::span<const double> row) const {
    std::uint32_t i = 0;
    while (nodes_[i].feature >= 0) {
      const Node& n = nodes_[i];
      i = row[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
    }
    return nodes_[i].value;
  }

  const std::vector<Node>& nodes() const noexcept { return nodes_; }

 private:
  std::vector<Node> nodes_;
};

class RandomForest {
 public:
  static RandomForest fit(const Matrix& x, std::span<const double> y, const ForestParams& params,
                          std::uint64_t seed) {
    RandomForest forest;
    const std::size_t n = x.rows();
    const std::size_t k = x.cols();
    const std::size_t mtry = params.mtry == 0 ? (k + 2) / 3 : params.mtry;
    forest.raw_importance_.assign(k, 0.0);
    forest.k_ = k;
    for (std::size_t t = 0; t < std::max<std::size_t>(params.trees, 1); ++t) {
      Rng rng(derive_seed(seed, t));
      std::vector<std::size_t> rows(n);
      for (auto& r : rows) r = static_cast<std::size_t>(rng.index(n));
      std::sort(rows.begin(), rows.end());
      forest.trees_.push_back(
          RegressionTree::grow(x, y, std::move(rows), params.min_leaf, mtry, rng, forest.raw_importance_));
    }
    return forest;
  }

  double predict(std::span<const double> row) const {
    double s = 0.0;
    for (const auto& t : trees_) s += t.predict(row);
    return s / static_cast<double>(trees_.size());
  }

  std::vector<double> predict(const Matrix& m) const {
    std::vector<double> out(m.rows());
    for (std::size_t r = 0; r < m.rows(); ++r) out[r] = predict(m.row(r));
    return out;
  }

  /// Summed SSE decrease per feature over all trees, before normalization.
  const std::vector<double>& raw_importance() const noexcept { return raw_importance_; }
  const std::vector<RegressionTree>& trees() const noexcept { return trees_; }
  std::size_t input_columns() const noexcept { return k_; }

 private:
  std::vector<RegressionTree> trees_;
  std::vector<double> raw_importance_;
  std::size_t k_ = 0;
};

}  // namespace sensrank
