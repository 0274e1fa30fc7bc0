#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sensrank/dataset.hpp"
#include "sensrank/error.hpp"
#include "sensrank/matrix.hpp"

namespace sensrank {

/// A copy of A whose column `feature` is taken from B.
inline Matrix build_pick_freeze(const HalfSplit& split, std::size_t feature) {
  if (feature >= split.a.cols())
    throw Error(Stage::estimate, "feature index " + std::to_string(feature) + " out of range for " +
                                     std::to_string(split.a.cols()) + " columns");
  Matrix out = split.a;
  for (std::size_t r = 0; r < out.rows(); ++r) out(r, feature) = split.b(r, feature);
  return out;
}

/// Split plus the model outputs on A and B, filled once per run.
struct PickFreezePair {
  HalfSplit split;
  std::optional<std::vector<double>> f_a;
  std::optional<std::vector<double>> f_b;

  bool consistent() const {
    const auto n = split.half_rows();
    return (!f_a || f_a->size() == n) && (!f_b || f_b->size() == n);
  }
};

}  // namespace sensrank
