#pragma once

// Regression datasets: CSV interchange, min-max scaling, and the seeded
// shuffle-and-halve step that produces the two sampling matrices.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "sensrank/error.hpp"
#include "sensrank/io.hpp"
#include "sensrank/matrix.hpp"
#include "sensrank/random.hpp"

namespace sensrank {

/// n x k feature matrix with unique column names and an optional target.
class Dataset {
 public:
  Dataset() = default;

  Dataset(Matrix features, std::vector<std::string> names,
          std::optional<std::vector<double>> target = std::nullopt,
          std::string target_name = "y")
      : features_(std::move(features)),
        names_(std::move(names)),
        target_(std::move(target)),
        target_name_(std::move(target_name)) {
    validate();
  }

  std::size_t rows() const noexcept { return features_.rows(); }
  std::size_t cols() const noexcept { return features_.cols(); }
  const Matrix& features() const noexcept { return features_; }
  const std::vector<std::string>& names() const noexcept { return names_; }
  bool has_target() const noexcept { return target_.has_value(); }
  const std::vector<double>& target() const {
    if (!target_) throw Error(Stage::fit, "dataset has no target column");
    return *target_;
  }
  const std::optional<std::vector<double>>& maybe_target() const noexcept { return target_; }
  const std::string& target_name() const noexcept { return target_name_; }

  /// Same names and target, new feature matrix (for scaling).
  Dataset with_features(Matrix m) const { return Dataset(std::move(m), names_, target_, target_name_); }

  Dataset select_rows(std::span<const std::size_t> idx) const {
    std::optional<std::vector<double>> t;
    if (target_) {
      t.emplace(idx.size());
      for (std::size_t i = 0; i < idx.size(); ++i) (*t)[i] = (*target_)[idx[i]];
    }
    return Dataset(features_.select_rows(idx), names_, std::move(t), target_name_);
  }

  Dataset select_cols(std::span<const std::size_t> idx) const {
    std::vector<std::string> names;
    for (auto c : idx) names.push_back(names_[c]);
    return Dataset(features_.select_cols(idx), std::move(names), target_, target_name_);
  }

  bool operator==(const Dataset&) const = default;

 private:
  void validate() const {
    if (features_.rows() < 2) throw Error(Stage::parse, "dataset needs at least 2 rows");
    if (features_.cols() < 1) throw Error(Stage::parse, "dataset needs at least 1 feature");
    if (names_.size() != features_.cols())
      throw Error(Stage::parse, "feature name count does not match column count");
    std::set<std::string_view> seen;
    for (const auto& n : names_) {
      if (n.empty()) throw Error(Stage::parse, "empty feature name");
      if (!seen.insert(n).second) throw Error(Stage::parse, "duplicate feature name '" + n + "'");
    }
    if (target_ && target_->size() != features_.rows())
      throw Error(Stage::parse, "target length does not match row count");
    for (double v : features_.data())
      if (!std::isfinite(v)) throw Error(Stage::parse, "non-finite feature value");
    if (target_)
      for (double v : *target_)
        if (!std::isfinite(v)) throw Error(Stage::parse, "non-finite target value");
  }

  Matrix features_;
  std::vector<std::string> names_;
  std::optional<std::vector<double>> target_;
  std::string target_name_ = "y";
};

/// Target column selector: a header name or a 0-based column index.
using ColumnRef = std::variant<std::string, std::size_t>;

namespace detail {

inline std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    cells.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return cells;
}

inline std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    auto pos = text.find('\n', start);
    if (pos == std::string_view::npos) pos = text.size();
    auto line = text.substr(start, pos - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = pos + 1;
  }
  while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
  return lines;
}

}  // namespace detail

/// Parses comma-separated text with a mandatory header row. Data rows and
/// columns in error messages are 1-based (row 1 is the first line after the header).
inline Dataset parse_csv(std::string_view text, const std::optional<ColumnRef>& target = std::nullopt) {
  const auto lines = detail::split_lines(text);
  if (lines.empty()) throw Error(Stage::parse, "empty CSV input");
  auto header = detail::split_commas(lines[0]);
  if (text.size() >= 3 && static_cast<unsigned char>(text[0]) == 0xEF) {
    header[0] = header[0].substr(3);  // UTF-8 BOM
  }
  const std::size_t ncol = header.size();

  std::set<std::string_view> seen;
  for (auto h : header) {
    if (h.empty()) throw Error(Stage::parse, "empty column name in header");
    if (!seen.insert(h).second) throw Error(Stage::parse, "duplicate column name '" + std::string(h) + "'");
  }

  std::optional<std::size_t> target_col;
  if (target) {
    if (const auto* name = std::get_if<std::string>(&*target)) {
      auto it = std::find(header.begin(), header.end(), std::string_view(*name));
      if (it != header.end()) {
        target_col = static_cast<std::size_t>(it - header.begin());
      } else if (!name->empty() && std::all_of(name->begin(), name->end(), [](char c) { return c >= '0' && c <= '9'; })) {
        const auto idx = std::stoull(*name);
        if (idx < ncol) target_col = idx;
      }
    } else {
      const auto idx = std::get<std::size_t>(*target);
      if (idx < ncol) target_col = idx;
    }
    if (!target_col) throw Error(Stage::parse, "target column not found");
  }

  const std::size_t n = lines.size() - 1;
  const std::size_t k = ncol - (target_col ? 1 : 0);
  Matrix features(n, k);
  std::vector<double> y(target_col ? n : 0);
  for (std::size_t r = 0; r < n; ++r) {
    const auto cells = detail::split_commas(lines[r + 1]);
    if (cells.size() != ncol)
      throw Error(Stage::parse, "row " + std::to_string(r + 1) + " has " + std::to_string(cells.size()) +
                                    " cells, expected " + std::to_string(ncol));
    std::size_t out_c = 0;
    for (std::size_t c = 0; c < ncol; ++c) {
      const auto v = parse_double(cells[c]);
      if (!v)
        throw Error(Stage::parse, "non-numeric cell '" + std::string(cells[c]) + "' at row " + std::to_string(r + 1) +
                                      ", column " + std::to_string(c + 1));
      if (target_col && c == *target_col) {
        y[r] = *v;
      } else {
        features(r, out_c++) = *v;
      }
    }
  }

  std::vector<std::string> names;
  for (std::size_t c = 0; c < ncol; ++c)
    if (!target_col || c != *target_col) names.emplace_back(header[c]);
  if (target_col) return Dataset(std::move(features), std::move(names), std::move(y), std::string(header[*target_col]));
  return Dataset(std::move(features), std::move(names));
}

inline Dataset load_csv(const std::filesystem::path& path, const std::optional<ColumnRef>& target = std::nullopt) {
  if (!std::filesystem::exists(path)) throw Error(Stage::parse, "no such file '" + path.string() + "'");
  return parse_csv(read_file(path), target);
}

/// Features first, target (when present) as the last column.
inline std::string to_csv(const Dataset& d) {
  std::string out;
  for (std::size_t c = 0; c < d.cols(); ++c) {
    if (c) out += ',';
    out += d.names()[c];
  }
  if (d.has_target()) out += ',' + d.target_name();
  out += '\n';
  for (std::size_t r = 0; r < d.rows(); ++r) {
    auto row = d.features().row(r);
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out += ',';
      append_double(out, row[c]);
    }
    if (d.has_target()) {
      out += ',';
      append_double(out, d.target()[r]);
    }
    out += '\n';
  }
  return out;
}

inline void write_csv(const Dataset& d, const std::filesystem::path& path) { write_file_atomic(path, to_csv(d)); }

/// Per-column (min, max) of the data a scaling was fitted on.
struct ScalingSpec {
  std::vector<std::pair<double, double>> ranges;

  static ScalingSpec fit(const Matrix& m) {
    ScalingSpec s;
    s.ranges.resize(m.cols());
    for (std::size_t c = 0; c < m.cols(); ++c) {
      double lo = m.rows() ? m(0, c) : 0.0;
      double hi = lo;
      for (std::size_t r = 1; r < m.rows(); ++r) {
        lo = std::min(lo, m(r, c));
        hi = std::max(hi, m(r, c));
      }
      s.ranges[c] = {lo, hi};
    }
    return s;
  }

  // Constant columns map to 0.
  Matrix apply(const Matrix& m) const {
    Matrix out = m;
    for (std::size_t r = 0; r < m.rows(); ++r)
      for (std::size_t c = 0; c < m.cols(); ++c) {
        const auto [lo, hi] = ranges[c];
        out(r, c) = hi > lo ? (m(r, c) - lo) / (hi - lo) : 0.0;
      }
    return out;
  }

  Matrix invert(const Matrix& m) const {
    Matrix out = m;
    for (std::size_t r = 0; r < m.rows(); ++r)
      for (std::size_t c = 0; c < m.cols(); ++c) {
        const auto [lo, hi] = ranges[c];
        out(r, c) = lo + m(r, c) * (hi - lo);
      }
    return out;
  }

  bool operator==(const ScalingSpec&) const = default;
};

inline std::pair<Dataset, ScalingSpec> min_max_scale(const Dataset& d) {
  auto spec = ScalingSpec::fit(d.features());
  return {d.with_features(spec.apply(d.features())), std::move(spec)};
}

/// Seeded 0..n-1 permutation.
inline std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(perm));
  return perm;
}

/// The two sampling matrices. `permutation` is the full row shuffle; A holds
/// source rows permutation[0, n'), B holds permutation[n', 2n').
struct HalfSplit {
  Matrix a;
  Matrix b;
  std::vector<std::size_t> permutation;

  std::size_t half_rows() const noexcept { return a.rows(); }
};

/// Shuffles the feature rows (target is ignored) and cuts them into two
/// halves of floor(n/2) rows. With odd n the last shuffled row is dropped.
inline HalfSplit shuffle_split_halves(const Dataset& d, std::uint64_t seed) {
  const std::size_t n = d.rows();
  if (n < 4) throw Error(Stage::estimate, "need at least 4 rows to split into halves, got " + std::to_string(n));
  HalfSplit s;
  s.permutation = seeded_permutation(n, seed);
  const std::size_t half = n / 2;
  std::span<const std::size_t> perm(s.permutation);
  s.a = d.features().select_rows(perm.subspan(0, half));
  s.b = d.features().select_rows(perm.subspan(half, half));
  return s;
}

}  // namespace sensrank
