#pragma once

// Surrogate regressors: the trained function whose output variance is
// decomposed. Built-in kinds are ordinary least squares, k-nearest neighbours
// and a regression forest; anything else plugs in through the external
// command protocol (see ExternalModel).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <mutex>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sensrank/dataset.hpp"
#include "sensrank/error.hpp"
#include "sensrank/forest.hpp"
#include "sensrank/io.hpp"
#include "sensrank/matrix.hpp"
#include "sensrank/subprocess.hpp"

namespace sensrank {

enum class ModelKind { linear, knn, random_forest, external };

inline std::string_view to_string(ModelKind k) {
  switch (k) {
    case ModelKind::linear: return "linear";
    case ModelKind::knn: return "knn";
    case ModelKind::random_forest: return "random_forest";
    case ModelKind::external: return "external";
  }
  return "unknown";
}

inline std::optional<ModelKind> parse_model_kind(std::string_view s) {
  if (s == "linear" || s == "lr") return ModelKind::linear;
  if (s == "knn") return ModelKind::knn;
  if (s == "random_forest" || s == "rf") return ModelKind::random_forest;
  if (s == "external") return ModelKind::external;
  return std::nullopt;
}

struct PredictorSpec {
  ModelKind kind = ModelKind::random_forest;
  std::size_t knn_k = 5;
  std::size_t rf_trees = 10;
  std::size_t rf_min_leaf = 5;
  std::size_t rf_mtry = 0;  // 0 -> ceil(k / 3)
  std::string external_command;
  double holdout_fraction = 0.2;
  std::uint64_t seed = 0;

  void validate() const {
    if (knn_k == 0 || rf_trees == 0 || rf_min_leaf == 0)
      throw Error(Stage::fit, "model parameters must be positive");
    if (!(holdout_fraction > 0.0 && holdout_fraction <= 0.5))
      throw Error(Stage::fit, "holdout fraction must lie in (0, 0.5]");
    if (kind == ModelKind::external && external_command.empty())
      throw Error(Stage::fit, "external model requires a command");
  }

  bool operator==(const PredictorSpec&) const = default;
};

/// A trained function of k inputs. Implementations must be safe to call
/// concurrently and must return the same vector for the same matrix.
class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual std::size_t input_columns() const = 0;
  virtual std::vector<double> predict_rows(const Matrix& m) const = 0;
};

class LinearModel final : public Predictor {
 public:
  LinearModel(std::vector<double> weights, double intercept)
      : weights_(std::move(weights)), intercept_(intercept) {}

  // Least squares with intercept via the centred normal equations. If the
  // Gram matrix is singular or badly conditioned, a ridge of 1e-8 * trace / k
  // is added to its diagonal.
  static LinearModel fit(const Matrix& x, std::span<const double> y) {
    const auto n = static_cast<Eigen::Index>(x.rows());
    const auto k = static_cast<Eigen::Index>(x.cols());
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> xm(x.data().data(), n, k);
    Eigen::Map<const Eigen::VectorXd> ym(y.data(), n);
    const Eigen::RowVectorXd mean_x = xm.colwise().mean();
    const double mean_y = ym.mean();
    const Eigen::MatrixXd xc = xm.rowwise() - mean_x;
    const Eigen::VectorXd yc = ym.array() - mean_y;
    Eigen::MatrixXd gram = xc.transpose() * xc;
    const Eigen::VectorXd rhs = xc.transpose() * yc;

    Eigen::VectorXd w;
    Eigen::LLT<Eigen::MatrixXd> llt(gram);
    if (llt.info() == Eigen::Success && llt.rcond() > 1e-12) {
      w = llt.solve(rhs);
    } else {
      const double trace = gram.trace();
      const double ridge = 1e-8 * (trace > 0.0 ? trace / static_cast<double>(k) : 1.0);
      gram.diagonal().array() += ridge;
      Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
      if (ldlt.info() != Eigen::Success) throw Error(Stage::fit, "singular design matrix");
      w = ldlt.solve(rhs);
    }
    if (!w.allFinite()) throw Error(Stage::fit, "singular design matrix");
    std::vector<double> weights(w.data(), w.data() + w.size());
    return LinearModel(std::move(weights), mean_y - mean_x.dot(w));
  }

  std::size_t input_columns() const override { return weights_.size(); }

  std::vector<double> predict_rows(const Matrix& m) const override {
    std::vector<double> out(m.rows());
    for (std::size_t r = 0; r < m.rows(); ++r) {
      auto row = m.row(r);
      out[r] = std::inner_product(row.begin(), row.end(), weights_.begin(), intercept_);
    }
    return out;
  }

  const std::vector<double>& weights() const noexcept { return weights_; }
  double intercept() const noexcept { return intercept_; }

 private:
  std::vector<double> weights_;
  double intercept_;
};

/// Mean target of the k nearest training rows, Euclidean distance on features
/// min-max scaled with the training ranges. Distance ties go to the lower row.
class KnnModel final : public Predictor {
 public:
  static KnnModel fit(const Matrix& x, std::span<const double> y, std::size_t neighbours) {
    KnnModel m;
    m.scaling_ = ScalingSpec::fit(x);
    m.train_ = m.scaling_.apply(x);
    m.y_.assign(y.begin(), y.end());
    m.k_ = std::clamp<std::size_t>(neighbours, 1, x.rows());
    return m;
  }

  std::size_t input_columns() const override { return train_.cols(); }

  std::vector<double> predict_rows(const Matrix& m) const override {
    const Matrix q = scaling_.apply(m);
    std::vector<double> out(q.rows());
    std::vector<std::pair<double, std::size_t>> dist(train_.rows());
    for (std::size_t r = 0; r < q.rows(); ++r) {
      auto qr = q.row(r);
      for (std::size_t t = 0; t < train_.rows(); ++t) {
        auto tr = train_.row(t);
        double d = 0.0;
        for (std::size_t c = 0; c < qr.size(); ++c) d += (qr[c] - tr[c]) * (qr[c] - tr[c]);
        dist[t] = {d, t};
      }
      std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k_), dist.end());
      double s = 0.0;
      for (std::size_t j = 0; j < k_; ++j) s += y_[dist[j].second];
      out[r] = s / static_cast<double>(k_);
    }
    return out;
  }

  std::size_t neighbours() const noexcept { return k_; }

 private:
  KnnModel() = default;
  ScalingSpec scaling_;
  Matrix train_;
  std::vector<double> y_;
  std::size_t k_ = 1;
};

class ForestModel final : public Predictor {
 public:
  explicit ForestModel(RandomForest forest) : forest_(std::move(forest)) {}
  std::size_t input_columns() const override { return forest_.input_columns(); }
  std::vector<double> predict_rows(const Matrix& m) const override { return forest_.predict(m); }
  const RandomForest& forest() const noexcept { return forest_; }

 private:
  RandomForest forest_;
};

/// Serializes rows as header-less CSV, one row per line, shortest round-trip
/// decimals. `mode` becomes the first line ("#fit" or "#predict").
inline std::string encode_payload(std::string_view mode, const Matrix& m, const std::vector<double>* target = nullptr) {
  std::string out;
  out.reserve(m.rows() * (m.cols() + 1) * 20 + 16);
  out += mode;
  out += '\n';
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out += ',';
      append_double(out, row[c]);
    }
    if (target) {
      out += ',';
      append_double(out, (*target)[r]);
    }
    out += '\n';
  }
  return out;
}

/// Parses exactly `expected` lines, each holding one finite decimal.
inline std::vector<double> decode_predictions(std::string_view text, std::size_t expected) {
  auto lines = detail::split_lines(text);
  if (lines.size() != expected)
    throw Error(Stage::estimate, "external model returned " + std::to_string(lines.size()) + " lines, expected " +
                                     std::to_string(expected));
  std::vector<double> out(expected);
  for (std::size_t i = 0; i < expected; ++i) {
    const auto v = parse_double(lines[i]);
    if (!v)
      throw Error(Stage::estimate, "external model output line " + std::to_string(i + 1) + " is not a number: '" +
                                       std::string(lines[i]) + "'");
    out[i] = *v;
  }
  return out;
}

// A separate process that owns the real model. Each call launches the command
// once; calls are serialized so at most one process runs at a time.
//   fit:     stdin "#fit\n" + rows with the target appended; exit code 0.
//   predict: stdin "#predict\n" + rows; stdout one prediction per row; exit 0.
class ExternalModel final : public Predictor {
 public:
  ExternalModel(std::string command, std::size_t k) : command_(std::move(command)), k_(k) {}

  void train(const Matrix& x, const std::vector<double>& y) const {
    std::lock_guard lock(mutex_);
    const auto res = run_shell(command_, encode_payload("#fit", x, &y));
    check_exit(res, Stage::fit, "fit");
  }

  std::size_t input_columns() const override { return k_; }

  std::vector<double> predict_rows(const Matrix& m) const override {
    std::lock_guard lock(mutex_);
    const auto res = run_shell(command_, encode_payload("#predict", m));
    check_exit(res, Stage::estimate, "predict");
    return decode_predictions(res.out, m.rows());
  }

  const std::string& command() const noexcept { return command_; }

 private:
  void check_exit(const ProcessResult& res, Stage stage, const char* what) const {
    if (res.exit_code == 0) return;
    if (res.exit_code == 127) throw Error(stage, "external command not found: " + command_);
    throw Error(stage, std::string("external model ") + what + " exited with code " + std::to_string(res.exit_code));
  }

  std::string command_;
  std::size_t k_;
  mutable std::mutex mutex_;
};

/// Shared handle to a trained model plus its holdout error.
class FittedPredictor {
 public:
  FittedPredictor(std::shared_ptr<const Predictor> model, double holdout_mae)
      : model_(std::move(model)), holdout_mae_(holdout_mae) {}

  std::size_t k_expected() const { return model_->input_columns(); }
  double holdout_mae() const noexcept { return holdout_mae_; }
  const Predictor& model() const noexcept { return *model_; }

  std::vector<double> predict(const Matrix& m) const {
    if (m.cols() != k_expected())
      throw Error(Stage::estimate, "predict: matrix has " + std::to_string(m.cols()) + " columns, model expects " +
                                       std::to_string(k_expected()));
    if (m.rows() == 0) return {};
    for (double v : m.data())
      if (!std::isfinite(v)) throw Error(Stage::estimate, "predict: non-finite input");
    auto out = model_->predict_rows(m);
    if (out.size() != m.rows()) throw Error(Stage::estimate, "predict: wrong output length");
    for (double v : out)
      if (!std::isfinite(v)) throw Error(Stage::estimate, "predict: model produced a non-finite value");
    return out;
  }

 private:
  std::shared_ptr<const Predictor> model_;
  double holdout_mae_;
};

namespace detail {

inline std::shared_ptr<const Predictor> train_model(const PredictorSpec& spec, const Matrix& x,
                                                    const std::vector<double>& y) {
  switch (spec.kind) {
    case ModelKind::linear: return std::make_shared<LinearModel>(LinearModel::fit(x, y));
    case ModelKind::knn: return std::make_shared<KnnModel>(KnnModel::fit(x, y, spec.knn_k));
    case ModelKind::random_forest: {
      ForestParams p{spec.rf_trees, spec.rf_min_leaf, spec.rf_mtry};
      return std::make_shared<ForestModel>(RandomForest::fit(x, y, p, spec.seed));
    }
    case ModelKind::external: {
      auto m = std::make_shared<ExternalModel>(spec.external_command, x.cols());
      m->train(x, y);
      return m;
    }
  }
  throw Error(Stage::fit, "unknown model kind");
}

}  // namespace detail

inline double mean_absolute_error(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return a.empty() ? 0.0 : s / static_cast<double>(a.size());
}

/// Trains on a seeded holdout split to measure MAE, then refits on every row.
/// External models additionally get a one-row predict handshake.
inline FittedPredictor fit(const PredictorSpec& spec, const Dataset& d) {
  spec.validate();
  if (!d.has_target()) throw Error(Stage::fit, "dataset has no target column");
  const std::size_t n = d.rows();
  if (spec.kind != ModelKind::external && n < 10)
    throw Error(Stage::fit, "need at least 10 rows to fit, got " + std::to_string(n));
  if (n < 2) throw Error(Stage::fit, "need at least 2 rows to fit");

  const auto perm = seeded_permutation(n, derive_seed(spec.seed, 0x401d));
  const auto holdout = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(spec.holdout_fraction * static_cast<double>(n))), 1, n - 1);
  std::span<const std::size_t> p(perm);
  const Dataset test = d.select_rows(p.subspan(0, holdout));
  const Dataset train = d.select_rows(p.subspan(holdout));

  double mae = 0.0;
  {
    const FittedPredictor partial(detail::train_model(spec, train.features(), train.target()), 0.0);
    mae = mean_absolute_error(partial.predict(test.features()), test.target());
  }
  FittedPredictor full(detail::train_model(spec, d.features(), d.target()), mae);
  if (spec.kind == ModelKind::external) {
    const std::size_t first = 0;
    (void)full.predict(d.features().select_rows(std::span<const std::size_t>(&first, 1)));
  }
  return full;
}

}  // namespace sensrank
