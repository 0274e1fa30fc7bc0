#pragma once

// Command implementations behind the `sensrank` tool. Argument parsing lives
// in tools/; everything here takes a filled RunConfig.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sensrank/baselines.hpp"
#include "sensrank/dataset.hpp"
#include "sensrank/error.hpp"
#include "sensrank/estimators.hpp"
#include "sensrank/io.hpp"
#include "sensrank/models.hpp"
#include "sensrank/oracle.hpp"
#include "sensrank/report.hpp"

namespace sensrank {

inline constexpr std::uint64_t kDefaultSeed = 42;

struct RunConfig {
  std::string command;  // rank | benchmark | oracle-check | generate

  std::filesystem::path input;
  std::filesystem::path output;
  std::optional<std::string> target;
  std::optional<ReportFormat> format;  // unset -> from output extension
  IndexSelection indices = IndexSelection::both;

  // surrogate model
  std::string model = "rf";
  std::string extern_cmd;
  std::size_t knn_k = 5;
  std::size_t rf_trees = 10;
  std::size_t rf_min_leaf = 5;
  std::size_t rf_mtry = 0;
  double holdout = 0.2;
  bool scale = false;

  // benchmark / generate / oracle-check
  std::string function;
  double noise = 0.0;
  std::optional<std::string> distribution;  // unset -> per-function default
  std::size_t n = 10000;
  std::size_t k = 0;  // 0 -> 20 for Friedman functions, relevant count otherwise
  std::vector<double> coefficients;
  std::vector<std::string> models{"true", "rf"};
  std::vector<std::string> rfe{"linear", "rf"};
  std::optional<std::filesystem::path> report_dir;

  std::size_t n_half = 65536;
  std::size_t oracle_outer = 2000;
  std::size_t oracle_inner = 2000;
  double tolerance = 0.02;

  std::uint64_t seed = kDefaultSeed;
  std::size_t workers = default_workers();
};

namespace detail {

inline PredictorSpec predictor_spec(const RunConfig& c, std::string_view model) {
  const auto kind = parse_model_kind(model);
  if (!kind) throw Error(Stage::usage, "unknown model '" + std::string(model) + "'");
  PredictorSpec spec;
  spec.kind = *kind;
  spec.knn_k = c.knn_k;
  spec.rf_trees = c.rf_trees;
  spec.rf_min_leaf = c.rf_min_leaf;
  spec.rf_mtry = c.rf_mtry;
  spec.external_command = c.extern_cmd;
  spec.holdout_fraction = c.holdout;
  spec.seed = c.seed;
  return spec;
}

inline BenchmarkSpec benchmark_spec(const RunConfig& c) {
  auto f = parse_function(c.function, c.coefficients, c.noise);
  if (!f) throw Error(Stage::usage, "unknown benchmark function '" + c.function + "'");
  BenchmarkSpec spec;
  spec.function = *f;
  spec.n = c.n;
  const bool friedman = f->kind == FunctionKind::friedman1 || f->kind == FunctionKind::friedman2;
  spec.k_total = c.k ? c.k : (friedman ? 20 : f->relevant_count());
  if (c.distribution) {
    auto d = parse_distribution(*c.distribution);
    if (!d) throw Error(Stage::usage, "unknown feature distribution '" + *c.distribution + "'");
    spec.distribution = *d;
  } else {
    spec.distribution = f->kind == FunctionKind::friedman2 ? FeatureDistribution::paper_ranges
                                                           : FeatureDistribution::uniform01;
  }
  spec.seed = c.seed;
  spec.validate();
  return spec;
}

inline std::string short_label(std::string_view model) {
  if (model == "linear" || model == "lr") return "LR";
  if (model == "random_forest" || model == "rf") return "RF";
  if (model == "knn") return "KNN";
  return std::string(model);
}

}  // namespace detail

/// Load, optionally scale, fit, estimate, write.
inline SensitivityReport run_rank(const RunConfig& c) {
  if (!c.target) throw Error(Stage::usage, "rank requires --target");
  if (c.input.empty() || c.output.empty()) throw Error(Stage::usage, "rank requires --input and --out");
  Dataset d = load_csv(c.input, ColumnRef(*c.target));
  if (c.scale) d = min_max_scale(d).first;
  const auto spec = detail::predictor_spec(c, c.model);
  auto report = evaluate_features(spec, d, c.seed, {c.workers});
  if (c.scale) report.model["scaled"] = "min-max";
  write_report(report, c.format.value_or(format_for_path(c.output)), c.output, c.indices);
  return report;
}

// Generates the benchmark data, ranks features with every requested model
// (S_Ti rows, plus S_i rows when first-order indices are selected) and runs
// the RFE baselines.
inline ComparisonTable run_benchmark(const RunConfig& c) {
  if (c.function != "friedman1" && c.function != "friedman2")
    throw Error(Stage::usage, "unknown benchmark '" + c.function + "' (expected friedman1 or friedman2)");
  if (c.output.empty()) throw Error(Stage::usage, "benchmark requires --out");
  const BenchmarkSpec bench = detail::benchmark_spec(c);
  const Dataset data = generate_dataset(bench);

  std::map<std::string, std::string> meta{
      {"benchmark", bench.function.name()},
      {"noise", format_double(bench.function.sigma)},
      {"distribution", std::string(to_string(bench.distribution))},
      {"n", std::to_string(bench.n)},
      {"k_total", std::to_string(bench.k_total)},
      {"seed", std::to_string(c.seed)},
  };
  std::vector<MethodRanks> methods;
  auto save = [&](const std::string& label, const SensitivityReport& r) {
    if (c.report_dir) {
      std::filesystem::create_directories(*c.report_dir);
      write_report(r, ReportFormat::json, *c.report_dir / (label + ".json"));
    }
  };

  for (const auto& m : c.models) {
    SensitivityReport r;
    std::string label;
    if (m == "true" || m == "true-noisy") {
      const bool noisy = m == "true-noisy";
      const auto model = true_function_predictor(bench.function, bench.k_total,
                                                 noisy ? std::optional<std::uint64_t>(c.seed) : std::nullopt);
      r = evaluate_predictor(model, data, c.seed, {c.workers});
      r.holdout_mae.reset();
      r.model = {{"kind", noisy ? "true_function_noisy" : "true_function"}, {"function", bench.function.name()}};
      label = m;
    } else {
      r = evaluate_features(detail::predictor_spec(c, m), data, c.seed, {c.workers});
      label = m;
      meta["holdout_mae:" + label] = format_double(*r.holdout_mae);
    }
    if (c.indices != IndexSelection::first) methods.push_back({"S_Ti-" + label, r.ranks_total()});
    if (c.indices != IndexSelection::total) methods.push_back({"S_i-" + label, r.ranks_first()});
    save(label, r);
  }
  for (const auto& e : c.rfe) {
    RfeEstimator est;
    if (e == "linear" || e == "lr") {
      est = RfeEstimator::linear;
    } else if (e == "rf" || e == "random_forest") {
      est = RfeEstimator::random_forest;
    } else {
      throw Error(Stage::usage, "unknown RFE estimator '" + e + "'");
    }
    ForestParams fp{c.rf_trees, c.rf_min_leaf, c.rf_mtry};
    methods.push_back({"RFE-" + detail::short_label(e), rfe(data, est, c.seed, fp).ranks});
  }
  if (methods.empty()) throw Error(Stage::usage, "benchmark needs at least one model or RFE estimator");

  std::vector<std::size_t> relevant(bench.function.relevant_count());
  std::iota(relevant.begin(), relevant.end(), std::size_t{0});
  auto table = build_comparison(methods, relevant, std::move(meta));
  write_comparison(table, c.output);
  return table;
}

struct OracleCheckFeature {
  std::string name;
  double first = 0.0, first_oracle = 0.0;
  double total = 0.0, total_oracle = 0.0;
};

struct OracleCheckResult {
  std::vector<OracleCheckFeature> features;
  double max_deviation = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

/// Pick-freeze indices with the analytic function as the model versus the
/// double-loop oracle on the same function and feature distribution.
inline OracleCheckResult run_oracle_check(const RunConfig& c) {
  if (c.output.empty()) throw Error(Stage::usage, "oracle-check requires --out");
  BenchmarkSpec bench = detail::benchmark_spec(c);
  bench.n = 2 * c.n_half;
  const Dataset data = generate_dataset(bench);
  const auto model = true_function_predictor(bench.function, bench.k_total,
                                             bench.function.sigma > 0 ? std::optional<std::uint64_t>(c.seed)
                                                                      : std::nullopt);
  const auto report = evaluate_predictor(model, data, c.seed, {c.workers});
  OracleBudget budget;
  budget.n_outer = c.oracle_outer;
  budget.n_inner = c.oracle_inner;
  budget.workers = c.workers;
  const auto truth = brute_force_indices(bench.function, bench, budget);

  OracleCheckResult res;
  res.tolerance = c.tolerance;
  for (std::size_t i = 0; i < bench.k_total; ++i) {
    const auto& f = report.features[i];
    res.features.push_back({f.name, f.first_raw, truth.first[i], f.total_raw, truth.total[i]});
    res.max_deviation = std::max({res.max_deviation, std::abs(f.first_raw - truth.first[i]),
                                  std::abs(f.total_raw - truth.total[i])});
  }
  res.pass = res.max_deviation <= c.tolerance;

  nlohmann::json j;
  j["function"] = bench.function.name();
  j["noise"] = bench.function.sigma;
  j["n_half"] = report.n_half;
  j["oracle_outer"] = budget.n_outer;
  j["oracle_inner"] = budget.n_inner;
  j["seed"] = c.seed;
  j["tolerance"] = res.tolerance;
  j["max_deviation"] = res.max_deviation;
  j["pass"] = res.pass;
  for (const auto& f : res.features) {
    j["features"].push_back({{"name", f.name},
                             {"S_i", f.first},
                             {"S_i_oracle", f.first_oracle},
                             {"S_i_deviation", std::abs(f.first - f.first_oracle)},
                             {"S_Ti", f.total},
                             {"S_Ti_oracle", f.total_oracle},
                             {"S_Ti_deviation", std::abs(f.total - f.total_oracle)}});
  }
  write_file_atomic(c.output, j.dump(2) + "\n");
  return res;
}

inline Dataset run_generate(const RunConfig& c) {
  if (c.output.empty()) throw Error(Stage::usage, "generate requires --out");
  const auto data = generate_dataset(detail::benchmark_spec(c));
  write_csv(data, c.output);
  return data;
}

}  // namespace sensrank
