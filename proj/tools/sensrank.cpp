// sensrank: rank regression features by variance-based sensitivity indices.
//
//   sensrank rank --input d.csv --target y --model rf --out r.json
//   sensrank benchmark friedman2 --noise 0 --models true,rf --rfe linear,rf --out t.md
//   sensrank oracle-check additive --n-half 65536 --out check.json
//   sensrank generate friedman1 --n 500 --noise 1 --out f.csv
//
// Exit codes: 0 success, 1 oracle check failed, 2 usage error, 3 pipeline error.

#include <CLI11.hpp>

#include <cstring>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "sensrank/cli.hpp"

namespace {

using sensrank::RunConfig;

// Flat key=value file; '#' starts a comment. Keys are long option names.
std::map<std::string, std::string> read_config(const std::string& path) {
  std::map<std::string, std::string> out;
  const auto text = sensrank::read_file(path);
  for (auto line : sensrank::detail::split_lines(text)) {
    line = sensrank::trim(line);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw sensrank::Error(sensrank::Stage::usage, "config line without '=': " + std::string(line));
    out.emplace(std::string(sensrank::trim(line.substr(0, eq))), std::string(sensrank::trim(line.substr(eq + 1))));
  }
  return out;
}

std::string find_config_arg(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--config") == 0 && i + 1 < argc) return argv[i + 1];
    if (std::strncmp(argv[i], "--config=", 9) == 0) return argv[i] + 9;
  }
  return {};
}

void add_model_options(CLI::App* app, RunConfig& c) {
  app->add_option("--extern-cmd", c.extern_cmd, "Command implementing the external model protocol");
  app->add_option("--knn-k", c.knn_k, "Neighbours for the knn model")->check(CLI::PositiveNumber);
  app->add_option("--rf-trees", c.rf_trees, "Trees in the random forest")->check(CLI::PositiveNumber);
  app->add_option("--rf-min-leaf", c.rf_min_leaf, "Minimum samples per forest leaf")->check(CLI::PositiveNumber);
  app->add_option("--rf-mtry", c.rf_mtry, "Features tried per split (0 = ceil(k/3))");
  app->add_option("--holdout", c.holdout, "Holdout fraction for the reported MAE")->check(CLI::Range(0.0, 0.5));
}

void add_benchmark_options(CLI::App* app, RunConfig& c) {
  app->add_option("function", c.function, "Benchmark function")->required();
  app->add_option("--noise", c.noise, "Noise standard deviation sigma")->check(CLI::NonNegativeNumber);
  app->add_option_function<std::string>("--dist", [&c](const std::string& v) { c.distribution = v; },
                                        "Feature distribution: uniform, normal, paper_ranges");
  app->add_option("--n", c.n, "Number of generated rows");
  app->add_option("--k", c.k, "Total number of features (default 20 for Friedman functions)");
  app->add_option("--coef", c.coefficients, "Coefficients of the additive function")->delimiter(',');
}

void add_indices_option(CLI::App* app, RunConfig& c, const std::string& help) {
  app->add_option_function<std::string>("--indices", [&c](const std::string& v) {
    auto sel = sensrank::parse_selection(v);
    if (!sel) throw CLI::ValidationError("--indices", "expected first, total or both");
    c.indices = *sel;
  }, help);
}

}  // namespace

int main(int argc, char** argv) {
  RunConfig c;
  CLI::App app{"Rank regression features by variance-based sensitivity indices"};
  app.require_subcommand(1);
  app.add_option("--config", "Flat key=value file of option defaults");

  auto common = [&](CLI::App* sub) {
    sub->add_option("--seed", c.seed, "Random seed");
    sub->add_option("--out", c.output, "Output file")->required();
    sub->add_option("--workers", c.workers, "Worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--config", "Flat key=value file of option defaults");
  };

  auto* rank = app.add_subcommand("rank", "Rank the features of a CSV dataset");
  common(rank);
  rank->add_option("--input", c.input, "Input CSV")->required()->check(CLI::ExistingFile);
  rank->add_option_function<std::string>("--target", [&c](const std::string& v) { c.target = v; },
                                         "Target column name or 0-based index")->required();
  rank->add_option("--model", c.model, "linear, knn, rf or external");
  rank->add_flag("--scale", c.scale, "Min-max scale features before fitting");
  rank->add_option_function<std::string>("--format", [&c](const std::string& v) {
    c.format = sensrank::parse_format(v);
    if (!c.format) throw CLI::ValidationError("--format", "expected json, csv or markdown");
  }, "json, csv or markdown (default from extension)");
  add_indices_option(rank, c, "Indices in CSV/Markdown output: first, total or both");
  add_model_options(rank, c);

  auto* bench = app.add_subcommand("benchmark", "Compare ranking methods on a Friedman benchmark");
  common(bench);
  add_benchmark_options(bench, c);
  add_model_options(bench, c);
  bench->add_option("--models", c.models, "Models for sensitivity ranking (true, true-noisy, linear, knn, rf, external)")
      ->delimiter(',');
  bench->add_option("--rfe", c.rfe, "RFE baselines (linear, rf); pass '' for none")->delimiter(',');
  bench->add_option_function<std::string>("--report-dir", [&c](const std::string& v) { c.report_dir = v; },
                                          "Directory for per-method JSON reports");
  add_indices_option(bench, c, "Index rows in the table: first, total or both");

  auto* oracle = app.add_subcommand("oracle-check", "Compare pick-freeze indices with the double-loop oracle");
  common(oracle);
  add_benchmark_options(oracle, c);
  oracle->add_option("--n-half", c.n_half, "Rows per sampling half")->check(CLI::Range(2, 1 << 30));
  oracle->add_option("--outer", c.oracle_outer, "Oracle outer-loop draws");
  oracle->add_option("--inner", c.oracle_inner, "Oracle inner-loop draws");
  oracle->add_option("--tolerance", c.tolerance, "Maximum absolute deviation");

  auto* gen = app.add_subcommand("generate", "Write a synthetic benchmark dataset as CSV");
  common(gen);
  add_benchmark_options(gen, c);

  try {
    const auto cfg_path = find_config_arg(argc, argv);
    if (!cfg_path.empty()) {
      for (const auto& [key, value] : read_config(cfg_path)) {
        bool used = false;
        for (auto* sub : {rank, bench, oracle, gen}) {
          if (auto* opt = sub->get_option_no_throw("--" + key)) {
            opt->run_callback_for_default();
            opt->default_val(value);
            opt->required(false);
            used = true;
          }
        }
        if (!used) throw sensrank::Error(sensrank::Stage::usage, "unknown config key '" + key + "'");
      }
    }
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  } catch (const sensrank::Error& e) {
    std::cerr << "error [" << to_string(e.stage()) << "]: " << e.what() << "\n";
    return 2;
  }

  if (!c.rfe.empty() && c.rfe.size() == 1 && c.rfe.front().empty()) c.rfe.clear();

  try {
    if (rank->parsed()) {
      c.command = "rank";
      sensrank::run_rank(c);
    } else if (bench->parsed()) {
      c.command = "benchmark";
      sensrank::run_benchmark(c);
    } else if (oracle->parsed()) {
      c.command = "oracle-check";
      const auto res = sensrank::run_oracle_check(c);
      std::cout << (res.pass ? "PASS" : "FAIL") << " max deviation " << res.max_deviation << " (tolerance "
                << res.tolerance << ")\n";
      if (!res.pass) {
        for (const auto& f : res.features)
          std::cout << "  " << f.name << ": S_i " << f.first << " vs " << f.first_oracle << ", S_Ti " << f.total
                    << " vs " << f.total_oracle << "\n";
        return 1;
      }
    } else if (gen->parsed()) {
      c.command = "generate";
      sensrank::run_generate(c);
    }
  } catch (const sensrank::Error& e) {
    std::cerr << "error [" << to_string(e.stage()) << "]: " << e.what() << "\n";
    return e.stage() == sensrank::Stage::usage ? 2 : 3;
  } catch (const std::exception& e) {
    std::cerr << "error [internal]: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
