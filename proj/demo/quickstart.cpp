// Rank the features of a synthetic Friedman-1 dataset with a random forest
// surrogate and print the report as a Markdown table.

#include <iostream>

#include "sensrank/sensrank.hpp"

int main() {
  sensrank::BenchmarkSpec bench;
  bench.function = sensrank::AnalyticFunction::friedman1(/*sigma=*/1.0);
  bench.n = 4000;
  bench.k_total = 10;
  bench.seed = 7;
  const auto data = sensrank::generate_dataset(bench);

  sensrank::PredictorSpec model;
  model.kind = sensrank::ModelKind::random_forest;
  model.seed = 7;

  const auto report = sensrank::evaluate_features(model, data, /*seed=*/7);
  std::cout << sensrank::report_to_markdown(report);
}
