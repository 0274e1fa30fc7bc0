#pragma once

// Report serialization. JSON is the lossless canonical form; CSV and Markdown
// are projections for people and spreadsheets.

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sensrank/error.hpp"
#include "sensrank/estimators.hpp"
#include "sensrank/io.hpp"

namespace sensrank {

enum class ReportFormat { json, csv, markdown };
enum class IndexSelection { first, total, both };

inline std::optional<ReportFormat> parse_format(std::string_view s) {
  if (s == "json") return ReportFormat::json;
  if (s == "csv") return ReportFormat::csv;
  if (s == "markdown" || s == "md") return ReportFormat::markdown;
  return std::nullopt;
}

/// Picks the format from the file extension; JSON otherwise.
inline ReportFormat format_for_path(const std::filesystem::path& p) {
  const auto ext = p.extension().string();
  if (ext == ".csv") return ReportFormat::csv;
  if (ext == ".md" || ext == ".markdown") return ReportFormat::markdown;
  return ReportFormat::json;
}

inline std::optional<IndexSelection> parse_selection(std::string_view s) {
  if (s == "first") return IndexSelection::first;
  if (s == "total") return IndexSelection::total;
  if (s == "both") return IndexSelection::both;
  return std::nullopt;
}

inline void to_json(nlohmann::json& j, const FeatureSensitivity& f) {
  j = nlohmann::json{{"name", f.name},         {"S_i_raw", f.first_raw},   {"S_Ti_raw", f.total_raw},
                     {"S_i", f.first},         {"S_Ti", f.total},          {"S_i_se", f.first_se},
                     {"S_Ti_se", f.total_se},  {"rank_first", f.rank_first}, {"rank_total", f.rank_total}};
}

inline void from_json(const nlohmann::json& j, FeatureSensitivity& f) {
  j.at("name").get_to(f.name);
  j.at("S_i_raw").get_to(f.first_raw);
  j.at("S_Ti_raw").get_to(f.total_raw);
  j.at("S_i").get_to(f.first);
  j.at("S_Ti").get_to(f.total);
  j.at("S_i_se").get_to(f.first_se);
  j.at("S_Ti_se").get_to(f.total_se);
  j.at("rank_first").get_to(f.rank_first);
  j.at("rank_total").get_to(f.rank_total);
}

inline void to_json(nlohmann::json& j, const SensitivityReport& r) {
  j = nlohmann::json{{"features", r.features}, {"f0", r.f0},       {"V", r.variance},
                     {"n_half", r.n_half},     {"seed", r.seed},   {"model", r.model}};
  j["holdout_mae"] = r.holdout_mae ? nlohmann::json(*r.holdout_mae) : nlohmann::json(nullptr);
}

inline void from_json(const nlohmann::json& j, SensitivityReport& r) {
  j.at("features").get_to(r.features);
  j.at("f0").get_to(r.f0);
  j.at("V").get_to(r.variance);
  j.at("n_half").get_to(r.n_half);
  j.at("seed").get_to(r.seed);
  j.at("model").get_to(r.model);
  const auto& mae = j.at("holdout_mae");
  r.holdout_mae = mae.is_null() ? std::nullopt : std::optional<double>(mae.get<double>());
}

inline std::string report_to_json(const SensitivityReport& r) { return nlohmann::json(r).dump(2) + "\n"; }

inline SensitivityReport report_from_json(std::string_view text) {
  try {
    return nlohmann::json::parse(text).get<SensitivityReport>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(Stage::parse, std::string("malformed report: ") + e.what());
  }
}

inline std::string report_to_csv(const SensitivityReport& r, IndexSelection sel = IndexSelection::both) {
  std::string out = "name";
  if (sel != IndexSelection::total) out += ",S_i";
  if (sel != IndexSelection::first) out += ",S_Ti";
  if (sel != IndexSelection::total) out += ",rank_first";
  if (sel != IndexSelection::first) out += ",rank_total";
  out += '\n';
  for (const auto& f : r.features) {
    out += f.name;
    if (sel != IndexSelection::total) out += ',' + format_double(f.first);
    if (sel != IndexSelection::first) out += ',' + format_double(f.total);
    if (sel != IndexSelection::total) out += ',' + std::to_string(f.rank_first);
    if (sel != IndexSelection::first) out += ',' + std::to_string(f.rank_total);
    out += '\n';
  }
  return out;
}

namespace detail {

inline std::string fixed4(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

}  // namespace detail

/// Rows sorted by rank_total (rank_first when only first-order is selected).
inline std::string report_to_markdown(const SensitivityReport& r, IndexSelection sel = IndexSelection::both) {
  std::vector<std::size_t> order(r.features.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const bool by_first = sel == IndexSelection::first;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return by_first ? r.features[a].rank_first < r.features[b].rank_first
                    : r.features[a].rank_total < r.features[b].rank_total;
  });

  std::string out = "| Rank | Feature |";
  std::string rule = "|---:|---|";
  if (sel != IndexSelection::first) {
    out += " S_Ti | S_Ti (raw) |";
    rule += "---:|---:|";
  }
  if (sel != IndexSelection::total) {
    out += " S_i | S_i (raw) |";
    rule += "---:|---:|";
  }
  out += "\n" + rule + "\n";
  for (auto i : order) {
    const auto& f = r.features[i];
    out += "| " + std::to_string(by_first ? f.rank_first : f.rank_total) + " | " + f.name + " |";
    if (sel != IndexSelection::first) out += " " + detail::fixed4(f.total) + " | " + detail::fixed4(f.total_raw) + " |";
    if (sel != IndexSelection::total) out += " " + detail::fixed4(f.first) + " | " + detail::fixed4(f.first_raw) + " |";
    out += '\n';
  }
  out += "\nf0 = " + format_double(r.f0) + ", V = " + format_double(r.variance) +
         ", n' = " + std::to_string(r.n_half) + ", seed = " + std::to_string(r.seed);
  if (r.holdout_mae) out += ", holdout MAE = " + format_double(*r.holdout_mae);
  out += '\n';
  return out;
}

inline std::string render_report(const SensitivityReport& r, ReportFormat fmt,
                                 IndexSelection sel = IndexSelection::both) {
  switch (fmt) {
    case ReportFormat::json: return report_to_json(r);
    case ReportFormat::csv: return report_to_csv(r, sel);
    case ReportFormat::markdown: return report_to_markdown(r, sel);
  }
  return {};
}

inline void write_report(const SensitivityReport& r, ReportFormat fmt, const std::filesystem::path& path,
                         IndexSelection sel = IndexSelection::both) {
  write_file_atomic(path, render_report(r, fmt, sel));
}

inline SensitivityReport read_report(const std::filesystem::path& path) { return report_from_json(read_file(path)); }

// ---------------------------------------------------------------------------
// Method comparison: one row per method, one column per relevant feature.

struct ComparisonRow {
  std::string label;
  std::vector<std::size_t> ranks;  // rank of each relevant feature, in `relevant` order

  bool operator==(const ComparisonRow&) const = default;
};

struct ComparisonTable {
  std::vector<ComparisonRow> rows;
  std::vector<std::size_t> relevant;  // 0-based feature indices
  std::size_t k_total = 0;
  std::map<std::string, std::string> metadata;

  bool operator==(const ComparisonTable&) const = default;
};

struct MethodRanks {
  std::string label;
  std::vector<std::size_t> ranks;  // full length-k rank vector
};

inline ComparisonTable build_comparison(const std::vector<MethodRanks>& results, const std::vector<std::size_t>& relevant,
                                        std::map<std::string, std::string> metadata = {}) {
  if (relevant.empty()) throw Error(Stage::usage, "comparison needs at least one relevant feature");
  if (results.empty()) throw Error(Stage::usage, "comparison needs at least one method");
  const std::size_t k = results.front().ranks.size();
  ComparisonTable t;
  t.relevant = relevant;
  t.k_total = k;
  t.metadata = std::move(metadata);
  for (auto idx : relevant)
    if (idx >= k) throw Error(Stage::usage, "relevant feature index out of range");
  for (const auto& m : results) {
    if (m.ranks.size() != k) throw Error(Stage::usage, "methods disagree on the feature count");
    ComparisonRow row{m.label, {}};
    for (auto idx : relevant) {
      const auto r = m.ranks[idx];
      if (r < 1 || r > k) throw Error(Stage::usage, "rank outside 1..k in method " + m.label);
      row.ranks.push_back(r);
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

inline std::string comparison_to_json(const ComparisonTable& t) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : t.rows) rows.push_back({{"method", r.label}, {"ranks", r.ranks}});
  nlohmann::json j{{"relevant", t.relevant}, {"k_total", t.k_total}, {"metadata", t.metadata}, {"rows", rows}};
  return j.dump(2) + "\n";
}

inline ComparisonTable comparison_from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    ComparisonTable t;
    j.at("relevant").get_to(t.relevant);
    j.at("k_total").get_to(t.k_total);
    j.at("metadata").get_to(t.metadata);
    for (const auto& r : j.at("rows")) t.rows.push_back({r.at("method").get<std::string>(), r.at("ranks").get<std::vector<std::size_t>>()});
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Stage::parse, std::string("malformed comparison table: ") + e.what());
  }
}

/// Column headers are 1-based feature labels.
inline std::string comparison_to_markdown(const ComparisonTable& t) {
  std::string out;
  for (const auto& [key, value] : t.metadata) out += "- " + key + ": " + value + "\n";
  if (!t.metadata.empty()) out += "\n";
  out += "| Method |";
  for (auto idx : t.relevant) out += " " + std::to_string(idx + 1) + " |";
  out += "\n|---|";
  for (std::size_t i = 0; i < t.relevant.size(); ++i) out += "---:|";
  out += "\n";
  for (const auto& r : t.rows) {
    out += "| " + r.label + " |";
    for (auto v : r.ranks) out += " " + std::to_string(v) + " |";
    out += "\n";
  }
  return out;
}

inline void write_comparison(const ComparisonTable& t, const std::filesystem::path& path) {
  const bool md = format_for_path(path) == ReportFormat::markdown;
  write_file_atomic(path, md ? comparison_to_markdown(t) : comparison_to_json(t));
}

}  // namespace sensrank
