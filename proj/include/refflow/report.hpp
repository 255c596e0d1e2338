#pragma once

// Report bundle: one CSV per exhibit family, assembled from stage outputs.
//
//   report/outlet_shares.csv            outlet-type shares per period
//   report/field_shares.csv             field-level indicators per period
//   report/indicator_distributions.csv  cluster and journal indicator values
//   report/boxplot_summaries.csv        Tukey summaries of those distributions
//   report/scatter_points.csv           scatter points, energy tests in the header
//   report/ra_heatmaps.csv              RA matrices in long format
//   report/scheme_tables.csv            journal counts and field shares per scheme

#include <filesystem>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "refflow/classify.hpp"
#include "refflow/outputs.hpp"
#include "refflow/registry.hpp"
#include "refflow/stats.hpp"

namespace refflow {

inline constexpr std::array<std::string_view, 7> kReportFiles = {
    "outlet_shares.csv",   "field_shares.csv",   "indicator_distributions.csv", "boxplot_summaries.csv",
    "scatter_points.csv", "ra_heatmaps.csv", "scheme_tables.csv"};

namespace detail {

struct Prerequisite {
  std::filesystem::path path;
  std::string_view stage;
};

inline Meta report_meta(std::string exhibit, const MetaTable& source) {
  Meta m{{"exhibit", std::move(exhibit)}};
  m.insert(m.end(), source.meta.begin(), source.meta.end());
  return m;
}

inline void copy_rows(std::ostream& os, const csv::Table& t) {
  csv::write_row(os, t.header());
  for (const auto& r : t.rows()) csv::write_row(os, r);
}

}  // namespace detail

inline std::vector<std::filesystem::path> emit_report_bundle(const std::filesystem::path& outputs_dir,
                                                             OutputLog* log = nullptr) {
  const std::vector<detail::Prerequisite> needed = {
      {outputs_dir / "indicators" / "outlet_shares.csv", "indicators"},
      {outputs_dir / "indicators" / "indicators.csv", "indicators"},
      {outputs_dir / "indicators" / "scatter_clusters.csv", "indicators"},
      {outputs_dir / "indicators" / "scatter_journals.csv", "indicators"},
      {outputs_dir / "indicators" / "knowledge_base.csv", "indicators"},
      {outputs_dir / "tests" / "energy.csv", "tests"},
      {outputs_dir / "asymmetry" / "ra.csv", "asymmetry"},
      {outputs_dir / "robustness" / "scheme_comparison.csv", "robustness"},
  };
  std::string missing;
  for (const auto& p : needed) {
    if (!std::filesystem::exists(p.path)) {
      missing += "\n  " + p.path.string() + " (run stage '" + std::string(p.stage) + "')";
    }
  }
  if (!missing.empty()) throw DataError("report prerequisites missing:" + missing);

  const auto dir = outputs_dir / "report";
  std::vector<std::filesystem::path> written;
  auto emit = [&](std::string_view name, const std::function<void(std::ostream&)>& body) {
    write_file(dir / name, body, log);
    written.push_back(dir / name);
  };

  const auto outlets = read_stage_output(needed[0].path, "indicators");
  emit("outlet_shares.csv", [&](std::ostream& os) {
    write_meta(os, detail::report_meta("outlet_shares", outlets));
    detail::copy_rows(os, outlets.table);
  });

  const auto ind = read_stage_output(needed[1].path, "indicators");
  const auto& t = ind.table;
  const auto c_period = t.require_column("period", "indicators");
  const auto c_gran = t.require_column("granularity", "indicators");
  const auto c_scope = t.require_column("scope", "indicators");
  const auto c_type = t.require_column("type", "indicators");
  const auto c_s = t.require_column("S", "indicators");
  const auto c_r = t.require_column("R", "indicators");
  const auto c_i = t.require_column("I", "indicators");
  auto type_name = [](const std::string& t) {
    const int v = parse_int(t, "indicator type");
    if (v < 1 || v > 4) throw DataError("indicator type out of range: " + t);
    return std::string(to_string(static_cast<IndicatorType>(v)));
  };

  emit("field_shares.csv", [&](std::ostream& os) {
    write_meta(os, detail::report_meta("field_shares", ind));
    csv::write_row(os, {"period", "type", "indicator", "S", "R", "share"});
    for (const auto& r : t.rows()) {
      if (r[c_gran] != "field") continue;
      csv::write_row(os, {r[c_period], r[c_type], type_name(r[c_type]), r[c_s], r[c_r], r[c_i]});
    }
  });

  emit("indicator_distributions.csv", [&](std::ostream& os) {
    write_meta(os, detail::report_meta("indicator_distributions", ind));
    csv::write_row(os, {"granularity", "period", "type", "indicator", "scope", "share"});
    for (const auto& r : t.rows()) {
      if (r[c_gran] == "field") continue;
      csv::write_row(os, {r[c_gran], r[c_period], r[c_type], type_name(r[c_type]), r[c_scope], r[c_i]});
    }
  });

  emit("boxplot_summaries.csv", [&](std::ostream& os) {
    // Groups keep first-appearance order, which follows the stage's period order.
    std::vector<std::tuple<std::string, std::string, std::string>> order;
    std::map<std::tuple<std::string, std::string, std::string>, std::pair<std::vector<double>, std::vector<std::string>>>
        groups;
    for (const auto& r : t.rows()) {
      if (r[c_gran] == "field") continue;
      const auto key = std::make_tuple(r[c_gran], r[c_period], r[c_type]);
      if (!groups.count(key)) order.push_back(key);
      auto& g = groups[key];
      const double R = std::stod(r[c_r]);
      g.first.push_back(std::stod(r[c_s]) / R);
      g.second.push_back(r[c_scope]);
    }
    write_meta(os, detail::report_meta("boxplot_summaries", ind));
    csv::write_row(os, {"granularity", "period", "type", "indicator", "n", "q1", "median", "q3", "lower_whisker",
                        "upper_whisker", "outliers"});
    for (const auto& key : order) {
      const auto& [values, scopes] = groups[key];
      const auto s = distribution_summary(values);
      std::string outliers;
      for (std::size_t i = 0; i < scopes.size(); ++i) {
        if (s.outlier[i]) outliers += (outliers.empty() ? "" : ";") + scopes[i];
      }
      const auto& [g, p, ty] = key;
      csv::write_row(os, {g, p, ty, type_name(ty), std::to_string(s.n), format_fixed(s.q1), format_fixed(s.median),
                          format_fixed(s.q3), format_fixed(s.lower_whisker), format_fixed(s.upper_whisker), outliers});
    }
  });

  const auto energy = read_stage_output(needed[5].path, "tests");
  emit("scatter_points.csv", [&](std::ostream& os) {
    const auto clusters = read_stage_output(needed[2].path, "indicators");
    Meta meta = detail::report_meta("scatter_points", clusters);
    for (const auto& [k, v] : energy.meta) {
      if (k == "permutations" || k == "seed") meta.emplace_back(k, v);
    }
    const auto& et = energy.table;
    const auto e_test = et.require_column("test", "energy");
    for (const auto& r : et.rows()) {
      std::string summary;
      for (std::size_t c = 0; c < et.header().size(); ++c) {
        if (c == e_test || r[c].empty()) continue;
        summary += (summary.empty() ? "" : " ") + et.header()[c] + ":" + r[c];
      }
      meta.emplace_back("energy_test_" + r[e_test], summary);
    }
    write_meta(os, meta);
    csv::write_row(os, {"figure", "period", "scope", "x", "y"});
    for (const auto& [figure, idx] :
         std::vector<std::pair<std::string, std::size_t>>{{"clusters", 2}, {"journals", 3}, {"knowledge_base", 4}}) {
      const auto src = read_stage_output(needed[idx].path, "indicators");
      for (const auto& r : src.table.rows()) {
        csv::Row row{figure};
        row.insert(row.end(), r.begin(), r.end());
        csv::write_row(os, row);
      }
    }
  });

  const auto ra = read_stage_output(needed[6].path, "asymmetry");
  emit("ra_heatmaps.csv", [&](std::ostream& os) {
    write_meta(os, detail::report_meta("ra_heatmaps", ra));
    detail::copy_rows(os, ra.table);
  });

  const auto schemes = read_stage_output(needed[7].path, "robustness");
  emit("scheme_tables.csv", [&](std::ostream& os) {
    write_meta(os, detail::report_meta("scheme_tables", schemes));
    detail::copy_rows(os, schemes.table);
  });
  return written;
}

}  // namespace refflow
