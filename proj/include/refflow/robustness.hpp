#pragma once

// Field-level indicators and journal counts under alternative definitions of
// the field (classification schemes).

#include <array>
#include <cstdint>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "refflow/corpus.hpp"
#include "refflow/csv.hpp"
#include "refflow/cube.hpp"
#include "refflow/indicators.hpp"
#include "refflow/registry.hpp"

namespace refflow {

struct SchemeComparisonRow {
  std::string scheme;
  std::string period;
  std::uint64_t citing_count = 0;
  std::uint64_t cited_count = 0;
  std::optional<std::array<IndicatorRow, 4>> indicators;
};

// citing_count: active citing journals that are scheme members.
// cited_count: journals cited at least once by the citing set (all registry
// journals, unfiltered) that are scheme members.
inline std::vector<SchemeComparisonRow> count_journals_by_scheme(const Registry& registry, const CorpusStore& store,
                                                                 std::string_view period_id,
                                                                 const std::vector<std::string>& schemes = {}) {
  store.period(period_id);
  const auto& ids = schemes.empty() ? registry.schemes() : schemes;
  std::set<std::string> citing;
  std::set<std::string> cited;
  for (const auto& w : store.works()) {
    if (w.period_id != period_id) continue;
    citing.insert(w.journal_id);
    for (const auto& ref : w.references) {
      const auto& v = store.resolve(ref);
      if (v.outlet == OutletType::journal && !v.journal_id.empty()) cited.insert(v.journal_id);
    }
  }
  std::vector<SchemeComparisonRow> rows;
  for (const auto& s : ids) {
    registry.require_scheme(s);
    SchemeComparisonRow row{s, std::string(period_id), 0, 0, std::nullopt};
    for (const auto& j : citing) row.citing_count += registry.is_member(s, j) ? 1 : 0;
    for (const auto& j : cited) row.cited_count += registry.is_member(s, j) ? 1 : 0;
    rows.push_back(std::move(row));
  }
  return rows;
}

// Same counts from the census carried by a cube, for a scheme view (citing
// side filtered by the citing scheme, cited side by the cited scheme).
inline SchemeComparisonRow count_journals_by_scheme(const CountsCube& cube, std::string_view view_id,
                                                    std::string_view period_id) {
  const auto& view = cube.view(view_id);
  cube.period(period_id);
  SchemeComparisonRow row{view.id, std::string(period_id), 0, 0, std::nullopt};
  auto it = cube.meta().census.find(std::string(period_id));
  if (it == cube.meta().census.end()) return row;
  for (const auto& [journal, entry] : it->second) {
    if (entry.works > 0 && cube.is_member(view.citing_scheme, journal)) ++row.citing_count;
    if (entry.citations_received > 0 && cube.is_member(view.cited_scheme, journal)) ++row.cited_count;
  }
  return row;
}

// The four field-level indicators under a scheme view. The view filters the
// citing journals and the cited-side membership together.
inline std::array<IndicatorRow, 4> field_indicators_by_scheme(const CountsCube& cube, std::string_view view_id,
                                                              std::string_view period_id,
                                                              IndicatorOptions opts = {}) {
  if (!cube.has_view(view_id)) throw DataError("unknown scheme '" + std::string(view_id) + "'");
  if (cube.active_citing_journals(view_id, period_id).empty()) {
    throw DataError("empty scheme: '" + std::string(view_id) + "' has no citing journals in period '" +
                    std::string(period_id) + "'");
  }
  std::array<IndicatorRow, 4> rows;
  for (std::size_t i = 0; i < 4; ++i) {
    rows[i] = self_ref_share(cube, view_id, Granularity::field, kFieldScope, kIndicatorTypes[i], period_id, opts);
  }
  return rows;
}

// Full comparison table: every view x period, counts plus indicators (left
// empty when a scheme has no citing journals or references in the period).
inline std::vector<SchemeComparisonRow> scheme_comparison(const CountsCube& cube,
                                                          const std::vector<std::string>& views,
                                                          IndicatorOptions opts = {}) {
  std::vector<SchemeComparisonRow> rows;
  for (const auto& v : views) {
    if (!cube.has_view(v)) throw DataError("unknown scheme '" + v + "'");
    for (const auto& p : cube.meta().periods) {
      auto row = count_journals_by_scheme(cube, v, p.window.id);
      try {
        row.indicators = field_indicators_by_scheme(cube, v, p.window.id, opts);
      } catch (const DataError&) {
        row.indicators.reset();
      }
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

inline void write_scheme_comparison_csv(std::ostream& os, const std::vector<SchemeComparisonRow>& rows) {
  csv::write_row(os, {"scheme", "period", "citing_count", "cited_count", "journal_self", "within_cluster",
                      "in_any_cluster", "within_field"});
  for (const auto& r : rows) {
    csv::Row out{r.scheme, r.period, std::to_string(r.citing_count), std::to_string(r.cited_count)};
    for (std::size_t i = 0; i < 4; ++i) out.push_back(r.indicators ? (*r.indicators)[i].I.to_fixed(6) : "");
    csv::write_row(os, out);
  }
}

}  // namespace refflow
