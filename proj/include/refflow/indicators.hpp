#pragma once

// Self-referentiality shares, self-impact, received-from-within shares and
// outlet-type shares, all as exact quotients of cube marginals.

#include <array>
#include <cstdint>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "refflow/classify.hpp"
#include "refflow/csv.hpp"
#include "refflow/cube.hpp"
#include "refflow/error.hpp"
#include "refflow/ratio.hpp"

namespace refflow {

enum class Granularity { field, cluster, journal };

inline std::string_view to_string(Granularity g) {
  switch (g) {
    case Granularity::field: return "field";
    case Granularity::cluster: return "cluster";
    case Granularity::journal: return "journal";
  }
  return "";
}

inline Granularity parse_granularity(std::string_view s) {
  if (s == "field") return Granularity::field;
  if (s == "cluster") return Granularity::cluster;
  if (s == "journal") return Granularity::journal;
  throw UsageError("unknown granularity '" + std::string(s) + "'");
}

// Which references make up a scope's reference total.
enum class Denominator { all_outlets, journal_only };

inline std::string_view to_string(Denominator d) {
  return d == Denominator::all_outlets ? "all_outlets" : "journal_only";
}

inline constexpr std::string_view kFieldScope = "FIELD";

struct IndicatorOptions {
  Denominator denominator = Denominator::all_outlets;
};

struct IndicatorRow {
  std::string scheme;
  std::string period;
  Granularity granularity = Granularity::field;
  std::string scope;
  IndicatorType type = IndicatorType::journal_self;
  std::uint64_t S = 0;
  std::uint64_t R = 0;
  Ratio I;
};

struct SelfImpactRow {
  std::string scheme;
  std::string period;
  Granularity granularity = Granularity::cluster;
  std::string scope;
  std::uint64_t SC = 0;
  std::uint64_t C = 0;
  Ratio SI;

  // Share of received citations that come from other scopes.
  Ratio external_influence() const { return Ratio(1) - SI; }
};

struct OutletShareRow {
  std::string period;
  OutletType outlet = OutletType::journal;
  std::uint64_t citations = 0;
  Ratio share;
};

struct SidecarEntry {
  std::string scope;
  std::string reason;
};

namespace detail {

inline ClusterId parse_cluster_scope(std::string_view scope) { return parse_int(scope, "cluster scope"); }

inline const ScopeTally* find_scope(const PeriodTallies& t, Granularity g, std::string_view scope) {
  switch (g) {
    case Granularity::field: return &t.field;
    case Granularity::cluster: {
      auto it = t.clusters.find(parse_cluster_scope(scope));
      return it == t.clusters.end() ? nullptr : &it->second;
    }
    case Granularity::journal: {
      auto it = t.journals.find(std::string(scope));
      return it == t.journals.end() ? nullptr : &it->second;
    }
  }
  return nullptr;
}

inline void check_scope(const CountsCube& cube, Granularity g, std::string_view scope) {
  if (g == Granularity::field && scope != kFieldScope) {
    throw DataError("field granularity takes scope '" + std::string(kFieldScope) + "'");
  }
  if (g == Granularity::cluster) {
    const auto id = parse_cluster_scope(scope);
    auto it = cube.meta().clusters.find(id);
    if (it == cube.meta().clusters.end() || !it->second.admitted) {
      throw DataError("cluster " + std::string(scope) + " is not an admitted cluster");
    }
  }
}

inline std::uint64_t denominator_of(const ScopeTally& s, Denominator d) {
  return d == Denominator::all_outlets ? s.refs_all : s.refs_journal;
}

}  // namespace detail

inline IndicatorRow self_ref_share(const CountsCube& cube, std::string_view view, Granularity g,
                                   std::string_view scope, IndicatorType t, std::string_view period,
                                   IndicatorOptions opts = {}) {
  detail::check_scope(cube, g, scope);
  const auto& tallies = cube.tallies(view, period);
  const ScopeTally* s = detail::find_scope(tallies, g, scope);
  const std::uint64_t R = s ? detail::denominator_of(*s, opts.denominator) : 0;
  if (R == 0) {
    throw DataError("no references in scope " + std::string(to_string(g)) + ":" + std::string(scope) +
                    " for period '" + std::string(period) + "'");
  }
  const std::uint64_t S = s->numerator(t);
  return IndicatorRow{cube.view(view).id, std::string(period), g, std::string(scope), t, S, R,
                      Ratio::of_counts(S, R)};
}

// Self-citations received / all citations received from the citing set.
inline SelfImpactRow self_impact(const CountsCube& cube, std::string_view view, Granularity g,
                                 std::string_view scope, std::string_view period) {
  if (g == Granularity::field) throw DataError("self-impact is defined for cluster and journal scopes only");
  detail::check_scope(cube, g, scope);
  const auto& t = cube.tallies(view, period);
  const ReceivedTally* r = nullptr;
  if (g == Granularity::cluster) {
    auto it = t.cluster_received.find(detail::parse_cluster_scope(scope));
    if (it != t.cluster_received.end()) r = &it->second;
  } else {
    auto it = t.journal_received.find(std::string(scope));
    if (it != t.journal_received.end()) r = &it->second;
  }
  if (!r || r->total == 0) {
    throw DataError(std::string(to_string(g)) + ":" + std::string(scope) + " never cited within corpus in period '" +
                    std::string(period) + "'");
  }
  return SelfImpactRow{cube.view(view).id, std::string(period), g, std::string(scope), r->from_self, r->total,
                       Ratio::of_counts(r->from_self, r->total)};
}

// Citations a journal receives from journals of its own cluster (itself
// included) over all citations it receives from the citing set.
inline Ratio received_within_cluster_share(const CountsCube& cube, std::string_view view, std::string_view journal,
                                           std::string_view period) {
  if (cube.admitted_cluster(journal) == kNoCluster) {
    throw DataError("journal '" + std::string(journal) + "' has no cluster");
  }
  const auto& t = cube.tallies(view, period);
  auto it = t.journal_received.find(std::string(journal));
  if (it == t.journal_received.end() || it->second.total == 0) {
    throw DataError("journal '" + std::string(journal) + "' never cited within corpus in period '" +
                    std::string(period) + "'");
  }
  return Ratio::of_counts(it->second.from_same_cluster, it->second.total);
}

// Outlet shares from raw per-type counts (journal, book, conference,
// repository). An empty period yields four zero shares.
inline std::vector<OutletShareRow> outlet_shares(const std::array<std::uint64_t, 4>& counts,
                                                 std::string_view period) {
  std::uint64_t total = 0;
  for (auto c : counts) total += c;
  std::vector<OutletShareRow> rows;
  for (auto t : kOutletTypes) {
    const auto c = counts[static_cast<std::size_t>(t)];
    rows.push_back({std::string(period), t, c, total == 0 ? Ratio() : Ratio::of_counts(c, total)});
  }
  return rows;
}

inline std::vector<OutletShareRow> outlet_shares(const CountsCube& cube, std::string_view view,
                                                 std::string_view period) {
  return outlet_shares(cube.tallies(view, period).field.outlets, period);
}

struct IndicatorTable {
  std::vector<IndicatorRow> rows;
  std::vector<SidecarEntry> sidecar;
};

// Candidate scopes of a granularity: the field, every admitted cluster
// (numeric order), or every active citing journal (lexicographic).
inline std::vector<std::string> candidate_scopes(const CountsCube& cube, std::string_view view, Granularity g,
                                                 std::string_view period) {
  switch (g) {
    case Granularity::field: return {std::string(kFieldScope)};
    case Granularity::cluster: {
      std::vector<std::string> out;
      for (auto id : cube.admitted_clusters()) out.push_back(std::to_string(id));
      return out;
    }
    case Granularity::journal: return cube.active_citing_journals(view, period);
  }
  return {};
}

inline IndicatorTable indicator_table(const CountsCube& cube, std::string_view view, Granularity g,
                                      std::string_view period, IndicatorOptions opts = {}) {
  IndicatorTable table;
  const auto& tallies = cube.tallies(view, period);
  for (const auto& scope : candidate_scopes(cube, view, g, period)) {
    const ScopeTally* s = detail::find_scope(tallies, g, scope);
    if (!s || detail::denominator_of(*s, opts.denominator) == 0) {
      table.sidecar.push_back({scope, "no references in scope"});
      continue;
    }
    for (auto t : kIndicatorTypes) table.rows.push_back(self_ref_share(cube, view, g, scope, t, period, opts));
  }
  return table;
}

struct SelfImpactTable {
  std::vector<SelfImpactRow> rows;
  std::vector<SidecarEntry> sidecar;
};

inline SelfImpactTable self_impact_table(const CountsCube& cube, std::string_view view, Granularity g,
                                         std::string_view period) {
  if (g == Granularity::field) throw DataError("self-impact is defined for cluster and journal scopes only");
  SelfImpactTable table;
  for (const auto& scope : candidate_scopes(cube, view, g, period)) {
    try {
      table.rows.push_back(self_impact(cube, view, g, scope, period));
    } catch (const DataError&) {
      table.sidecar.push_back({scope, "never cited within corpus"});
    }
  }
  return table;
}

struct ScatterPoint {
  std::string scope;
  Ratio x;
  Ratio y;
};

struct ScatterSet {
  std::vector<ScatterPoint> points;
  std::vector<SidecarEntry> sidecar;
};

// x = within-cluster reference share; y = share of received citations that
// come from within the scope's cluster (cluster self-impact for clusters,
// received_within_cluster_share for journals).
inline ScatterSet scatter_points(const CountsCube& cube, std::string_view view, Granularity g,
                                 std::string_view period, IndicatorOptions opts = {}) {
  if (g == Granularity::field) throw DataError("scatter points need cluster or journal granularity");
  ScatterSet out;
  const auto& t = cube.tallies(view, period);
  for (const auto& scope : candidate_scopes(cube, view, g, period)) {
    if (g == Granularity::journal && cube.admitted_cluster(scope) == kNoCluster) {
      out.sidecar.push_back({scope, "no cluster"});
      continue;
    }
    const ScopeTally* s = detail::find_scope(t, g, scope);
    if (!s || detail::denominator_of(*s, opts.denominator) == 0) {
      out.sidecar.push_back({scope, "no references in scope"});
      continue;
    }
    const auto x = self_ref_share(cube, view, g, scope, IndicatorType::within_cluster, period, opts).I;
    try {
      const Ratio y = g == Granularity::cluster ? self_impact(cube, view, g, scope, period).SI
                                                : received_within_cluster_share(cube, view, scope, period);
      out.points.push_back({scope, x, y});
    } catch (const DataError&) {
      out.sidecar.push_back({scope, "never cited within corpus"});
    }
  }
  return out;
}

// Journal knowledge-base profile: x = within-cluster share, y = within-field
// share, for every clustered active journal.
inline ScatterSet knowledge_base_points(const CountsCube& cube, std::string_view view, std::string_view period,
                                        IndicatorOptions opts = {}) {
  ScatterSet out;
  const auto& t = cube.tallies(view, period);
  for (const auto& scope : candidate_scopes(cube, view, Granularity::journal, period)) {
    if (cube.admitted_cluster(scope) == kNoCluster) {
      out.sidecar.push_back({scope, "no cluster"});
      continue;
    }
    const ScopeTally* s = detail::find_scope(t, Granularity::journal, scope);
    if (!s || detail::denominator_of(*s, opts.denominator) == 0) {
      out.sidecar.push_back({scope, "no references in scope"});
      continue;
    }
    out.points.push_back(
        {scope, self_ref_share(cube, view, Granularity::journal, scope, IndicatorType::within_cluster, period, opts).I,
         self_ref_share(cube, view, Granularity::journal, scope, IndicatorType::within_field, period, opts).I});
  }
  return out;
}

inline void write_indicator_csv(std::ostream& os, const std::vector<IndicatorRow>& rows) {
  csv::write_row(os, {"scheme", "period", "granularity", "scope", "type", "S", "R", "I"});
  for (const auto& r : rows) {
    csv::write_row(os, {r.scheme, r.period, std::string(to_string(r.granularity)), r.scope,
                        std::to_string(static_cast<int>(r.type)), std::to_string(r.S), std::to_string(r.R),
                        r.I.to_fixed(6)});
  }
}

inline void write_self_impact_csv(std::ostream& os, const std::vector<SelfImpactRow>& rows) {
  csv::write_row(os, {"scheme", "period", "granularity", "scope", "SC", "C", "SI"});
  for (const auto& r : rows) {
    csv::write_row(os, {r.scheme, r.period, std::string(to_string(r.granularity)), r.scope, std::to_string(r.SC),
                        std::to_string(r.C), r.SI.to_fixed(6)});
  }
}

}  // namespace refflow
