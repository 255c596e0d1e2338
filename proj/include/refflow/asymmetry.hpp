#pragma once

// Reference Asymmetry matrices between clusters or journals.
//
//   ra[i][j] = flows[i][j] / totals[i] - flows[j][i] / totals[j]
//
// A negative entry means the row entity draws less on the column entity than
// the column entity draws on it, i.e. the row entity is a net exporter to it.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "refflow/csv.hpp"
#include "refflow/cube.hpp"
#include "refflow/error.hpp"
#include "refflow/indicators.hpp"
#include "refflow/ratio.hpp"
#include "refflow/version.hpp"

namespace refflow {

struct RAMatrix {
  std::string scheme;
  std::string period;
  Granularity granularity = Granularity::cluster;
  Denominator denominator = Denominator::journal_only;
  std::vector<std::string> entity_ids;
  std::vector<std::vector<std::uint64_t>> flows;
  std::vector<std::uint64_t> totals;
  std::vector<std::vector<Ratio>> ra;
  std::vector<SidecarEntry> excluded;

  std::size_t size() const noexcept { return entity_ids.size(); }
};

struct ExporterRanking {
  std::string entity_id;
  std::size_t negative_count = 0;
  double row_sum = 0.0;
  std::size_t rank = 0;
};

struct RAOptions {
  Denominator denominator = Denominator::journal_only;
};

namespace detail {

inline RAMatrix assemble_ra(std::vector<std::string> candidates, Granularity g, std::string scheme,
                            std::string period, Denominator d, const auto& total_of, const auto& flow_of) {
  RAMatrix m;
  m.scheme = std::move(scheme);
  m.period = std::move(period);
  m.granularity = g;
  m.denominator = d;
  for (auto& id : candidates) {
    const auto total = total_of(id);
    if (total == 0) {
      m.excluded.push_back({id, "no references in period"});
      continue;
    }
    m.entity_ids.push_back(std::move(id));
    m.totals.push_back(total);
  }
  const auto n = m.entity_ids.size();
  m.flows.assign(n, std::vector<std::uint64_t>(n, 0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) m.flows[i][j] = flow_of(m.entity_ids[i], m.entity_ids[j]);
  }
  m.ra.assign(n, std::vector<Ratio>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const Ratio v = Ratio::of_counts(m.flows[i][j], m.totals[i]) - Ratio::of_counts(m.flows[j][i], m.totals[j]);
      m.ra[i][j] = v;
      m.ra[j][i] = -v;
    }
  }
  return m;
}

}  // namespace detail

// Entities default to every admitted cluster (cluster granularity) or every
// active citing journal (journal granularity). Entities without references in
// the period are excluded and listed in `excluded`.
inline RAMatrix ra_matrix(const CountsCube& cube, std::string_view view, Granularity g,
                          const std::optional<std::vector<std::string>>& entity_filter, std::string_view period,
                          RAOptions opts = {}) {
  if (g == Granularity::field) throw DataError("RA matrices need cluster or journal granularity");
  const auto& t = cube.tallies(view, period);
  std::vector<std::string> candidates =
      entity_filter ? *entity_filter : candidate_scopes(cube, view, g, period);
  if (g == Granularity::cluster) {
    for (const auto& c : candidates) detail::check_scope(cube, g, c);
    std::sort(candidates.begin(), candidates.end(), [](const auto& a, const auto& b) {
      return detail::parse_cluster_scope(a) < detail::parse_cluster_scope(b);
    });
  } else {
    std::sort(candidates.begin(), candidates.end());
  }
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

  auto total_of = [&](const std::string& id) -> std::uint64_t {
    const ScopeTally* s = detail::find_scope(t, g, id);
    return s ? detail::denominator_of(*s, opts.denominator) : 0;
  };
  auto flow_of = [&](const std::string& a, const std::string& b) -> std::uint64_t {
    if (g == Granularity::cluster) {
      auto it = t.cluster_flows.find({detail::parse_cluster_scope(a), detail::parse_cluster_scope(b)});
      return it == t.cluster_flows.end() ? 0 : it->second;
    }
    auto it = t.journal_flows.find({a, b});
    return it == t.journal_flows.end() ? 0 : it->second;
  };
  return detail::assemble_ra(std::move(candidates), g, cube.view(view).id, std::string(period), opts.denominator,
                             total_of, flow_of);
}

// Journal-level matrix restricted to one cluster's journals.
inline RAMatrix within_cluster_ra(const CountsCube& cube, std::string_view view, ClusterId cluster,
                                  std::string_view period, RAOptions opts = {}) {
  detail::check_scope(cube, Granularity::cluster, std::to_string(cluster));
  auto m = ra_matrix(cube, view, Granularity::journal, cube.cluster_journals(cluster), period, opts);
  if (m.size() < 2) {
    throw DataError("degenerate matrix: cluster " + std::to_string(cluster) + " has fewer than 2 active journals");
  }
  return m;
}

// Journal-level matrix over the union of two clusters' journals.
inline RAMatrix cross_cluster_ra(const CountsCube& cube, std::string_view view, ClusterId a, ClusterId b,
                                 std::string_view period, RAOptions opts = {}) {
  detail::check_scope(cube, Granularity::cluster, std::to_string(a));
  detail::check_scope(cube, Granularity::cluster, std::to_string(b));
  auto ids = cube.cluster_journals(a);
  auto more = cube.cluster_journals(b);
  ids.insert(ids.end(), more.begin(), more.end());
  auto m = ra_matrix(cube, view, Granularity::journal, ids, period, opts);
  if (m.size() < 2) throw DataError("degenerate matrix: fewer than 2 active journals");
  return m;
}

// Orders entities by (negative_count desc, row_sum asc, entity id). Ids
// compare numerically for clusters and lexicographically for journals. An
// entity whose whole row is negative ranks first. Row sums are accumulated in
// id order, so the ranking does not depend on the matrix's row order.
inline std::vector<ExporterRanking> net_exporters(const RAMatrix& m) {
  auto id_less = [&](const std::string& a, const std::string& b) {
    if (m.granularity == Granularity::cluster) return detail::parse_cluster_scope(a) < detail::parse_cluster_scope(b);
    return a < b;
  };
  std::vector<std::size_t> order(m.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return id_less(m.entity_ids[a], m.entity_ids[b]); });

  std::vector<ExporterRanking> out;
  for (std::size_t i : order) {
    ExporterRanking r{m.entity_ids[i], 0, 0.0, 0};
    for (std::size_t j : order) {
      if (m.ra[i][j].sign() < 0) ++r.negative_count;
      r.row_sum += m.ra[i][j].to_double();
    }
    out.push_back(r);
  }
  std::stable_sort(out.begin(), out.end(), [](const ExporterRanking& a, const ExporterRanking& b) {
    if (a.negative_count != b.negative_count) return a.negative_count > b.negative_count;
    return a.row_sum < b.row_sum;
  });
  for (std::size_t k = 0; k < out.size(); ++k) out[k].rank = k + 1;
  return out;
}

// Long-format heatmap: every (row, col) pair, both triangles and diagonal.
inline void export_heatmap(const RAMatrix& m, std::ostream& os, bool with_metadata = true) {
  if (with_metadata) {
    os << "# engine=" << kEngineName << ' ' << kEngineVersion << '\n';
    os << "# scheme=" << m.scheme << '\n';
    os << "# denominator=" << to_string(m.denominator) << '\n';
    os << "# sign: negative ra = row entity is a net exporter to the column entity\n";
    for (const auto& e : m.excluded) os << "# excluded " << e.scope << ": " << e.reason << '\n';
  }
  csv::write_row(os, {"period", "granularity", "row_entity", "col_entity", "flow_ij", "flow_ji", "ra"});
  for (std::size_t i = 0; i < m.size(); ++i) {
    for (std::size_t j = 0; j < m.size(); ++j) {
      csv::write_row(os, {m.period, std::string(to_string(m.granularity)), m.entity_ids[i], m.entity_ids[j],
                          std::to_string(m.flows[i][j]), std::to_string(m.flows[j][i]), m.ra[i][j].to_fixed(6)});
    }
  }
}

inline void export_heatmap(const RAMatrix& m, const std::filesystem::path& out_path) {
  std::ofstream os(out_path, std::ios::binary);
  if (!os) throw DataError("cannot write " + out_path.string());
  export_heatmap(m, os);
  if (!os) throw DataError("write failed for " + out_path.string());
}

}  // namespace refflow
