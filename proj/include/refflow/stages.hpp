#pragma once

// Pipeline stages. Each stage reads the previous stage's files from the
// output directory and writes its own, so any suffix of the pipeline can be
// re-run on its own.
//
//   fetch       raw/works/*.jsonl, raw/references.jsonl, raw/checkpoints/
//   ingest      store.jsonl, ingest_report.csv, ingest.log
//   cube        cube.csv
//   indicators  indicators/{indicators,self_impact,outlet_shares,scatter_clusters,
//               scatter_journals,knowledge_base,sidecar}.csv
//   asymmetry   asymmetry/{ra,exporters}.csv
//   tests       tests/{energy,points_clusters,points_knowledge_base}.csv
//   robustness  robustness/scheme_comparison.csv

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "refflow/asymmetry.hpp"
#include "refflow/corpus.hpp"
#include "refflow/cube.hpp"
#include "refflow/indicators.hpp"
#include "refflow/ingest_client.hpp"
#include "refflow/outputs.hpp"
#include "refflow/random.hpp"
#include "refflow/registry.hpp"
#include "refflow/robustness.hpp"
#include "refflow/stats.hpp"

namespace refflow {

inline constexpr std::array<std::string_view, 8> kStageOrder = {
    "fetch", "ingest", "cube", "indicators", "asymmetry", "tests", "robustness", "report"};

struct AnalysisSettings {
  std::string scheme = "econlit";
  std::optional<std::string> cited_scheme;
  std::vector<std::string> schemes = {"econlit", "truc", "openalex_econ"};
  bool journal_only_denominator = false;
  Denominator ra_denominator = Denominator::journal_only;
  std::uint64_t permutations = 9999;
  std::uint64_t seed = 0;
  unsigned threads = 1;

  std::string view_id() const {
    return cited_scheme && *cited_scheme != scheme ? SchemeView::mixed(scheme, *cited_scheme).id : scheme;
  }

  std::vector<SchemeView> views() const {
    std::vector<SchemeView> out;
    for (const auto& s : schemes) out.push_back(SchemeView::plain(s));
    if (cited_scheme && *cited_scheme != scheme) out.push_back(SchemeView::mixed(scheme, *cited_scheme));
    return out;
  }

  IndicatorOptions indicator_options() const {
    return {journal_only_denominator ? Denominator::journal_only : Denominator::all_outlets};
  }

  Meta meta() const {
    return {{"scheme", view_id()},
            {"journal_only_denominator", journal_only_denominator ? "true" : "false"},
            {"ra_denominator", std::string(to_string(ra_denominator))}};
  }
};

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Sub-seed for a named consumer of randomness, stable across runs and builds.
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view name) {
  return SplitMix64::mix(seed ^ fnv1a64(name));
}

inline std::vector<SchemeConfig> resolve_schemes(const std::filesystem::path& registry_csv,
                                                 const std::vector<std::string>& ids,
                                                 const std::map<std::string, std::filesystem::path>& lists) {
  std::set<std::string> columns;
  {
    std::ifstream in(registry_csv, std::ios::binary);
    if (!in) throw DataError("cannot open " + registry_csv.string());
    const auto table = csv::parse(in, registry_csv.string());
    columns.insert(table.header().begin(), table.header().end());
  }
  std::vector<SchemeConfig> out;
  for (const auto& id : ids) {
    SchemeConfig s{id, id, std::nullopt, ""};
    if (auto it = lists.find(id); it != lists.end()) {
      s.list_path = it->second;
      if (!columns.count(id)) s.column.reset();
    }
    out.push_back(std::move(s));
  }
  return out;
}

inline CountsCube load_cube(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("missing " + path.string() + ": run stage 'cube' first");
  return CountsCube::read(in);
}

inline CorpusStore load_store(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("missing " + path.string() + ": run stage 'ingest' first");
  return read_store(in);
}

inline std::vector<std::filesystem::path> sorted_files(const std::filesystem::path& dir, std::string_view ext) {
  std::vector<std::filesystem::path> out;
  if (!std::filesystem::is_directory(dir)) return out;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ext) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline void run_fetch_stage(const Registry& registry, const std::vector<PeriodWindow>& periods, FetchConfig config,
                            unsigned jobs, const std::filesystem::path& out, OutputLog* log,
                            TransportFactory transport = {}) {
  const auto raw = out / "raw";
  config.checkpoint_path = "checkpoints";
  std::vector<std::string> journals;
  for (const auto& j : registry.journals()) journals.push_back(j.id);
  try {
    fetch_all(journals, periods, config, raw, jobs, std::move(transport));
  } catch (...) {
    if (log) {
      for (const auto& dir : {raw / "works", raw / "checkpoints"}) {
        if (!std::filesystem::is_directory(dir)) continue;
        for (const auto& e : std::filesystem::directory_iterator(dir)) log->add(e.path());
      }
    }
    throw;
  }
  if (!log) return;
  std::vector<std::filesystem::path> files;
  for (const auto& dir : {raw / "works", raw / "checkpoints"}) {
    if (!std::filesystem::is_directory(dir)) continue;
    for (const auto& e : std::filesystem::directory_iterator(dir)) files.push_back(e.path());
  }
  for (const char* f : {"references.jsonl", "references.ids", "references.miss"}) {
    if (std::filesystem::exists(raw / f)) files.push_back(raw / f);
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) log->add(f);
}

inline void run_ingest_stage(const Registry& registry, const std::vector<PeriodWindow>& periods,
                             std::vector<std::filesystem::path> works, std::vector<std::filesystem::path> metadata,
                             const std::filesystem::path& out, OutputLog* log) {
  // Fetched snapshots, when present, join the configured inputs.
  for (const auto& f : sorted_files(out / "raw" / "works", ".jsonl")) works.push_back(f);
  if (std::filesystem::exists(out / "raw" / "references.jsonl")) metadata.push_back(out / "raw" / "references.jsonl");

  std::ostringstream diag;
  Ingestor ingestor(registry, periods, &diag);
  for (const auto& f : works) {
    std::ifstream in(f, std::ios::binary);
    if (!in) throw DataError("cannot open " + f.string());
    ingestor.add_works(in, f.filename().string());
  }
  for (const auto& f : metadata) {
    std::ifstream in(f, std::ios::binary);
    if (!in) throw DataError("cannot open " + f.string());
    ingestor.add_metadata(in, f.filename().string());
  }
  const auto store = std::move(ingestor).finish();
  write_file(out / "store.jsonl", [&](std::ostream& os) { write_store(os, store); }, log);
  write_file(out / "ingest.log", [&](std::ostream& os) { os << diag.str(); }, log);
  write_file(
      out / "ingest_report.csv",
      [&](std::ostream& os) {
        write_meta(os, {});
        csv::write_row(os, {"period", "metric", "value"});
        const auto& s = store.skips();
        for (const auto& [k, v] : std::vector<std::pair<std::string, std::uint64_t>>{
                 {"lines", s.lines},
                 {"malformed", s.malformed},
                 {"missing_journal", s.missing_journal},
                 {"missing_year", s.missing_year},
                 {"outside_windows", s.outside_windows},
                 {"not_in_registry", s.not_in_registry},
                 {"duplicate_works", s.duplicate_works}}) {
          csv::write_row(os, {"", k, std::to_string(v)});
        }
        for (const auto& p : store.periods()) {
          const auto& t = store.totals(p.id);
          csv::write_row(os, {p.id, "works", std::to_string(t.works)});
          csv::write_row(os, {p.id, "references", std::to_string(t.references)});
          csv::write_row(os, {p.id, "self_work_references", std::to_string(t.self_work_references)});
        }
      },
      log);
}

inline void run_cube_stage(const Registry& registry, const AnalysisSettings& settings,
                           const std::filesystem::path& out, OutputLog* log) {
  const auto store = load_store(out / "store.jsonl");
  const auto cube = build_counts_cube(store, registry, settings.views(), settings.threads);
  write_file(out / "cube.csv", [&](std::ostream& os) { cube.write(os); }, log);
}

inline void write_scatter(std::ostream& os, const std::vector<std::pair<std::string, ScatterSet>>& sets) {
  csv::write_row(os, {"period", "scope", "x", "y"});
  for (const auto& [period, set] : sets) {
    for (const auto& p : set.points) csv::write_row(os, {period, p.scope, p.x.to_fixed(6), p.y.to_fixed(6)});
  }
}

inline void run_indicators_stage(const AnalysisSettings& settings, const std::filesystem::path& out, OutputLog* log) {
  const auto cube = load_cube(out / "cube.csv");
  const auto view = settings.view_id();
  if (!cube.has_view(view)) throw DataError("cube has no view '" + view + "': re-run stage 'cube'");
  const auto opts = settings.indicator_options();
  const auto dir = out / "indicators";
  const auto meta = settings.meta();

  std::vector<IndicatorRow> rows;
  std::vector<SelfImpactRow> impacts;
  std::vector<std::array<std::string, 4>> sidecar;  // period, granularity, scope, reason
  std::vector<std::pair<std::string, ScatterSet>> clusters, journals, kb;
  for (const auto& p : cube.meta().periods) {
    const auto& pid = p.window.id;
    for (auto g : {Granularity::field, Granularity::cluster, Granularity::journal}) {
      auto t = indicator_table(cube, view, g, pid, opts);
      rows.insert(rows.end(), t.rows.begin(), t.rows.end());
      for (const auto& s : t.sidecar) sidecar.push_back({pid, std::string(to_string(g)), s.scope, s.reason});
      if (g == Granularity::field) continue;
      auto si = self_impact_table(cube, view, g, pid);
      impacts.insert(impacts.end(), si.rows.begin(), si.rows.end());
      for (const auto& s : si.sidecar) sidecar.push_back({pid, std::string(to_string(g)), s.scope, s.reason});
    }
    clusters.emplace_back(pid, scatter_points(cube, view, Granularity::cluster, pid, opts));
    journals.emplace_back(pid, scatter_points(cube, view, Granularity::journal, pid, opts));
    kb.emplace_back(pid, knowledge_base_points(cube, view, pid, opts));
  }

  write_file(dir / "indicators.csv", [&](std::ostream& os) { write_meta(os, meta); write_indicator_csv(os, rows); }, log);
  write_file(dir / "self_impact.csv", [&](std::ostream& os) { write_meta(os, meta); write_self_impact_csv(os, impacts); },
             log);
  write_file(
      dir / "outlet_shares.csv",
      [&](std::ostream& os) {
        write_meta(os, meta);
        csv::write_row(os, {"period", "outlet", "citations", "share"});
        for (const auto& p : cube.meta().periods) {
          for (const auto& r : outlet_shares(cube, view, p.window.id)) {
            csv::write_row(os, {r.period, std::string(to_string(r.outlet)), std::to_string(r.citations),
                                r.share.to_fixed(6)});
          }
        }
      },
      log);
  auto scatter_meta = [&](std::string x, std::string y) {
    auto m = meta;
    m.emplace_back("x", std::move(x));
    m.emplace_back("y", std::move(y));
    return m;
  };
  write_file(
      dir / "scatter_clusters.csv",
      [&](std::ostream& os) {
        write_meta(os, scatter_meta("within-cluster reference share", "cluster self-impact"));
        write_scatter(os, clusters);
      },
      log);
  write_file(
      dir / "scatter_journals.csv",
      [&](std::ostream& os) {
        write_meta(os, scatter_meta("within-cluster reference share", "share of citations received from own cluster"));
        write_scatter(os, journals);
      },
      log);
  write_file(
      dir / "knowledge_base.csv",
      [&](std::ostream& os) {
        write_meta(os, scatter_meta("within-cluster reference share", "within-field reference share"));
        write_scatter(os, kb);
      },
      log);
  write_file(
      dir / "sidecar.csv",
      [&](std::ostream& os) {
        write_meta(os, meta);
        csv::write_row(os, {"period", "granularity", "scope", "reason"});
        for (const auto& [p, g, s, r] : sidecar) csv::write_row(os, {p, g, s, r});
        for (const auto* sets : {&clusters, &journals, &kb}) {
          for (const auto& [p, set] : *sets) {
            for (const auto& s : set.sidecar) csv::write_row(os, {p, "scatter", s.scope, s.reason});
          }
        }
      },
      log);
}

inline void write_ra_rows(std::ostream& os, const std::string& matrix, const RAMatrix& m) {
  for (std::size_t i = 0; i < m.size(); ++i) {
    for (std::size_t j = 0; j < m.size(); ++j) {
      csv::write_row(os, {matrix, m.period, std::string(to_string(m.granularity)), m.entity_ids[i], m.entity_ids[j],
                          std::to_string(m.flows[i][j]), std::to_string(m.flows[j][i]), m.ra[i][j].to_fixed(6)});
    }
  }
}

inline void run_asymmetry_stage(const AnalysisSettings& settings, const std::filesystem::path& out, OutputLog* log) {
  const auto cube = load_cube(out / "cube.csv");
  const auto view = settings.view_id();
  if (!cube.has_view(view)) throw DataError("cube has no view '" + view + "': re-run stage 'cube'");
  const RAOptions opts{settings.ra_denominator};

  std::vector<std::pair<std::string, RAMatrix>> matrices;
  std::vector<std::array<std::string, 3>> skipped;  // matrix, period, reason
  for (const auto& p : cube.meta().periods) {
    const auto& pid = p.window.id;
    auto m = ra_matrix(cube, view, Granularity::cluster, std::nullopt, pid, opts);
    if (m.size() >= 2) {
      matrices.emplace_back("clusters", std::move(m));
    } else {
      skipped.push_back({"clusters", pid, "fewer than 2 clusters with references"});
    }
    for (auto c : cube.admitted_clusters()) {
      const auto name = "cluster:" + std::to_string(c);
      try {
        matrices.emplace_back(name, within_cluster_ra(cube, view, c, pid, opts));
      } catch (const DataError& e) {
        skipped.push_back({name, pid, e.what()});
      }
    }
  }
  auto meta = settings.meta();
  meta.emplace_back("sign", "negative ra means the row entity is a net exporter to the column entity");
  write_file(
      out / "asymmetry" / "ra.csv",
      [&](std::ostream& os) {
        write_meta(os, meta);
        for (const auto& [name, m] : matrices) {
          for (const auto& e : m.excluded) os << "# excluded " << name << ' ' << m.period << ' ' << e.scope << '\n';
        }
        for (const auto& [name, pid, reason] : skipped) os << "# skipped " << name << ' ' << pid << ": " << reason << '\n';
        csv::write_row(os, {"matrix", "period", "granularity", "row_entity", "col_entity", "flow_ij", "flow_ji", "ra"});
        for (const auto& [name, m] : matrices) write_ra_rows(os, name, m);
      },
      log);
  write_file(
      out / "asymmetry" / "exporters.csv",
      [&](std::ostream& os) {
        write_meta(os, meta);
        csv::write_row(os, {"matrix", "period", "rank", "entity", "negative_count", "row_sum"});
        for (const auto& [name, m] : matrices) {
          for (const auto& r : net_exporters(m)) {
            csv::write_row(os, {name, m.period, std::to_string(r.rank), r.entity_id, std::to_string(r.negative_count),
                                format_fixed(r.row_sum, 6)});
          }
        }
      },
      log);
}

struct NamedTest {
  std::string name;
  std::string points_file;
  std::vector<std::pair<std::string, ScatterSet>> sets;
};

inline std::vector<Sample> samples_of(const std::vector<std::pair<std::string, ScatterSet>>& sets) {
  std::vector<Sample> samples;
  for (const auto& [period, set] : sets) {
    if (set.points.empty()) continue;
    Sample s{period, {}};
    for (const auto& p : set.points) s.points.push_back({p.x.to_double(), p.y.to_double()});
    samples.push_back(std::move(s));
  }
  return samples;
}

// Two energy tests across periods: cluster scatter (within-cluster share vs
// self-impact) and journal knowledge base (within-cluster vs within-field).
inline void run_tests_stage(const AnalysisSettings& settings, const std::filesystem::path& out, OutputLog* log) {
  const auto cube = load_cube(out / "cube.csv");
  const auto view = settings.view_id();
  if (!cube.has_view(view)) throw DataError("cube has no view '" + view + "': re-run stage 'cube'");
  const auto opts = settings.indicator_options();

  std::vector<NamedTest> tests{{"clusters", "points_clusters.csv", {}}, {"knowledge_base", "points_knowledge_base.csv", {}}};
  for (const auto& p : cube.meta().periods) {
    tests[0].sets.emplace_back(p.window.id, scatter_points(cube, view, Granularity::cluster, p.window.id, opts));
    tests[1].sets.emplace_back(p.window.id, knowledge_base_points(cube, view, p.window.id, opts));
  }
  const auto base = derive_seed(settings.seed, "tests");
  auto meta = settings.meta();
  meta.emplace_back("permutations", std::to_string(settings.permutations));
  meta.emplace_back("seed", std::to_string(settings.seed));

  std::vector<csv::Row> results;
  for (const auto& t : tests) {
    // The exact points fed to the test, for auditing.
    write_file(
        out / "tests" / t.points_file,
        [&](std::ostream& os) {
          write_meta(os, meta);
          csv::write_row(os, {"scope", "period", "x", "y"});
          for (const auto& [period, set] : t.sets) {
            for (const auto& p : set.points) {
              csv::write_row(os, {p.scope, period, format_double(p.x.to_double()), format_double(p.y.to_double())});
            }
          }
        },
        log);
    const auto samples = samples_of(t.sets);
    std::size_t n = 0;
    std::string groups;
    for (const auto& s : samples) {
      n += s.points.size();
      groups += (groups.empty() ? "" : ";") + s.label;
    }
    const auto seed = derive_seed(base, t.name);
    if (samples.size() < 2) {
      results.push_back({t.name, groups, std::to_string(n), "", "", std::to_string(settings.permutations),
                         std::to_string(seed), "", "fewer than 2 nonempty groups"});
      continue;
    }
    const auto r = permutation_test(samples, settings.permutations, seed, settings.threads);
    results.push_back({t.name, groups, std::to_string(n), format_fixed(r.E, 6), format_fixed(r.p_value, 6),
                       std::to_string(r.n_permutations), std::to_string(r.seed),
                       std::to_string(r.at_least_as_extreme), ""});
  }
  write_file(
      out / "tests" / "energy.csv",
      [&](std::ostream& os) {
        write_meta(os, meta);
        csv::write_row(os, {"test", "groups", "n_points", "E", "p_value", "n_permutations", "seed",
                            "at_least_as_extreme", "note"});
        for (const auto& r : results) csv::write_row(os, r);
      },
      log);
}

inline void run_robustness_stage(const AnalysisSettings& settings, const std::filesystem::path& out, OutputLog* log) {
  const auto cube = load_cube(out / "cube.csv");
  std::vector<std::string> views;
  for (const auto& v : settings.views()) views.push_back(v.id);
  const auto rows = scheme_comparison(cube, views, settings.indicator_options());
  write_file(
      out / "robustness" / "scheme_comparison.csv",
      [&](std::ostream& os) {
        write_meta(os, settings.meta());
        write_scheme_comparison_csv(os, rows);
      },
      log);
}

}  // namespace refflow
