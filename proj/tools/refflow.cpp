// refflow command-line entry point.
//
// Exit codes: 0 ok, 1 usage, 2 data error, 3 network retries exhausted.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "refflow/pipeline.hpp"

namespace fs = std::filesystem;
using namespace refflow;

namespace {

struct RegistryArgs {
  std::string registry;
  std::string clusters;
  std::vector<std::string> schemes = {"econlit", "truc", "openalex_econ"};
  std::vector<std::string> scheme_lists;  // id=path
  std::size_t min_cluster_size = kDefaultMinClusterSize;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--registry", registry, "journal registry CSV")->required()->check(CLI::ExistingFile);
    cmd->add_option("--clusters", clusters, "cluster CSV")->required()->check(CLI::ExistingFile);
    cmd->add_option("--schemes", schemes, "classification schemes")->delimiter(',');
    cmd->add_option("--scheme-list", scheme_lists, "external membership list, as scheme=path");
    cmd->add_option("--min-cluster-size", min_cluster_size, "admission threshold for clusters")
        ->check(CLI::PositiveNumber);
  }

  Registry load() const {
    std::map<std::string, fs::path> lists;
    for (const auto& s : scheme_lists) {
      const auto eq = s.find('=');
      if (eq == std::string::npos || eq == 0) throw UsageError("--scheme-list expects scheme=path, got '" + s + "'");
      lists[s.substr(0, eq)] = s.substr(eq + 1);
    }
    return load_registry(registry, clusters, resolve_schemes(registry, schemes, lists),
                         Registry::Options{min_cluster_size});
  }
};

void write_output(const std::string& path, const std::function<void(std::ostream&)>& body) {
  if (path == "-") {
    body(std::cout);
  } else {
    write_file(path, body);
  }
}

void write_sidecar(const std::string& out, const std::vector<SidecarEntry>& entries) {
  if (entries.empty()) return;
  std::cerr << entries.size() << " scope(s) excluded";
  if (out != "-") {
    const auto path = out + ".sidecar.csv";
    write_file(path, [&](std::ostream& os) {
      csv::write_row(os, {"scope", "reason"});
      for (const auto& e : entries) csv::write_row(os, {e.scope, e.reason});
    });
    std::cerr << ", see " << path;
  }
  std::cerr << '\n';
}

std::string view_for(const CountsCube& cube, const std::string& scheme, const std::optional<std::string>& cited) {
  const auto id = cited && *cited != scheme ? SchemeView::mixed(scheme, *cited).id : scheme;
  if (!cube.has_view(id)) {
    std::string known;
    for (const auto& v : cube.meta().views) known += " " + v.id;
    throw UsageError("cube has no scheme view '" + id + "' (available:" + known + ")");
  }
  return id;
}

std::vector<std::string> registry_journal_ids(const fs::path& path) {
  const auto table = csv::read_file(path);
  const auto col = table.require_column("journal_id", path.string());
  std::vector<std::string> ids;
  for (const auto& r : table.rows()) ids.push_back(r[col]);
  return ids;
}

int run(int argc, char** argv) {
  CLI::App app{"refflow: citation-flow analytics engine"};
  app.set_version_flag("--version", std::string(kEngineName) + " " + std::string(kEngineVersion));
  app.require_subcommand(0, 1);
  std::string config_path;
  app.add_option("--config", config_path, "declarative run description (JSON)")->check(CLI::ExistingFile);

  std::string command_line;
  for (int i = 0; i < argc; ++i) command_line += (i ? " " : "") + std::string(argv[i]);

  // run
  auto* run_cmd = app.add_subcommand("run", "run the pipeline described by a config file");
  std::string run_config;
  run_cmd->add_option("--config", run_config, "config file")->required()->check(CLI::ExistingFile);

  // fetch
  auto* fetch = app.add_subcommand("fetch", "download works for every registry journal and period");
  std::string f_registry, f_periods, f_out, f_key_env = "REFFLOW_API_KEY";
  FetchConfig fcfg;
  unsigned f_jobs = 1;
  fetch->add_option("--registry", f_registry, "journal registry CSV")->required()->check(CLI::ExistingFile);
  fetch->add_option("--periods", f_periods, "period windows CSV")->required()->check(CLI::ExistingFile);
  fetch->add_option("--out", f_out, "snapshot directory")->required();
  fetch->add_option("--rps", fcfg.requests_per_second, "requests per second")->check(CLI::PositiveNumber);
  fetch->add_option("--api-key-env", f_key_env, "environment variable holding the API key");
  fetch->add_option("--base-url", fcfg.base_url, "API base URL");
  fetch->add_option("--page-size", fcfg.page_size, "results per page")->check(CLI::Range(1, 200));
  fetch->add_option("--max-retries", fcfg.max_retries, "retries per request")->check(CLI::NonNegativeNumber);
  fetch->add_option("--jobs", f_jobs, "concurrent journal streams")->check(CLI::PositiveNumber);

  // ingest
  auto* ingest = app.add_subcommand("ingest", "ingest works JSONL into a store snapshot");
  RegistryArgs i_reg;
  std::string i_periods, i_out;
  std::vector<std::string> i_works, i_meta;
  i_reg.add_to(ingest);
  ingest->add_option("--periods", i_periods, "period windows CSV")->required()->check(CLI::ExistingFile);
  ingest->add_option("--works", i_works, "citing works JSONL")->required()->check(CLI::ExistingFile);
  ingest->add_option("--metadata", i_meta, "cited-work metadata JSONL")->check(CLI::ExistingFile);
  ingest->add_option("--out", i_out, "store snapshot (JSONL)")->required();

  // cube
  auto* cube_cmd = app.add_subcommand("cube", "build the counts cube from a store snapshot");
  RegistryArgs c_reg;
  std::string c_store, c_out;
  std::optional<std::string> c_cited;
  unsigned c_threads = 1;
  c_reg.add_to(cube_cmd);
  cube_cmd->add_option("--store", c_store, "store snapshot")->required()->check(CLI::ExistingFile);
  cube_cmd->add_option("--cited-scheme", c_cited, "also build views with this cited-side scheme");
  cube_cmd->add_option("--threads", c_threads, "worker threads")->check(CLI::PositiveNumber);
  cube_cmd->add_option("--out", c_out, "cube snapshot")->required();

  // shared cube-query options
  struct Query {
    std::string cube, period, out = "-", scheme = "econlit";
    std::optional<std::string> cited;
    std::string granularity;
  };

  auto* ind = app.add_subcommand("indicators", "self-referentiality indicators");
  Query iq;
  bool i_journal_only = false, i_self_impact = false, i_outlets = false;
  ind->add_option("--cube", iq.cube, "cube snapshot")->required()->check(CLI::ExistingFile);
  ind->add_option("--granularity", iq.granularity, "field|cluster|journal")
      ->check(CLI::IsMember({"field", "cluster", "journal"}));
  ind->add_option("--period", iq.period, "period id")->required();
  ind->add_option("--scheme", iq.scheme, "citing-side scheme");
  ind->add_option("--cited-scheme", iq.cited, "cited-side scheme override");
  ind->add_flag("--journal-only-denominator", i_journal_only, "count only journal references in R");
  ind->add_flag("--self-impact", i_self_impact, "emit self-impact instead of reference shares");
  ind->add_flag("--outlet-shares", i_outlets, "emit outlet-type shares");
  ind->add_option("--out", iq.out, "output CSV ('-' for stdout)");

  auto* asym = app.add_subcommand("asymmetry", "reference asymmetry matrix");
  Query aq;
  aq.granularity = "cluster";
  std::optional<ClusterId> a_cluster;
  std::vector<ClusterId> a_cross;
  bool a_all_outlets = false;
  std::string a_exporters;
  asym->add_option("--cube", aq.cube, "cube snapshot")->required()->check(CLI::ExistingFile);
  asym->add_option("--granularity", aq.granularity, "cluster|journal")->check(CLI::IsMember({"cluster", "journal"}));
  auto* cl = asym->add_option("--cluster", a_cluster, "journals of one cluster");
  asym->add_option("--cross", a_cross, "journals of two clusters")->expected(2)->excludes(cl);
  asym->add_option("--period", aq.period, "period id")->required();
  asym->add_option("--scheme", aq.scheme, "citing-side scheme");
  asym->add_option("--cited-scheme", aq.cited, "cited-side scheme override");
  asym->add_flag("--all-outlets-denominator", a_all_outlets, "divide by all references, not journal references");
  asym->add_option("--exporters", a_exporters, "also write the net-exporter ranking here");
  asym->add_option("--out", aq.out, "output CSV ('-' for stdout)");

  auto* teq = app.add_subcommand("test-equality", "energy test for equal distributions across groups");
  std::string t_points, t_groups = "period", t_out = "-";
  std::uint64_t t_n = 9999, t_seed = 0;
  unsigned t_threads = 1;
  teq->add_option("--points", t_points, "CSV with scope,<group>,x,y")->required()->check(CLI::ExistingFile);
  teq->add_option("--groups", t_groups, "grouping column");
  teq->add_option("--n", t_n, "number of permutations")->check(CLI::PositiveNumber);
  teq->add_option("--seed", t_seed, "random seed");
  teq->add_option("--threads", t_threads, "worker threads")->check(CLI::PositiveNumber);
  teq->add_option("--out", t_out, "result CSV ('-' for stdout)");

  auto* rob = app.add_subcommand("robustness", "indicators under alternative schemes");
  std::string r_cube, r_out = "-";
  std::vector<std::string> r_schemes = {"econlit", "truc", "openalex_econ"};
  bool r_journal_only = false;
  rob->add_option("--cube", r_cube, "cube snapshot")->required()->check(CLI::ExistingFile);
  rob->add_option("--schemes", r_schemes, "scheme views to compare")->delimiter(',');
  rob->add_flag("--journal-only-denominator", r_journal_only, "count only journal references in R");
  rob->add_option("--out", r_out, "output CSV ('-' for stdout)");

  auto* rep = app.add_subcommand("report", "assemble the report bundle from stage outputs");
  std::string p_outputs;
  rep->add_option("--outputs", p_outputs, "pipeline output directory")->required()->check(CLI::ExistingDirectory);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  if (!config_path.empty() || run_cmd->parsed()) {
    const auto cfg = load_run_config(run_cmd->parsed() ? run_config : config_path);
    const auto m = run_pipeline(cfg, command_line);
    std::cerr << "pipeline " << m.status << ": " << m.outputs.size() << " files, manifest "
              << (cfg.out / "manifest.json").string() << '\n';
    return 0;
  }

  if (fetch->parsed()) {
    if (const char* key = std::getenv(f_key_env.c_str()); key && *key) fcfg.api_key = key;
    fcfg.checkpoint_path = "checkpoints";
    const auto summary = fetch_all(registry_journal_ids(f_registry), load_periods(f_periods), fcfg, f_out, f_jobs);
    std::cerr << "fetched " << summary.checkpoints.size() << " streams, " << summary.requests << " requests, "
              << summary.metadata.misses << " unresolved references\n";
  } else if (ingest->parsed()) {
    const auto registry = i_reg.load();
    Ingestor ingestor(registry, load_periods(i_periods), &std::cerr);
    for (const auto& f : i_works) {
      std::ifstream in(f, std::ios::binary);
      ingestor.add_works(in, f);
    }
    for (const auto& f : i_meta) {
      std::ifstream in(f, std::ios::binary);
      ingestor.add_metadata(in, f);
    }
    const auto store = std::move(ingestor).finish();
    write_output(i_out, [&](std::ostream& os) { write_store(os, store); });
    const auto& s = store.skips();
    std::cerr << "stored " << store.works().size() << " works; skipped: " << s.malformed << " malformed, "
              << s.missing_journal << " without journal, " << s.missing_year << " without year, "
              << s.outside_windows << " outside windows, " << s.not_in_registry << " not in registry, "
              << s.duplicate_works << " duplicates\n";
  } else if (cube_cmd->parsed()) {
    const auto registry = c_reg.load();
    std::ifstream in(c_store, std::ios::binary);
    const auto store = read_store(in);
    auto views = plain_views(registry);
    if (c_cited) {
      registry.require_scheme(*c_cited);
      for (const auto& s : registry.schemes()) {
        if (s != *c_cited) views.push_back(SchemeView::mixed(s, *c_cited));
      }
    }
    const auto cube = build_counts_cube(store, registry, views, c_threads);
    write_output(c_out, [&](std::ostream& os) { cube.write(os); });
  } else if (ind->parsed()) {
    const auto cube = load_cube(iq.cube);
    const auto view = view_for(cube, iq.scheme, iq.cited);
    const IndicatorOptions opts{i_journal_only ? Denominator::journal_only : Denominator::all_outlets};
    if (i_outlets) {
      write_output(iq.out, [&](std::ostream& os) {
        csv::write_row(os, {"period", "outlet", "citations", "share"});
        for (const auto& r : outlet_shares(cube, view, iq.period)) {
          csv::write_row(os, {r.period, std::string(to_string(r.outlet)), std::to_string(r.citations),
                              r.share.to_fixed(6)});
        }
      });
      return 0;
    }
    if (iq.granularity.empty()) throw UsageError("--granularity is required");
    const auto g = parse_granularity(iq.granularity);
    if (i_self_impact) {
      const auto t = self_impact_table(cube, view, g, iq.period);
      write_output(iq.out, [&](std::ostream& os) { write_self_impact_csv(os, t.rows); });
      write_sidecar(iq.out, t.sidecar);
    } else {
      const auto t = indicator_table(cube, view, g, iq.period, opts);
      write_output(iq.out, [&](std::ostream& os) { write_indicator_csv(os, t.rows); });
      write_sidecar(iq.out, t.sidecar);
    }
  } else if (asym->parsed()) {
    const auto cube = load_cube(aq.cube);
    const auto view = view_for(cube, aq.scheme, aq.cited);
    const RAOptions opts{a_all_outlets ? Denominator::all_outlets : Denominator::journal_only};
    RAMatrix m;
    if (a_cluster) {
      m = within_cluster_ra(cube, view, *a_cluster, aq.period, opts);
    } else if (!a_cross.empty()) {
      m = cross_cluster_ra(cube, view, a_cross[0], a_cross[1], aq.period, opts);
    } else {
      m = ra_matrix(cube, view, parse_granularity(aq.granularity), std::nullopt, aq.period, opts);
    }
    write_output(aq.out, [&](std::ostream& os) { export_heatmap(m, os); });
    if (!a_exporters.empty()) {
      write_output(a_exporters, [&](std::ostream& os) {
        csv::write_row(os, {"rank", "entity", "negative_count", "row_sum"});
        for (const auto& r : net_exporters(m)) {
          csv::write_row(os, {std::to_string(r.rank), r.entity_id, std::to_string(r.negative_count),
                              format_fixed(r.row_sum, 6)});
        }
      });
    }
  } else if (teq->parsed()) {
    std::ifstream in(t_points, std::ios::binary);
    const auto samples = read_point_groups(in, t_groups);
    // Log the exact point set behind the statistic.
    for (const auto& s : samples) {
      std::cerr << "group " << s.label << ": " << s.points.size() << " points\n";
      for (const auto& p : s.points) std::cerr << "  " << format_double(p[0]) << ',' << format_double(p[1]) << '\n';
    }
    const auto r = permutation_test(samples, t_n, t_seed, t_threads);
    write_output(t_out, [&](std::ostream& os) {
      csv::write_row(os, {"groups", "n_points", "E", "p_value", "n_permutations", "seed", "at_least_as_extreme"});
      std::size_t n = 0;
      for (const auto& s : samples) n += s.points.size();
      csv::write_row(os, {std::to_string(samples.size()), std::to_string(n), format_fixed(r.E, 6),
                          format_fixed(r.p_value, 6), std::to_string(r.n_permutations), std::to_string(r.seed),
                          std::to_string(r.at_least_as_extreme)});
    });
  } else if (rob->parsed()) {
    const auto cube = load_cube(r_cube);
    const auto rows = scheme_comparison(
        cube, r_schemes, {r_journal_only ? Denominator::journal_only : Denominator::all_outlets});
    write_output(r_out, [&](std::ostream& os) { write_scheme_comparison_csv(os, rows); });
  } else if (rep->parsed()) {
    for (const auto& f : emit_report_bundle(p_outputs)) std::cerr << "wrote " << f.string() << '\n';
  } else {
    std::cerr << app.help();
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const UsageError& e) {
    std::cerr << "refflow: " << e.what() << '\n';
    return 1;
  } catch (const NetworkExhausted& e) {
    std::cerr << "refflow: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "refflow: " << e.what() << '\n';
    return 2;
  }
}
