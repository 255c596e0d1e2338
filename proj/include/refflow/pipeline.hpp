#pragma once

// Declarative pipeline runs: JSON config -> pre-flight -> stages -> manifest.
//
// Config keys (paths relative to the config file):
//   registry, clusters, periods       required input files
//   works, metadata                   arrays of JSONL files (optional)
//   scheme_lists                      {scheme_id: id-list file}
//   schemes, scheme, cited_scheme     classification schemes and the active view
//   stages                            subset of fetch..report, run in pipeline order
//   out                               output directory (default "out")
//   seed, threads, permutations, min_cluster_size
//   journal_only_denominator          indicator denominator toggle
//   ra_denominator                    "journal_only" (default) or "all_outlets"
//   fetch                             {base_url, requests_per_second, page_size,
//                                      max_retries, jobs, api_key_env}

#include <fcntl.h>
#include <unistd.h>

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "refflow/digest.hpp"
#include "refflow/report.hpp"
#include "refflow/stages.hpp"

namespace refflow {

struct RunConfig {
  std::filesystem::path base_dir = ".";
  std::filesystem::path registry;
  std::filesystem::path clusters;
  std::filesystem::path periods;
  std::vector<std::filesystem::path> works;
  std::vector<std::filesystem::path> metadata;
  std::map<std::string, std::filesystem::path> scheme_lists;
  std::vector<std::string> stages;
  std::filesystem::path out = "out";
  std::size_t min_cluster_size = kDefaultMinClusterSize;
  AnalysisSettings analysis;
  FetchConfig fetch;
  unsigned fetch_jobs = 1;
  std::string api_key_env = "REFFLOW_API_KEY";
  nlohmann::json source;  // the config as given, for hashing

  bool has_stage(std::string_view s) const { return std::find(stages.begin(), stages.end(), s) != stages.end(); }
};

class ConfigError : public UsageError {
 public:
  explicit ConfigError(std::vector<std::string> violations)
      : UsageError(render(violations)), violations_(std::move(violations)) {}
  const std::vector<std::string>& violations() const noexcept { return violations_; }

 private:
  static std::string render(const std::vector<std::string>& v) {
    std::string msg = "invalid config (" + std::to_string(v.size()) + " problem" + (v.size() == 1 ? "" : "s") + "):";
    for (const auto& s : v) msg += "\n  - " + s;
    return msg;
  }
  std::vector<std::string> violations_;
};

// Parses and validates a config, collecting every violation before failing.
inline RunConfig parse_run_config(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  std::vector<std::string> bad;
  RunConfig c;
  c.base_dir = base_dir;
  c.source = j;
  if (!j.is_object()) throw ConfigError({"config must be a JSON object"});

  static const std::set<std::string> known = {
      "registry", "clusters", "periods", "works", "metadata", "scheme_lists", "schemes", "scheme",
      "cited_scheme", "stages", "out", "seed", "threads", "permutations", "min_cluster_size",
      "journal_only_denominator", "ra_denominator", "fetch"};
  for (const auto& [k, v] : j.items()) {
    if (!known.count(k)) bad.push_back("unknown key '" + k + "'");
  }
  auto resolve = [&](const std::string& p) {
    const std::filesystem::path path(p);
    return path.is_absolute() ? path : base_dir / path;
  };
  auto file = [&](const char* key, bool required) -> std::filesystem::path {
    if (!j.contains(key)) {
      if (required) bad.push_back("'" + std::string(key) + "' is required");
      return {};
    }
    if (!j[key].is_string()) {
      bad.push_back("'" + std::string(key) + "' must be a string path");
      return {};
    }
    auto p = resolve(j[key].get<std::string>());
    if (!std::filesystem::is_regular_file(p)) bad.push_back("'" + std::string(key) + "': file not found: " + p.string());
    return p;
  };
  auto files = [&](const char* key) {
    std::vector<std::filesystem::path> out;
    if (!j.contains(key)) return out;
    if (!j[key].is_array()) {
      bad.push_back("'" + std::string(key) + "' must be an array of paths");
      return out;
    }
    for (const auto& v : j[key]) {
      if (!v.is_string()) {
        bad.push_back("'" + std::string(key) + "' entries must be strings");
        continue;
      }
      auto p = resolve(v.get<std::string>());
      if (!std::filesystem::is_regular_file(p)) bad.push_back("'" + std::string(key) + "': file not found: " + p.string());
      out.push_back(p);
    }
    return out;
  };
  auto uint_field = [&](const nlohmann::json& obj, const char* key, std::uint64_t min, std::uint64_t fallback) {
    if (!obj.contains(key)) return fallback;
    if (!obj[key].is_number_unsigned() && !(obj[key].is_number_integer() && obj[key].get<std::int64_t>() >= 0)) {
      bad.push_back("'" + std::string(key) + "' must be a non-negative integer");
      return fallback;
    }
    const auto v = obj[key].get<std::uint64_t>();
    if (v < min) bad.push_back("'" + std::string(key) + "' must be >= " + std::to_string(min));
    return v;
  };
  auto bool_field = [&](const char* key) {
    if (!j.contains(key)) return false;
    if (!j[key].is_boolean()) {
      bad.push_back("'" + std::string(key) + "' must be true or false");
      return false;
    }
    return j[key].get<bool>();
  };

  if (!j.contains("stages")) {
    bad.push_back("'stages' is required");
  } else if (!j["stages"].is_array() || j["stages"].empty()) {
    bad.push_back("'stages' must be a nonempty array");
  } else {
    std::set<std::string> requested;
    for (const auto& s : j["stages"]) {
      if (!s.is_string() ||
          std::find(kStageOrder.begin(), kStageOrder.end(), s.get<std::string>()) == kStageOrder.end()) {
        bad.push_back("unknown stage " + s.dump());
      } else {
        requested.insert(s.get<std::string>());
      }
    }
    for (auto s : kStageOrder) {
      if (requested.count(std::string(s))) c.stages.emplace_back(s);
    }
  }

  c.registry = file("registry", true);
  c.clusters = file("clusters", true);
  c.periods = file("periods", true);
  c.works = files("works");
  c.metadata = files("metadata");
  if (j.contains("scheme_lists")) {
    if (!j["scheme_lists"].is_object()) {
      bad.push_back("'scheme_lists' must be an object of scheme id -> path");
    } else {
      for (const auto& [k, v] : j["scheme_lists"].items()) {
        if (!v.is_string()) {
          bad.push_back("scheme_lists." + k + " must be a path");
          continue;
        }
        auto p = resolve(v.get<std::string>());
        if (!std::filesystem::is_regular_file(p)) bad.push_back("scheme_lists." + k + ": file not found: " + p.string());
        c.scheme_lists[k] = p;
      }
    }
  }
  if (j.contains("schemes")) {
    c.analysis.schemes.clear();
    if (!j["schemes"].is_array() || j["schemes"].empty()) {
      bad.push_back("'schemes' must be a nonempty array");
    } else {
      for (const auto& s : j["schemes"]) {
        if (s.is_string()) {
          c.analysis.schemes.push_back(s.get<std::string>());
        } else {
          bad.push_back("'schemes' entries must be strings");
        }
      }
    }
  }
  auto scheme_field = [&](const char* key) -> std::optional<std::string> {
    if (!j.contains(key)) return std::nullopt;
    if (!j[key].is_string()) {
      bad.push_back("'" + std::string(key) + "' must be a string");
      return std::nullopt;
    }
    auto s = j[key].get<std::string>();
    if (std::find(c.analysis.schemes.begin(), c.analysis.schemes.end(), s) == c.analysis.schemes.end()) {
      bad.push_back("'" + std::string(key) + "' names scheme '" + s + "' which is not in 'schemes'");
    }
    return s;
  };
  if (!c.analysis.schemes.empty()) c.analysis.scheme = c.analysis.schemes.front();
  if (auto s = scheme_field("scheme")) c.analysis.scheme = *s;
  c.analysis.cited_scheme = scheme_field("cited_scheme");
  for (const auto& [k, v] : c.scheme_lists) {
    if (std::find(c.analysis.schemes.begin(), c.analysis.schemes.end(), k) == c.analysis.schemes.end()) {
      bad.push_back("scheme_lists names scheme '" + k + "' which is not in 'schemes'");
    }
  }

  if (j.contains("out")) {
    if (j["out"].is_string()) {
      c.out = resolve(j["out"].get<std::string>());
    } else {
      bad.push_back("'out' must be a string path");
    }
  } else {
    c.out = base_dir / "out";
  }
  c.analysis.seed = uint_field(j, "seed", 0, 0);
  c.analysis.threads = static_cast<unsigned>(uint_field(j, "threads", 1, 1));
  c.analysis.permutations = uint_field(j, "permutations", 1, 9999);
  c.min_cluster_size = uint_field(j, "min_cluster_size", 1, kDefaultMinClusterSize);
  c.analysis.journal_only_denominator = bool_field("journal_only_denominator");
  if (j.contains("ra_denominator")) {
    const auto& v = j["ra_denominator"];
    if (v == "journal_only") {
      c.analysis.ra_denominator = Denominator::journal_only;
    } else if (v == "all_outlets") {
      c.analysis.ra_denominator = Denominator::all_outlets;
    } else {
      bad.push_back("'ra_denominator' must be \"journal_only\" or \"all_outlets\"");
    }
  }

  if (j.contains("fetch")) {
    const auto& f = j["fetch"];
    if (!f.is_object()) {
      bad.push_back("'fetch' must be an object");
    } else {
      static const std::set<std::string> fetch_keys = {"base_url", "requests_per_second", "page_size",
                                                       "max_retries", "jobs", "api_key_env"};
      for (const auto& [k, v] : f.items()) {
        if (!fetch_keys.count(k)) bad.push_back("unknown key 'fetch." + k + "'");
      }
      if (f.contains("base_url")) {
        if (f["base_url"].is_string()) {
          c.fetch.base_url = f["base_url"].get<std::string>();
        } else {
          bad.push_back("'fetch.base_url' must be a string");
        }
      }
      if (f.contains("requests_per_second")) {
        if (f["requests_per_second"].is_number() && f["requests_per_second"].get<double>() > 0) {
          c.fetch.requests_per_second = f["requests_per_second"].get<double>();
        } else {
          bad.push_back("'fetch.requests_per_second' must be a positive number");
        }
      }
      c.fetch.page_size = static_cast<int>(uint_field(f, "page_size", 1, 200));
      if (c.fetch.page_size > 200) bad.push_back("'page_size' must be <= 200");
      c.fetch.max_retries = static_cast<int>(uint_field(f, "max_retries", 0, 5));
      c.fetch_jobs = static_cast<unsigned>(uint_field(f, "jobs", 1, 1));
      if (f.contains("api_key_env")) {
        if (f["api_key_env"].is_string()) {
          c.api_key_env = f["api_key_env"].get<std::string>();
        } else {
          bad.push_back("'fetch.api_key_env' must be a string");
        }
      }
    }
  }
  if (c.has_stage("ingest") && !c.has_stage("fetch") && c.works.empty() &&
      !std::filesystem::is_directory(c.out / "raw" / "works")) {
    bad.push_back("stage 'ingest' needs 'works' files or a 'fetch' stage");
  }
  if (!bad.empty()) throw ConfigError(std::move(bad));
  return c;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open config " + path.string());
  auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ConfigError({"config is not valid JSON: " + path.string()});
  return parse_run_config(j, path.has_parent_path() ? path.parent_path() : std::filesystem::path("."));
}

// One pipeline per output directory.
class RunLock {
 public:
  explicit RunLock(const std::filesystem::path& dir) : path_(dir / ".refflow.lock") {
    fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd_ < 0) {
      throw UsageError("output directory " + dir.string() + " is locked by another run (" + path_.string() + ")");
    }
    const auto pid = std::to_string(::getpid()) + "\n";
    [[maybe_unused]] auto n = ::write(fd_, pid.data(), pid.size());
  }
  ~RunLock() {
    ::close(fd_);
    std::error_code ec;
    std::filesystem::remove(path_, ec);
  }
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

 private:
  std::filesystem::path path_;
  int fd_ = -1;
};

struct StageStatus {
  std::string name;
  std::string status;  // ok | failed | not_run
  std::string error;
};

struct RunManifest {
  std::string command_line;
  std::string config_sha256;
  std::string engine = std::string(kEngineName) + " " + std::string(kEngineVersion);
  std::vector<std::pair<std::string, std::string>> inputs;   // path, sha256
  std::vector<std::pair<std::string, std::string>> outputs;  // path relative to out, sha256
  std::vector<StageStatus> stages;
  std::string started_at;
  std::string finished_at;
  std::string status;  // complete | partial

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["command_line"] = command_line;
    j["config_sha256"] = config_sha256;
    j["engine"] = engine;
    j["started_at"] = started_at;
    j["finished_at"] = finished_at;
    j["status"] = status;
    j["inputs"] = nlohmann::json::array();
    for (const auto& [p, d] : inputs) j["inputs"].push_back({{"path", p}, {"sha256", d}});
    j["stages"] = nlohmann::json::array();
    for (const auto& s : stages) {
      nlohmann::json e = {{"name", s.name}, {"status", s.status}};
      if (!s.error.empty()) e["error"] = s.error;
      j["stages"].push_back(e);
    }
    j["outputs"] = nlohmann::json::array();
    for (const auto& [p, d] : outputs) j["outputs"].push_back({{"path", p}, {"sha256", d}});
    return j;
  }
};

inline std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct PipelineHooks {
  TransportFactory transport;  // fetch stage transport override
};

inline Registry load_run_registry(const RunConfig& c) {
  return load_registry(c.registry, c.clusters, resolve_schemes(c.registry, c.analysis.schemes, c.scheme_lists),
                       Registry::Options{c.min_cluster_size});
}

// Runs the configured stages in pipeline order. A failing stage leaves the
// outputs of completed stages in place, marks the manifest partial and
// rethrows.
inline RunManifest run_pipeline(const RunConfig& c, const std::string& command_line, const PipelineHooks& hooks = {}) {
  RunManifest m;
  m.command_line = command_line;
  m.config_sha256 = sha256_hex(c.source.dump());
  m.started_at = utc_now();
  std::vector<std::filesystem::path> inputs = {c.registry, c.clusters, c.periods};
  inputs.insert(inputs.end(), c.works.begin(), c.works.end());
  inputs.insert(inputs.end(), c.metadata.begin(), c.metadata.end());
  for (const auto& [k, p] : c.scheme_lists) inputs.push_back(p);
  for (const auto& p : inputs) m.inputs.emplace_back(p.string(), sha256_file(p));

  std::filesystem::create_directories(c.out);
  RunLock lock(c.out);
  OutputLog log;
  for (const auto& s : c.stages) m.stages.push_back({s, "not_run", ""});

  std::exception_ptr failure;
  std::optional<Registry> registry;
  auto get_registry = [&]() -> const Registry& {
    if (!registry) registry = load_run_registry(c);
    return *registry;
  };
  for (auto& st : m.stages) {
    try {
      const auto& s = st.name;
      if (s == "fetch") {
        auto cfg = c.fetch;
        if (const char* key = std::getenv(c.api_key_env.c_str()); key && *key) cfg.api_key = key;
        run_fetch_stage(get_registry(), load_periods(c.periods), cfg, c.fetch_jobs, c.out, &log, hooks.transport);
      } else if (s == "ingest") {
        run_ingest_stage(get_registry(), load_periods(c.periods), c.works, c.metadata, c.out, &log);
      } else if (s == "cube") {
        run_cube_stage(get_registry(), c.analysis, c.out, &log);
      } else if (s == "indicators") {
        run_indicators_stage(c.analysis, c.out, &log);
      } else if (s == "asymmetry") {
        run_asymmetry_stage(c.analysis, c.out, &log);
      } else if (s == "tests") {
        run_tests_stage(c.analysis, c.out, &log);
      } else if (s == "robustness") {
        run_robustness_stage(c.analysis, c.out, &log);
      } else if (s == "report") {
        emit_report_bundle(c.out, &log);
      }
      st.status = "ok";
    } catch (const std::exception& e) {
      st.status = "failed";
      st.error = e.what();
      failure = std::current_exception();
      break;
    }
  }
  m.status = failure ? "partial" : "complete";
  for (const auto& f : log.files()) {
    if (std::filesystem::exists(f)) {
      m.outputs.emplace_back(std::filesystem::relative(f, c.out).generic_string(), sha256_file(f));
    }
  }
  m.finished_at = utc_now();
  write_file(c.out / "manifest.json", [&](std::ostream& os) { os << m.to_json().dump(2) << '\n'; });
  if (failure) std::rethrow_exception(failure);
  return m;
}

}  // namespace refflow
