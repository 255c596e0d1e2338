#pragma once

// Client for an OpenAlex-style paginated works API.
//
// Request shape (pinned):
//   GET {works_path}?filter={journal_filter}:{journal_id},publication_year:{start}-{end}
//                   &per-page={page_size}&cursor={cursor}
//   GET {works_path}?filter=openalex:{id1}|{id2}|...&per-page={n}      (cited metadata)
// Response: {"results": [...], "meta": {"next_cursor": "..." | null}}.
// Pagination starts at cursor "*" and ends when next_cursor is null/absent/empty.
// The API key, when configured, is sent as "Authorization: Bearer <key>".
//
// Every (journal, period) stream writes to its own append-only shard
// `works/<key>.jsonl` with an id index `works/<key>.ids` and a checkpoint
// `checkpoints/<key>.json` saved after every page. Resuming replays from the
// last checkpointed cursor and skips ids already in the shard, so no record is
// ever emitted twice.

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include "httplib.h"
#include "json.hpp"
#include "refflow/error.hpp"
#include "refflow/random.hpp"
#include "refflow/registry.hpp"

namespace refflow {

struct FetchConfig {
  std::string base_url = "https://api.openalex.org";
  std::optional<std::string> api_key;
  double requests_per_second = 10.0;
  int page_size = 200;
  int max_retries = 5;
  std::filesystem::path checkpoint_path = "checkpoints";
  std::string works_path = "/works";
  std::string journal_filter = "primary_location.source.id";
  std::chrono::milliseconds backoff_base{1000};
  double backoff_factor = 2.0;
  std::chrono::milliseconds backoff_cap{60000};
  std::uint64_t jitter_seed = 0;
  std::chrono::seconds timeout{30};

  void validate() const {
    if (!(requests_per_second > 0)) throw UsageError("requests_per_second must be > 0");
    if (page_size < 1 || page_size > 200) throw UsageError("page_size must be within 1..200");
    if (max_retries < 0) throw UsageError("max_retries must be >= 0");
    if (base_url.empty()) throw UsageError("base_url is empty");
  }
};

struct FetchCheckpoint {
  std::string journal_id;
  std::string period_id;
  std::string last_cursor = "*";
  std::uint64_t records_written = 0;
  bool completed = false;

  friend bool operator==(const FetchCheckpoint&, const FetchCheckpoint&) = default;
};

struct HttpResponse {
  int status = 0;  // 0: transport failure, no response
  std::string body;
};

class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  virtual HttpResponse get(const std::string& path_and_query, const httplib::Headers& headers) = 0;
};

class HttplibTransport : public HttpTransport {
 public:
  HttplibTransport(const std::string& base_url, std::chrono::seconds timeout) : client_(base_url) {
    client_.set_connection_timeout(timeout);
    client_.set_read_timeout(timeout);
    client_.set_keep_alive(true);
  }

  HttpResponse get(const std::string& path_and_query, const httplib::Headers& headers) override {
    auto res = client_.Get(path_and_query, headers);
    if (!res) return {};
    return {res->status, res->body};
  }

 private:
  httplib::Client client_;
};

using TransportFactory = std::function<std::unique_ptr<HttpTransport>()>;

inline TransportFactory default_transport(const FetchConfig& config) {
  return [config] { return std::make_unique<HttplibTransport>(config.base_url, config.timeout); };
}

// Strict-spacing token bucket (capacity 1) shared by all fetch streams.
class RateLimiter {
 public:
  using Clock = std::chrono::steady_clock;

  explicit RateLimiter(double requests_per_second)
      : interval_(std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(1.0 / requests_per_second))) {}

  void acquire() {
    Clock::time_point slot;
    {
      std::lock_guard lock(mutex_);
      slot = std::max(Clock::now(), next_);
      next_ = slot + interval_;
    }
    std::this_thread::sleep_until(slot);
  }

 private:
  std::mutex mutex_;
  Clock::duration interval_;
  Clock::time_point next_{};
};

// Exponential backoff with full jitter: attempt k sleeps uniformly in
// [0, min(cap, base * factor^k)].
class Backoff {
 public:
  Backoff(const FetchConfig& config, std::uint64_t stream)
      : base_(config.backoff_base), factor_(config.backoff_factor), cap_(config.backoff_cap),
        rng_(SplitMix64::for_stream(config.jitter_seed, stream)) {}

  std::chrono::milliseconds delay(int attempt) {
    double ceiling = static_cast<double>(base_.count());
    for (int i = 0; i < attempt && ceiling < static_cast<double>(cap_.count()); ++i) ceiling *= factor_;
    const auto bound = static_cast<std::uint64_t>(std::min(ceiling, static_cast<double>(cap_.count())));
    return std::chrono::milliseconds(bound == 0 ? 0 : rng_.bounded(bound + 1));
  }

 private:
  std::chrono::milliseconds base_;
  double factor_;
  std::chrono::milliseconds cap_;
  SplitMix64 rng_;
};

// Test seam for crash/resume checks.
struct FetchHooks {
  std::function<void(std::uint64_t records_written)> after_record;
  std::optional<std::uint64_t> torn_write_at;  // write half of this record, then throw
  std::function<void(std::chrono::milliseconds)> sleep = [](std::chrono::milliseconds d) {
    std::this_thread::sleep_for(d);
  };
};

class InjectedCrash : public std::runtime_error {
 public:
  InjectedCrash() : std::runtime_error("injected crash") {}
};

inline std::string url_encode(std::string_view s) {
  static const char* hex = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : s) {
    if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~' || c == ':' || c == ',' || c == '|' ||
        c == '*') {
      out += static_cast<char>(c);
    } else {
      out += '%';
      out += hex[c >> 4];
      out += hex[c & 15];
    }
  }
  return out;
}

inline std::string shard_key(std::string_view journal_id, std::string_view period_id) {
  std::string key;
  for (char c : std::string(journal_id) + "__" + std::string(period_id)) {
    key += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.') ? c : '_';
  }
  return key;
}

inline std::string short_id(std::string_view id) {
  auto slash = id.rfind('/');
  return std::string(slash == std::string_view::npos ? id : id.substr(slash + 1));
}

// Maps one API result onto the works JSONL schema. Returns nullopt for
// results without an id.
inline std::optional<nlohmann::json> normalize_work(const nlohmann::json& r) {
  if (!r.is_object() || !r.contains("id") || !r["id"].is_string()) return std::nullopt;
  nlohmann::json out;
  out["id"] = r["id"];
  const nlohmann::json* source = nullptr;
  if (r.contains("primary_location") && r["primary_location"].is_object()) {
    const auto& loc = r["primary_location"];
    if (loc.contains("source") && loc["source"].is_object()) source = &loc["source"];
  }
  if (r.contains("journal_id") && r["journal_id"].is_string()) {
    out["journal_id"] = r["journal_id"];
  } else if (source && source->contains("id") && (*source)["id"].is_string()) {
    out["journal_id"] = (*source)["id"];
  }
  if (r.contains("publication_year") && r["publication_year"].is_number_integer()) {
    out["publication_year"] = r["publication_year"];
  }
  out["referenced_works"] = nlohmann::json::array();
  if (r.contains("referenced_works") && r["referenced_works"].is_array()) {
    for (const auto& id : r["referenced_works"]) {
      if (id.is_string()) out["referenced_works"].push_back(id);
    }
  }
  if (source && source->contains("type") && (*source)["type"].is_string()) {
    out["type"] = (*source)["type"];
  } else if (r.contains("type") && r["type"].is_string()) {
    out["type"] = r["type"];
  }
  return out;
}

// Append-only JSONL shard with an id index. Opening repairs a torn trailing
// line left by a crash and rebuilds the index from the shard itself.
class SnapshotWriter {
 public:
  SnapshotWriter(std::filesystem::path jsonl, std::filesystem::path ids)
      : jsonl_path_(std::move(jsonl)), ids_path_(std::move(ids)) {
    std::filesystem::create_directories(jsonl_path_.parent_path());
    std::vector<std::string> order;
    if (std::filesystem::exists(jsonl_path_)) {
      std::string content;
      {
        std::ifstream in(jsonl_path_, std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        content = ss.str();
      }
      const auto keep = content.empty() || content.back() == '\n' ? content.size() : content.rfind('\n') + 1;
      if (content.rfind('\n') == std::string::npos && !content.empty() && content.back() != '\n') {
        std::filesystem::resize_file(jsonl_path_, 0);
        content.clear();
      } else if (keep != content.size()) {
        std::filesystem::resize_file(jsonl_path_, keep);
        content.resize(keep);
      }
      std::istringstream lines(content);
      std::string line;
      while (std::getline(lines, line)) {
        auto j = nlohmann::json::parse(line, nullptr, false);
        if (!j.is_discarded() && j.contains("id") && j["id"].is_string()) {
          if (ids_.insert(j["id"].get<std::string>()).second) order.push_back(j["id"].get<std::string>());
        }
      }
    }
    {
      // Shard order, so a resumed index matches an uninterrupted one.
      std::ofstream idx(ids_path_, std::ios::binary | std::ios::trunc);
      for (const auto& id : order) idx << id << '\n';
    }
    out_.open(jsonl_path_, std::ios::binary | std::ios::app);
    idx_.open(ids_path_, std::ios::binary | std::ios::app);
    if (!out_ || !idx_) throw DataError("cannot open snapshot " + jsonl_path_.string());
  }

  bool contains(const std::string& id) const { return ids_.count(id) > 0; }
  std::uint64_t size() const noexcept { return ids_.size(); }

  void append(const std::string& id, const std::string& line, const FetchHooks* hooks = nullptr) {
    if (hooks && hooks->torn_write_at && *hooks->torn_write_at == ids_.size()) {
      out_ << line.substr(0, line.size() / 2);
      out_.flush();
      throw InjectedCrash();
    }
    out_ << line << '\n';
    out_.flush();
    idx_ << id << '\n';
    idx_.flush();
    ids_.insert(id);
  }

 private:
  std::filesystem::path jsonl_path_;
  std::filesystem::path ids_path_;
  std::set<std::string> ids_;
  std::ofstream out_;
  std::ofstream idx_;
};

inline nlohmann::json to_json(const FetchCheckpoint& c) {
  return {{"journal_id", c.journal_id},
          {"period_id", c.period_id},
          {"last_cursor", c.last_cursor},
          {"records_written", c.records_written},
          {"completed", c.completed}};
}

inline std::optional<FetchCheckpoint> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) return std::nullopt;
  auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw DataError("corrupt checkpoint " + path.string());
  return FetchCheckpoint{j.at("journal_id"), j.at("period_id"), j.at("last_cursor"), j.at("records_written"),
                         j.at("completed")};
}

inline void save_checkpoint(const std::filesystem::path& path, const FetchCheckpoint& c) {
  std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << to_json(c).dump(2) << '\n';
    if (!out) throw DataError("cannot write checkpoint " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

class ApiClient {
 public:
  ApiClient(FetchConfig config, std::shared_ptr<RateLimiter> limiter, std::unique_ptr<HttpTransport> transport,
            std::uint64_t stream = 0, const FetchHooks* hooks = nullptr)
      : config_(std::move(config)), limiter_(std::move(limiter)), transport_(std::move(transport)),
        backoff_(config_, stream), hooks_(hooks) {
    config_.validate();
  }

  std::uint64_t requests() const noexcept { return requests_; }

  // 429, 5xx and transport failures are retried with backoff; other non-2xx
  // statuses fail immediately.
  nlohmann::json get_json(const std::string& path_and_query) {
    httplib::Headers headers;
    if (config_.api_key) headers.emplace("Authorization", "Bearer " + *config_.api_key);
    for (int attempt = 0;; ++attempt) {
      limiter_->acquire();
      ++requests_;
      const auto res = transport_->get(path_and_query, headers);
      const bool retryable = res.status == 0 || res.status == 429 || res.status >= 500;
      if (res.status >= 200 && res.status < 300) {
        auto j = nlohmann::json::parse(res.body, nullptr, false);
        if (j.is_discarded()) throw DataError("GET " + path_and_query + ": response is not JSON");
        return j;
      }
      if (!retryable) {
        throw HttpError(res.status, "GET " + config_.base_url + path_and_query + " -> HTTP " +
                                        std::to_string(res.status) + ": " + res.body.substr(0, 200));
      }
      if (attempt >= config_.max_retries) {
        throw NetworkExhausted("GET " + config_.base_url + path_and_query + ": giving up after " +
                               std::to_string(attempt + 1) + " attempts (last status " +
                               std::to_string(res.status) + ")");
      }
      const auto d = backoff_.delay(attempt);
      if (hooks_ && hooks_->sleep) {
        hooks_->sleep(d);
      } else {
        std::this_thread::sleep_for(d);
      }
    }
  }

 private:
  FetchConfig config_;
  std::shared_ptr<RateLimiter> limiter_;
  std::unique_ptr<HttpTransport> transport_;
  Backoff backoff_;
  const FetchHooks* hooks_;
  std::uint64_t requests_ = 0;
};

struct ShardPaths {
  std::filesystem::path jsonl;
  std::filesystem::path ids;
  std::filesystem::path checkpoint;
};

inline ShardPaths shard_paths(const std::filesystem::path& out_dir, const FetchConfig& config,
                              std::string_view journal_id, std::string_view period_id) {
  const auto key = shard_key(journal_id, period_id);
  const auto ckpt_dir = config.checkpoint_path.is_absolute() ? config.checkpoint_path : out_dir / config.checkpoint_path;
  return {out_dir / "works" / (key + ".jsonl"), out_dir / "works" / (key + ".ids"), ckpt_dir / (key + ".json")};
}

// Fetches every work of one journal within one period window.
inline FetchCheckpoint fetch_journal_works(ApiClient& client, const std::string& journal_id,
                                           const PeriodWindow& window, const FetchConfig& config,
                                           const std::filesystem::path& out_dir, const FetchHooks* hooks = nullptr) {
  const auto paths = shard_paths(out_dir, config, journal_id, window.id);
  auto ckpt = load_checkpoint(paths.checkpoint).value_or(FetchCheckpoint{journal_id, window.id});
  if (ckpt.completed) return ckpt;
  SnapshotWriter writer(paths.jsonl, paths.ids);
  for (;;) {
    const std::string query = config.works_path + "?filter=" + url_encode(config.journal_filter) + ":" +
                              url_encode(journal_id) + ",publication_year:" + std::to_string(window.year_start) +
                              "-" + std::to_string(window.year_end) + "&per-page=" +
                              std::to_string(config.page_size) + "&cursor=" + url_encode(ckpt.last_cursor);
    const auto page = client.get_json(query);
    if (!page.contains("results") || !page["results"].is_array()) {
      throw DataError("GET " + query + ": response has no results array");
    }
    for (const auto& r : page["results"]) {
      auto line = normalize_work(r);
      if (!line) continue;
      const auto id = (*line)["id"].get<std::string>();
      if (writer.contains(id)) continue;
      writer.append(id, line->dump(), hooks);
      if (hooks && hooks->after_record) hooks->after_record(writer.size());
    }
    std::string next;
    if (page.contains("meta") && page["meta"].is_object() && page["meta"].contains("next_cursor") &&
        page["meta"]["next_cursor"].is_string()) {
      next = page["meta"]["next_cursor"].get<std::string>();
    }
    if (page["results"].empty()) next.clear();
    ckpt.last_cursor = next;
    ckpt.records_written = writer.size();
    ckpt.completed = next.empty();
    save_checkpoint(paths.checkpoint, ckpt);
    if (ckpt.completed) return ckpt;
  }
}

struct MetadataFetchResult {
  std::uint64_t lines = 0;          // resolvable ids of this batch now in the cache
  std::uint64_t misses = 0;         // unresolvable ids of this batch
  std::uint64_t network_calls = 0;
};

// Resolves venue/outlet metadata for a batch of cited work ids into
// `references.jsonl`; ids the API does not return go to `references.miss`.
// Ids already cached (resolved or missed) are never requested again.
inline MetadataFetchResult fetch_referenced_metadata(ApiClient& client, const std::vector<std::string>& batch,
                                                     const FetchConfig& config, const std::filesystem::path& out_dir,
                                                     std::size_t ids_per_request = 50) {
  if (batch.empty()) throw DataError("empty batch");
  SnapshotWriter writer(out_dir / "references.jsonl", out_dir / "references.ids");
  const auto miss_path = out_dir / "references.miss";
  std::set<std::string> missed;
  {
    std::ifstream in(miss_path);
    missed = read_id_list(in);
  }
  std::ofstream miss_out(miss_path, std::ios::binary | std::ios::app);

  std::set<std::string> cached_short;
  auto is_cached = [&](const std::string& id) { return writer.contains(id) || cached_short.count(short_id(id)); };

  const auto before = client.requests();
  std::vector<std::string> pending;
  for (const auto& id : batch) {
    if (!is_cached(id) && !missed.count(id)) pending.push_back(id);
  }
  std::sort(pending.begin(), pending.end());
  pending.erase(std::unique(pending.begin(), pending.end()), pending.end());

  for (std::size_t at = 0; at < pending.size(); at += ids_per_request) {
    const auto end = std::min(pending.size(), at + ids_per_request);
    std::string filter;
    for (auto i = at; i < end; ++i) filter += (i == at ? "" : "|") + short_id(pending[i]);
    const auto page = client.get_json(config.works_path + "?filter=openalex:" + url_encode(filter) +
                                      "&per-page=" + std::to_string(std::max<std::size_t>(end - at, 1)));
    std::set<std::string> returned;
    if (page.contains("results") && page["results"].is_array()) {
      for (const auto& r : page["results"]) {
        auto line = normalize_work(r);
        if (!line) continue;
        nlohmann::json meta = {{"id", (*line)["id"]}};
        if (line->contains("journal_id")) meta["journal_id"] = (*line)["journal_id"];
        if (line->contains("type")) meta["type"] = (*line)["type"];
        const auto id = meta["id"].get<std::string>();
        returned.insert(short_id(id));
        if (!writer.contains(id)) writer.append(id, meta.dump());
        cached_short.insert(short_id(id));
      }
    }
    for (auto i = at; i < end; ++i) {
      if (!returned.count(short_id(pending[i]))) {
        miss_out << pending[i] << '\n';
        missed.insert(pending[i]);
      }
    }
    miss_out.flush();
  }

  MetadataFetchResult result;
  result.network_calls = client.requests() - before;
  std::set<std::string> unique(batch.begin(), batch.end());
  for (const auto& id : unique) {
    if (is_cached(id)) {
      ++result.lines;
    } else {
      ++result.misses;
    }
  }
  return result;
}

struct FetchSummary {
  std::vector<FetchCheckpoint> checkpoints;
  MetadataFetchResult metadata;
  std::uint64_t requests = 0;
};

// Fetches every (journal, period) stream with up to `jobs` concurrent streams
// sharing one rate limiter, then resolves metadata for every cited id.
inline FetchSummary fetch_all(const std::vector<std::string>& journals, const std::vector<PeriodWindow>& periods,
                              const FetchConfig& config, const std::filesystem::path& out_dir, unsigned jobs = 1,
                              TransportFactory transport = {}, const FetchHooks* hooks = nullptr) {
  config.validate();
  if (!transport) transport = default_transport(config);
  auto limiter = std::make_shared<RateLimiter>(config.requests_per_second);

  std::vector<std::pair<std::string, PeriodWindow>> streams;
  for (const auto& j : journals) {
    for (const auto& p : periods) streams.emplace_back(j, p);
  }
  FetchSummary summary;
  summary.checkpoints.resize(streams.size());
  std::atomic<std::size_t> next{0};
  std::atomic<std::uint64_t> requests{0};
  std::mutex error_mutex;
  std::exception_ptr error;
  auto worker = [&] {
    for (;;) {
      const auto i = next.fetch_add(1);
      if (i >= streams.size()) return;
      {
        std::lock_guard lock(error_mutex);
        if (error) return;
      }
      try {
        ApiClient client(config, limiter, transport(), i, hooks);
        summary.checkpoints[i] = fetch_journal_works(client, streams[i].first, streams[i].second, config, out_dir, hooks);
        requests += client.requests();
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };
  jobs = std::max(1u, jobs);
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);

  std::set<std::string> cited;
  for (const auto& [journal, period] : streams) {
    std::ifstream in(shard_paths(out_dir, config, journal, period.id).jsonl);
    std::string line;
    while (std::getline(in, line)) {
      auto j = nlohmann::json::parse(line, nullptr, false);
      if (j.is_discarded() || !j.contains("referenced_works")) continue;
      for (const auto& r : j["referenced_works"]) {
        if (r.is_string()) cited.insert(r.get<std::string>());
      }
    }
  }
  if (!cited.empty()) {
    ApiClient client(config, limiter, transport(), streams.size(), hooks);
    summary.metadata = fetch_referenced_metadata(client, {cited.begin(), cited.end()}, config, out_dir);
    requests += client.requests();
  }
  summary.requests = requests;
  return summary;
}

}  // namespace refflow
