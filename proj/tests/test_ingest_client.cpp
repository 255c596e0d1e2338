#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "mock_api.hpp"
#include "refflow/ingest_client.hpp"

using namespace refflow;

namespace {

const PeriodWindow kWindow{"P1", 2006, 2008};

FetchConfig config_for(const mock::Api& api) {
  FetchConfig c;
  c.base_url = api.base_url();
  c.requests_per_second = 1000;
  c.page_size = 2;
  c.max_retries = 3;
  c.timeout = std::chrono::seconds(5);
  return c;
}

void seed_journal(mock::Api& api, const std::string& journal, int n, int first = 0) {
  for (int i = first; i < first + n; ++i) {
    api.add({"https://openalex.org/W" + journal + std::to_string(i), journal, 2007,
             {"https://openalex.org/R" + std::to_string(i % 3)}, "journal"});
  }
}

FetchHooks quiet() {
  FetchHooks h;
  h.sleep = [](std::chrono::milliseconds) {};
  return h;
}

struct Session {
  std::unique_ptr<ApiClient> client;
  explicit Session(const FetchConfig& c, const FetchHooks* hooks = nullptr)
      : client(std::make_unique<ApiClient>(c, std::make_shared<RateLimiter>(c.requests_per_second),
                                           default_transport(c)(), 0, hooks)) {}
};

std::size_t line_count(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  std::string line;
  while (std::getline(in, line)) ++n;
  return n;
}

}  // namespace

TEST(IngestClient, PaginatesUntilCursorEnds) {
  mock::Api api;
  seed_journal(api, "S1", 6);
  api.add({"https://openalex.org/Wold", "S1", 1999, {}, "journal"});
  fixtures::TempDir dir;
  const auto cfg = config_for(api);
  Session run(cfg);
  const auto ckpt = fetch_journal_works(*run.client, "S1", kWindow, cfg, dir.path());
  EXPECT_TRUE(ckpt.completed);
  EXPECT_EQ(ckpt.records_written, 6u);
  const auto paths = shard_paths(dir.path(), cfg, "S1", "P1");
  EXPECT_EQ(line_count(paths.jsonl), 6u);
  EXPECT_EQ(line_count(paths.ids), 6u);
  EXPECT_EQ(api.requests(), 3u);
  EXPECT_EQ(load_checkpoint(paths.checkpoint), ckpt);
  const auto first = nlohmann::json::parse(fixtures::slurp(paths.jsonl).substr(0, fixtures::slurp(paths.jsonl).find('\n')));
  EXPECT_EQ(first["journal_id"], "S1");
  EXPECT_EQ(first["publication_year"], 2007);
  EXPECT_EQ(first["type"], "journal");

  // A completed stream makes no further requests.
  fetch_journal_works(*run.client, "S1", kWindow, cfg, dir.path());
  EXPECT_EQ(api.requests(), 3u);
}

TEST(IngestClient, ResumeAfterCrashMatchesCleanRun) {
  mock::Api api;
  seed_journal(api, "S1", 6);
  const auto cfg = config_for(api);
  fixtures::TempDir clean, crashed, torn;
  {
    Session run(cfg);
    fetch_journal_works(*run.client, "S1", kWindow, cfg, clean.path());
  }
  {
    FetchHooks hooks;
    hooks.after_record = [](std::uint64_t n) {
      if (n == 3) throw InjectedCrash();
    };
    Session run(cfg, &hooks);
    EXPECT_THROW(fetch_journal_works(*run.client, "S1", kWindow, cfg, crashed.path(), &hooks), InjectedCrash);
    const auto partial = load_checkpoint(shard_paths(crashed.path(), cfg, "S1", "P1").checkpoint);
    ASSERT_TRUE(partial.has_value());
    EXPECT_EQ(partial->last_cursor, "p1");
    Session again(cfg);
    fetch_journal_works(*again.client, "S1", kWindow, cfg, crashed.path());
  }
  {
    FetchHooks hooks;
    hooks.torn_write_at = 4;
    Session run(cfg, &hooks);
    EXPECT_THROW(fetch_journal_works(*run.client, "S1", kWindow, cfg, torn.path(), &hooks), InjectedCrash);
    Session again(cfg);
    fetch_journal_works(*again.client, "S1", kWindow, cfg, torn.path());
  }
  const auto a = shard_paths(clean.path(), cfg, "S1", "P1");
  for (const auto* other : {&crashed, &torn}) {
    const auto b = shard_paths(other->path(), cfg, "S1", "P1");
    EXPECT_EQ(fixtures::slurp(a.jsonl), fixtures::slurp(b.jsonl));
    EXPECT_EQ(fixtures::slurp(a.ids), fixtures::slurp(b.ids));
    EXPECT_EQ(fixtures::slurp(a.checkpoint), fixtures::slurp(b.checkpoint));
  }
  EXPECT_EQ(line_count(a.jsonl), 6u);
}

TEST(IngestClient, EmptyJournalCompletes) {
  mock::Api api;
  fixtures::TempDir dir;
  const auto cfg = config_for(api);
  Session run(cfg);
  const auto ckpt = fetch_journal_works(*run.client, "S9", kWindow, cfg, dir.path());
  EXPECT_TRUE(ckpt.completed);
  EXPECT_EQ(ckpt.records_written, 0u);
  EXPECT_EQ(line_count(shard_paths(dir.path(), cfg, "S9", "P1").jsonl), 0u);
}

TEST(IngestClient, MetadataCacheAndMisses) {
  mock::Api api;
  for (int i = 0; i < 4; ++i) api.add({"https://openalex.org/M" + std::to_string(i), "S2", 2001, {}, "journal"});
  fixtures::TempDir dir;
  const auto cfg = config_for(api);
  Session run(cfg);
  std::vector<std::string> batch;
  for (int i = 0; i < 5; ++i) batch.push_back("https://openalex.org/M" + std::to_string(i));
  const auto r = fetch_referenced_metadata(*run.client, batch, cfg, dir.path(), 3);
  EXPECT_EQ(r.lines, 4u);
  EXPECT_EQ(r.misses, 1u);
  EXPECT_EQ(r.network_calls, 2u);
  EXPECT_EQ(line_count(dir / "references.jsonl"), 4u);
  EXPECT_EQ(fixtures::slurp(dir / "references.miss"), "https://openalex.org/M4\n");

  const auto again = fetch_referenced_metadata(*run.client, batch, cfg, dir.path());
  EXPECT_EQ(again.network_calls, 0u);
  EXPECT_EQ(again.lines, 4u);
  EXPECT_EQ(again.misses, 1u);
  EXPECT_EQ(line_count(dir / "references.jsonl"), 4u);
  EXPECT_THROW(fetch_referenced_metadata(*run.client, {}, cfg, dir.path()), DataError);
}

TEST(IngestClient, RetriesTransientStatuses) {
  mock::Api api;
  seed_journal(api, "S1", 1);
  api.fail_next({429, 503});
  fixtures::TempDir dir;
  auto cfg = config_for(api);
  std::vector<std::chrono::milliseconds> slept;
  FetchHooks hooks;
  hooks.sleep = [&](std::chrono::milliseconds d) { slept.push_back(d); };
  Session run(cfg, &hooks);
  const auto ckpt = fetch_journal_works(*run.client, "S1", kWindow, cfg, dir.path());
  EXPECT_TRUE(ckpt.completed);
  EXPECT_EQ(api.requests(), 3u);
  ASSERT_EQ(slept.size(), 2u);
  EXPECT_LE(slept[0].count(), 1000);
  EXPECT_LE(slept[1].count(), 2000);
}

TEST(IngestClient, GivesUpAfterRetries) {
  mock::Api api;
  api.fail_always(503);
  fixtures::TempDir dir;
  const auto cfg = config_for(api);
  const auto hooks = quiet();
  Session run(cfg, &hooks);
  EXPECT_THROW(fetch_journal_works(*run.client, "S1", kWindow, cfg, dir.path()), NetworkExhausted);
  EXPECT_EQ(api.requests(), 4u);
}

TEST(IngestClient, ClientErrorsFailImmediately) {
  mock::Api api;
  api.fail_always(404);
  fixtures::TempDir dir;
  const auto cfg = config_for(api);
  const auto hooks = quiet();
  Session run(cfg, &hooks);
  try {
    fetch_journal_works(*run.client, "S1", kWindow, cfg, dir.path());
    FAIL() << "expected HttpError";
  } catch (const HttpError& e) {
    EXPECT_EQ(e.status(), 404);
  }
  EXPECT_EQ(api.requests(), 1u);
}

TEST(IngestClient, TransportFailureIsRetried) {
  FetchConfig cfg;
  cfg.base_url = "http://127.0.0.1:1";
  cfg.max_retries = 2;
  cfg.timeout = std::chrono::seconds(1);
  const auto hooks = quiet();
  Session run(cfg, &hooks);
  EXPECT_THROW(run.client->get_json("/works"), NetworkExhausted);
  EXPECT_EQ(run.client->requests(), 3u);
}

TEST(IngestClient, SendsBearerKey) {
  mock::Api api;
  fixtures::TempDir dir;
  auto cfg = config_for(api);
  cfg.api_key = "sekret";
  Session run(cfg);
  fetch_journal_works(*run.client, "S1", kWindow, cfg, dir.path());
  EXPECT_EQ(api.headers("Authorization"), (std::vector<std::string>{"Bearer sekret"}));
}

TEST(IngestClient, BackoffBounds) {
  FetchConfig cfg;
  Backoff a(cfg, 7), b(cfg, 7);
  for (int k = 0; k < 12; ++k) {
    const auto d = a.delay(k);
    EXPECT_EQ(d, b.delay(k));
    const double ceiling = std::min(60000.0, 1000.0 * std::pow(2.0, k));
    EXPECT_GE(d.count(), 0);
    EXPECT_LE(static_cast<double>(d.count()), ceiling);
  }
}

TEST(IngestClient, RateLimiterSpacesRequests) {
  RateLimiter limiter(50);
  const auto start = std::chrono::steady_clock::now();
  for (int i = 0; i < 21; ++i) limiter.acquire();
  const auto elapsed = std::chrono::steady_clock::now() - start;
  EXPECT_GE(elapsed, std::chrono::milliseconds(399));
}

TEST(IngestClient, FetchAllIsIndependentOfJobs) {
  mock::Api api;
  seed_journal(api, "S1", 5);
  seed_journal(api, "S2", 3);
  api.add({"https://openalex.org/R0", "S3", 1990, {}, "journal"});
  api.add({"https://openalex.org/R1", "", 1990, {}, "book"});
  fixtures::TempDir one, two;
  const auto cfg = config_for(api);
  const std::vector<std::string> journals = {"S1", "S2"};
  const std::vector<PeriodWindow> periods = {kWindow, {"P2", 2012, 2014}};
  const auto s1 = fetch_all(journals, periods, cfg, one.path(), 1);
  const auto s2 = fetch_all(journals, periods, cfg, two.path(), 2);
  EXPECT_EQ(s1.checkpoints, s2.checkpoints);
  EXPECT_EQ(s1.metadata.lines, 2u);
  EXPECT_EQ(s1.metadata.misses, 1u);
  for (const auto& entry : std::filesystem::recursive_directory_iterator(one.path())) {
    if (!entry.is_regular_file()) continue;
    const auto rel = std::filesystem::relative(entry.path(), one.path());
    EXPECT_EQ(fixtures::slurp(entry.path()), fixtures::slurp(two.path() / rel)) << rel;
  }
}

TEST(IngestClient, ConfigValidation) {
  FetchConfig c;
  c.page_size = 0;
  EXPECT_THROW(c.validate(), UsageError);
  c = {};
  c.requests_per_second = 0;
  EXPECT_THROW(c.validate(), UsageError);
  c = {};
  c.max_retries = -1;
  EXPECT_THROW(c.validate(), UsageError);
}

TEST(IngestClient, Helpers) {
  EXPECT_EQ(url_encode("a b/c"), "a%20b%2Fc");
  EXPECT_EQ(short_id("https://openalex.org/W12"), "W12");
  EXPECT_EQ(shard_key("https://x/S1", "P 1"), "https___x_S1__P_1");
  EXPECT_FALSE(normalize_work(nlohmann::json{{"title", "x"}}).has_value());
}
