#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "fixtures.hpp"
#include "refflow/cube.hpp"

using namespace refflow;

namespace {

oracle::RawCorpus two_cluster_fixture() {
  oracle::RawCorpus c;
  c.min_cluster_size = 1;
  c.periods = {{"P", 2010, 2012}};
  c.clusters = {{1, "A"}, {2, "B"}};
  auto j = [](std::string id, int cl) {
    return oracle::RawJournal{id, id, cl, {{"econlit", true}, {"truc", true}, {"openalex_econ", true}}};
  };
  c.journals = {j("J1", 1), j("J2", 2)};
  // 6 references from cluster 1, 4 from cluster 2.
  c.works = {{"W1", "J1", 2010, {"W3", "W4", "B1", "U1"}, ""},
             {"W2", "J1", 2011, {"W1", "W3"}, ""},
             {"W3", "J2", 2011, {"W1", "W2", "W3", "B1"}, ""},
             {"W4", "J2", 2012, {}, ""}};
  c.metadata = {{"B1", "", std::nullopt, {}, "book"}};
  return c;
}

}  // namespace

TEST(Cube, ConservationAndClusterMarginals) {
  fixtures::TempDir dir;
  const auto l = fixtures::load(two_cluster_fixture(), dir.path());
  EXPECT_EQ(l.cube.total("econlit", "P"), 10u);
  const auto& t = l.cube.tallies("econlit", "P");
  EXPECT_EQ(t.field.refs_all, 10u);
  EXPECT_EQ(t.clusters.at(1).refs_all, 6u);
  EXPECT_EQ(t.clusters.at(2).refs_all, 4u);
  EXPECT_EQ(t.field.outlets[static_cast<int>(OutletType::book)], 2u);
  EXPECT_EQ(t.field.outlets[static_cast<int>(OutletType::repository)], 1u);
  EXPECT_EQ(l.store.totals("P").references, 10u);
}

TEST(Cube, MarginalsEqualCellSums) {
  for (std::uint64_t seed = 100; seed < 120; ++seed) {
    fixtures::TempDir dir;
    const auto l = fixtures::load(oracle::random_corpus(seed), dir.path());
    for (const auto& v : l.cube.meta().views) {
      for (const auto& p : l.cube.meta().periods) {
        std::uint64_t all = 0;
        std::map<ClusterId, std::uint64_t> by_cluster;
        std::map<std::string, std::uint64_t> by_journal;
        for (const auto& [k, c] : l.cube.cells()) {
          if (k.view_id != v.id || k.period_id != p.window.id) continue;
          all += c.count;
          if (k.citing_cluster != kNoCluster) by_cluster[k.citing_cluster] += c.count;
          by_journal[k.citing_journal] += c.count;
        }
        const auto& t = l.cube.tallies(v.id, p.window.id);
        EXPECT_EQ(t.field.refs_all, all);
        for (const auto& [c, n] : by_cluster) EXPECT_EQ(t.clusters.at(c).refs_all, n);
        for (const auto& [j, n] : by_journal) EXPECT_EQ(t.journals.at(j).refs_all, n);
        std::uint64_t sum = 0;
        for (auto n : t.field.outlets) sum += n;
        EXPECT_EQ(sum, all);
      }
    }
    // Conservation against per-work deduplicated references (citing side
    // unfiltered for a view whose citing scheme admits every journal).
    for (const auto& p : l.cube.meta().periods) {
      std::uint64_t refs = 0;
      for (const auto& w : l.store.works()) {
        if (w.period_id == p.window.id && l.registry.is_member("openalex_econ", w.journal_id)) refs += w.references.size();
      }
      EXPECT_EQ(l.cube.total("openalex_econ", p.window.id), refs);
    }
  }
}

TEST(Cube, OrderIndependent) {
  auto raw = oracle::random_corpus(7);
  fixtures::TempDir a, b;
  const auto first = serialize(fixtures::load(raw, a.path()).cube);
  // Reversing works changes which duplicate line wins, so drop duplicates first.
  std::set<std::string> seen;
  std::vector<oracle::RawWork> unique;
  for (const auto& w : raw.works) {
    if (seen.insert(w.id).second) unique.push_back(w);
  }
  raw.works = unique;
  const auto dedup = serialize(fixtures::load(raw, a.path() / "u").cube);
  EXPECT_EQ(first, dedup);
  std::reverse(raw.works.begin(), raw.works.end());
  std::shuffle(raw.metadata.begin(), raw.metadata.end(), std::mt19937_64(3));
  EXPECT_EQ(dedup, serialize(fixtures::load(raw, b.path()).cube));
}

TEST(Cube, PartitionIndependent) {
  for (std::uint64_t seed = 200; seed < 210; ++seed) {
    fixtures::TempDir dir;
    const auto raw = oracle::random_corpus(seed);
    const auto one = serialize(fixtures::load(raw, dir / "1", {}, 1).cube);
    for (unsigned threads : {2u, 3u, 8u}) {
      EXPECT_EQ(one, serialize(fixtures::load(raw, dir / std::to_string(threads), {}, threads).cube));
    }
  }
}

TEST(Cube, SnapshotRoundTrip) {
  fixtures::TempDir dir;
  const auto l = fixtures::load(oracle::random_corpus(11), dir.path(),
                                {SchemeView::plain("econlit"), SchemeView::mixed("econlit", "openalex_econ")});
  const auto text = serialize(l.cube);
  EXPECT_EQ(text.rfind(std::string(kCubeMagic), 0), 0u);
  std::istringstream in(text);
  const auto back = CountsCube::read(in);
  EXPECT_EQ(serialize(back), text);
  for (const auto& p : l.cube.meta().periods) {
    EXPECT_EQ(back.tallies("econlit>openalex_econ", p.window.id).field,
              l.cube.tallies("econlit>openalex_econ", p.window.id).field);
  }
}

TEST(Cube, RejectsBadSnapshot) {
  std::istringstream bad("# something else\n");
  EXPECT_THROW(CountsCube::read(bad), DataError);
}

TEST(Cube, BelowThresholdClusterIsLoadedButNotAdmitted) {
  auto raw = two_cluster_fixture();
  raw.min_cluster_size = 2;
  fixtures::TempDir dir;
  const auto l = fixtures::load(raw, dir.path());
  EXPECT_EQ(l.cube.meta().clusters.size(), 2u);
  EXPECT_TRUE(l.cube.admitted_clusters().empty());
  EXPECT_TRUE(l.cube.tallies("econlit", "P").clusters.empty());
}
