#pragma once

// Raw-corpus test support: a plain description of a corpus, a seeded random
// generator, a writer that emits the engine's input files, and a reference
// implementation that walks raw edges directly, without the registry, store
// or cube.

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "refflow/cube.hpp"
#include "refflow/ratio.hpp"
#include "refflow/registry.hpp"

namespace oracle {

using refflow::Ratio;

struct RawJournal {
  std::string id;
  std::string name;
  std::optional<int> cluster;
  std::map<std::string, bool> member;  // per scheme column
};

struct RawWork {
  std::string id;
  std::string journal;  // empty = missing
  std::optional<int> year;
  std::vector<std::string> refs;  // may repeat
  std::string type;               // empty = missing
};

struct RawPeriod {
  std::string id;
  int start;
  int end;
};

struct RawCorpus {
  std::vector<RawJournal> journals;
  std::vector<std::pair<int, std::string>> clusters;
  std::size_t min_cluster_size = 2;
  std::vector<std::string> schemes = {"econlit", "truc", "openalex_econ"};
  std::map<std::string, std::set<std::string>> lists;  // external members (non-registry ids)
  std::vector<RawPeriod> periods;
  std::vector<RawWork> works;     // citing stream
  std::vector<RawWork> metadata;  // cited-side stream
};

struct Paths {
  std::filesystem::path registry, clusters, periods, works, metadata;
  std::map<std::string, std::filesystem::path> lists;
};

inline Paths write_corpus(const RawCorpus& c, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  Paths p{dir / "registry.csv", dir / "clusters.csv", dir / "periods.csv", dir / "works.jsonl",
          dir / "metadata.jsonl", {}};
  {
    std::ofstream os(p.registry);
    os << "journal_id,name,cluster_id";
    for (const auto& s : c.schemes) os << ',' << s;
    os << '\n';
    for (const auto& j : c.journals) {
      os << j.id << ',' << j.name << ',' << (j.cluster ? std::to_string(*j.cluster) : "");
      for (const auto& s : c.schemes) os << ',' << (j.member.at(s) ? 1 : 0);
      os << '\n';
    }
  }
  {
    std::ofstream os(p.clusters);
    os << "cluster_id,label\n";
    for (const auto& [id, label] : c.clusters) os << id << ',' << label << '\n';
  }
  {
    std::ofstream os(p.periods);
    os << "period_id,year_start,year_end\n";
    for (const auto& x : c.periods) os << x.id << ',' << x.start << ',' << x.end << '\n';
  }
  auto dump = [](const std::filesystem::path& path, const std::vector<RawWork>& works) {
    std::ofstream os(path);
    for (const auto& w : works) {
      nlohmann::json j;
      j["id"] = w.id;
      if (!w.journal.empty()) j["journal_id"] = w.journal;
      if (w.year) j["publication_year"] = *w.year;
      j["referenced_works"] = w.refs;
      if (!w.type.empty()) j["type"] = w.type;
      os << j.dump() << '\n';
    }
  };
  dump(p.works, c.works);
  dump(p.metadata, c.metadata);
  for (const auto& [scheme, ids] : c.lists) {
    p.lists[scheme] = dir / (scheme + ".txt");
    std::ofstream os(p.lists[scheme]);
    os << "# external members\n";
    for (const auto& id : ids) os << id << '\n';
  }
  return p;
}

// Seeded random corpus with clustered, unclustered and below-threshold
// journals, cited-only journals, non-journal outlets, unresolved references,
// duplicate references, self-citations, and works outside the windows.
inline RawCorpus random_corpus(std::uint64_t seed, std::size_t max_refs = 1000) {
  std::mt19937_64 rng(seed);
  auto uni = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  auto coin = [&](double p) { return std::bernoulli_distribution(p)(rng); };

  RawCorpus c;
  c.min_cluster_size = 2;
  c.periods = {{"P1", 2006, 2008}, {"P2", 2012, 2014}, {"P3", 2019, 2021}};
  const int n_clusters = uni(1, 4);
  for (int k = 1; k <= n_clusters; ++k) c.clusters.emplace_back(k * 3, "C" + std::to_string(k * 3));
  const int n_journals = uni(3, 12);
  for (int i = 0; i < n_journals; ++i) {
    RawJournal j;
    j.id = "J" + std::to_string(i);
    j.name = "Journal " + std::to_string(i);
    if (coin(0.8)) j.cluster = c.clusters[static_cast<std::size_t>(uni(0, n_clusters - 1))].first;
    const bool econlit = coin(0.85);
    j.member["econlit"] = econlit;
    j.member["truc"] = econlit && coin(0.6);
    j.member["openalex_econ"] = econlit || coin(0.5);
    c.journals.push_back(std::move(j));
  }
  const int n_external = uni(0, 4);
  for (int i = 0; i < n_external; ++i) {
    if (coin(0.5)) c.lists["openalex_econ"].insert("X" + std::to_string(i));
  }
  if (!c.lists.count("openalex_econ")) c.lists["openalex_econ"] = {};

  static const std::vector<int> years = {2006, 2007, 2008, 2010, 2012, 2013, 2014, 2019, 2020, 2021, 2023};
  static const std::vector<std::string> journal_types = {"", "journal", "article", "review"};
  static const std::vector<std::string> other_types = {"book", "book-chapter", "proceedings", "conference",
                                                       "repository", "preprint", "other", "dataset"};

  // Cited-only items: external journal articles and non-journal outlets.
  std::vector<std::string> external_items;
  const int n_items = uni(5, 40);
  for (int i = 0; i < n_items; ++i) {
    RawWork w;
    w.id = "M" + std::to_string(i);
    if (n_external > 0 && coin(0.5)) {
      w.journal = "X" + std::to_string(uni(0, n_external - 1));
      w.type = journal_types[static_cast<std::size_t>(uni(0, 3))];
    } else {
      w.type = other_types[static_cast<std::size_t>(uni(0, 7))];
      if (coin(0.2)) w.journal = "X0";  // typed non-journal outlet with a venue id
    }
    external_items.push_back(w.id);
    c.metadata.push_back(std::move(w));
  }

  const int n_works = uni(5, 60);
  std::vector<std::string> work_ids;
  for (int i = 0; i < n_works; ++i) work_ids.push_back("W" + std::to_string(i));
  std::size_t budget = static_cast<std::size_t>(uni(10, static_cast<int>(max_refs)));
  for (int i = 0; i < n_works; ++i) {
    RawWork w;
    w.id = work_ids[static_cast<std::size_t>(i)];
    const int r = uni(0, 99);
    if (r < 3) {
      w.journal = "";
    } else if (r < 6) {
      w.journal = "ZZ";  // not in registry
    } else {
      w.journal = c.journals[static_cast<std::size_t>(uni(0, n_journals - 1))].id;
    }
    if (!coin(0.05)) w.year = years[static_cast<std::size_t>(uni(0, static_cast<int>(years.size()) - 1))];
    if (coin(0.1)) w.type = journal_types[static_cast<std::size_t>(uni(0, 3))];
    const int n_refs = std::min<int>(uni(0, 25), static_cast<int>(budget));
    for (int k = 0; k < n_refs; ++k) {
      const int kind = uni(0, 99);
      if (kind < 45) {
        w.refs.push_back(work_ids[static_cast<std::size_t>(uni(0, n_works - 1))]);
      } else if (kind < 85) {
        w.refs.push_back(external_items[static_cast<std::size_t>(uni(0, n_items - 1))]);
      } else if (kind < 92) {
        w.refs.push_back("U" + std::to_string(uni(0, 20)));  // unresolved
      } else if (kind < 96) {
        w.refs.push_back(w.id);
      } else if (!w.refs.empty()) {
        w.refs.push_back(w.refs.front());  // duplicate
      }
    }
    budget -= std::min<std::size_t>(budget, w.refs.size());
    c.works.push_back(std::move(w));
  }
  if (coin(0.3) && !c.works.empty()) c.works.push_back(c.works.front());  // duplicate work line
  return c;
}

// ---------------------------------------------------------------------------
// Reference implementation over raw edges.

enum class Outlet { journal, book, conference, repository };

struct Edge {
  std::string period;
  std::string citing_work;
  std::string citing_journal;
  std::string cited_journal;  // empty unless a journal outlet with a venue
  Outlet outlet;
};

class Model {
 public:
  explicit Model(const RawCorpus& c) : c_(c) {
    std::map<int, std::size_t> sizes;
    for (const auto& j : c.journals) {
      journals_[j.id] = &j;
      if (j.cluster) ++sizes[*j.cluster];
    }
    for (const auto& [id, label] : c.clusters) {
      if (sizes[id] >= c.min_cluster_size) admitted_.insert(id);
    }
    // Venue lookup: first line with the id wins, citing stream first.
    for (const auto* stream : {&c.works, &c.metadata}) {
      for (const auto& w : *stream) venue_.emplace(w.id, &w);
    }
    std::set<std::string> seen;
    for (const auto& w : c.works) {
      if (w.journal.empty() || !journals_.count(w.journal) || !w.year) continue;
      std::string period;
      for (const auto& p : c.periods) {
        if (*w.year >= p.start && *w.year <= p.end) period = p.id;
      }
      if (period.empty() || !seen.insert(w.id).second) continue;
      stored_.push_back(&w);
      period_of_[w.id] = period;
      std::set<std::string> refs(w.refs.begin(), w.refs.end());
      for (const auto& r : refs) edges_.push_back(classify(period, w, r));
    }
  }

  const std::vector<Edge>& edges() const { return edges_; }

  int cluster_of(const std::string& journal) const {
    auto it = journals_.find(journal);
    if (it == journals_.end() || !it->second->cluster || !admitted_.count(*it->second->cluster)) return 0;
    return *it->second->cluster;
  }

  bool member(const std::string& scheme, const std::string& journal) const {
    auto it = journals_.find(journal);
    if (it != journals_.end()) return it->second->member.at(scheme);
    auto l = c_.lists.find(scheme);
    return l != c_.lists.end() && l->second.count(journal);
  }

  bool in_registry(const std::string& journal) const { return journals_.count(journal) > 0; }
  const std::set<int>& admitted() const { return admitted_; }

  // Citing edges of a view: the citing journal must be a member under the
  // citing scheme.
  std::vector<const Edge*> view_edges(const std::string& citing_scheme, const std::string& period) const {
    std::vector<const Edge*> out;
    for (const auto& e : edges_) {
      if (e.period == period && member(citing_scheme, e.citing_journal)) out.push_back(&e);
    }
    return out;
  }

  bool flag(const Edge& e, int type, const std::string& cited_scheme) const {
    if (e.outlet != Outlet::journal || e.cited_journal.empty() || !member(cited_scheme, e.cited_journal)) return false;
    switch (type) {
      case 1: return e.cited_journal == e.citing_journal;
      case 2: return cluster_of(e.cited_journal) != 0 && cluster_of(e.cited_journal) == cluster_of(e.citing_journal);
      case 3: return cluster_of(e.cited_journal) != 0;
      case 4: return true;
    }
    return false;
  }

  // Scope: "FIELD", a cluster id, or a journal id.
  bool in_scope(const Edge& e, char granularity, const std::string& scope) const {
    if (granularity == 'f') return true;
    if (granularity == 'c') return cluster_of(e.citing_journal) == std::stoi(scope);
    return e.citing_journal == scope;
  }

  std::pair<std::uint64_t, std::uint64_t> share(const std::string& citing, const std::string& cited, char g,
                                                const std::string& scope, int type, const std::string& period,
                                                bool journal_only) const {
    std::uint64_t S = 0, R = 0;
    for (const auto* e : view_edges(citing, period)) {
      if (!in_scope(*e, g, scope)) continue;
      if (journal_only && e->outlet != Outlet::journal) continue;
      ++R;
      if (flag(*e, type, cited)) ++S;
    }
    return {S, R};
  }

  // Citations received by a scope from the view's citing set; SC counts
  // those coming from the scope itself.
  std::pair<std::uint64_t, std::uint64_t> self_impact(const std::string& citing, char g, const std::string& scope,
                                                      const std::string& period) const {
    std::uint64_t SC = 0, C = 0;
    for (const auto* e : view_edges(citing, period)) {
      if (e->cited_journal.empty()) continue;
      if (g == 'c') {
        const int k = std::stoi(scope);
        if (cluster_of(e->cited_journal) != k) continue;
        ++C;
        if (cluster_of(e->citing_journal) == k) ++SC;
      } else {
        if (e->cited_journal != scope) continue;
        ++C;
        if (e->citing_journal == scope) ++SC;
      }
    }
    return {SC, C};
  }

  std::pair<std::uint64_t, std::uint64_t> received_within_cluster(const std::string& citing,
                                                                  const std::string& journal,
                                                                  const std::string& period) const {
    std::uint64_t within = 0, total = 0;
    const int k = cluster_of(journal);
    for (const auto* e : view_edges(citing, period)) {
      if (e->cited_journal != journal) continue;
      ++total;
      if (k != 0 && cluster_of(e->citing_journal) == k) ++within;
    }
    return {within, total};
  }

  // Flow from entity a to entity b and a's reference total.
  std::uint64_t flow(const std::string& citing, char g, const std::string& a, const std::string& b,
                     const std::string& period) const {
    std::uint64_t n = 0;
    for (const auto* e : view_edges(citing, period)) {
      if (e->cited_journal.empty()) continue;
      if (g == 'c') {
        if (cluster_of(e->citing_journal) == std::stoi(a) && cluster_of(e->cited_journal) == std::stoi(b)) ++n;
      } else if (e->citing_journal == a && e->cited_journal == b && in_registry(b)) {
        ++n;
      }
    }
    return n;
  }

  std::uint64_t total(const std::string& citing, char g, const std::string& a, const std::string& period,
                      bool journal_only) const {
    std::uint64_t n = 0;
    for (const auto* e : view_edges(citing, period)) {
      if (journal_only && e->outlet != Outlet::journal) continue;
      if (in_scope(*e, g, a)) ++n;
    }
    return n;
  }

  Ratio ra(const std::string& citing, char g, const std::string& a, const std::string& b, const std::string& period,
           bool journal_only) const {
    const auto ta = total(citing, g, a, period, journal_only);
    const auto tb = total(citing, g, b, period, journal_only);
    return Ratio::of_counts(flow(citing, g, a, b, period), ta) - Ratio::of_counts(flow(citing, g, b, a, period), tb);
  }

  std::set<std::string> active_journals(const std::string& citing, const std::string& period) const {
    std::set<std::string> out;
    for (const auto* w : stored_) {
      if (period_of_.at(w->id) == period && member(citing, w->journal)) out.insert(w->journal);
    }
    return out;
  }

  std::array<std::uint64_t, 4> outlets(const std::string& citing, const std::string& period) const {
    std::array<std::uint64_t, 4> n{};
    for (const auto* e : view_edges(citing, period)) ++n[static_cast<std::size_t>(e->outlet)];
    return n;
  }

 private:
  static Outlet outlet_of(const std::string& type, bool has_journal) {
    static const std::map<std::string, Outlet> table = {
        {"journal", Outlet::journal},       {"article", Outlet::journal},        {"review", Outlet::journal},
        {"book", Outlet::book},             {"book-chapter", Outlet::book},      {"proceedings", Outlet::conference},
        {"conference", Outlet::conference}, {"repository", Outlet::repository}, {"preprint", Outlet::repository},
        {"other", Outlet::repository},      {"dataset", Outlet::repository}};
    auto it = table.find(type);
    if (it != table.end()) return it->second;
    return has_journal ? Outlet::journal : Outlet::repository;
  }

  Edge classify(const std::string& period, const RawWork& w, const std::string& ref) const {
    Edge e{period, w.id, w.journal, "", Outlet::repository};
    auto it = venue_.find(ref);
    if (it == venue_.end()) return e;
    const auto* v = it->second;
    e.outlet = outlet_of(v->type, !v->journal.empty());
    if (e.outlet == Outlet::journal) e.cited_journal = v->journal;
    return e;
  }

  const RawCorpus& c_;
  std::map<std::string, const RawJournal*> journals_;
  std::set<int> admitted_;
  std::map<std::string, const RawWork*> venue_;
  std::vector<const RawWork*> stored_;
  std::map<std::string, std::string> period_of_;
  std::vector<Edge> edges_;
};

}  // namespace oracle
