#pragma once

// CountsCube: the exhaustive tally of classified references from which every
// indicator, self-impact value and RA matrix is derived.
//
// Cells are keyed by (period, scheme view, citing cluster, citing journal,
// cited cluster, cited journal, outlet type). The cube also carries the
// journal table (cluster + scheme membership of every citing and cited
// journal) and a per-period census, so it is self-contained: downstream
// commands need only the snapshot file.
//
// Snapshot format (text, byte-stable for identical inputs):
//
//   # refflow-cube v1
//   [schemes]   scheme_id
//   [views]     view_id,citing_scheme,cited_scheme
//   [periods]   period_id,year_start,year_end,works,references,self_work_references
//   [clusters]  cluster_id,label,member_count,admitted
//   [journals]  journal_id,in_registry,cluster_id,membership
//   [census]    period_id,journal_id,works,citations_received
//   [cells]     period_id,view_id,citing_cluster,citing_journal,cited_cluster,cited_journal,outlet,flags,count
//
// Each section is a marker line, a CSV header, then CSV rows in sorted order.
// `membership` is one 0/1 digit per scheme in [schemes] order; cluster ids of
// 0 are written empty and mean "outside any admitted cluster".

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <tuple>
#include <utility>
#include <vector>

#include "refflow/classify.hpp"
#include "refflow/corpus.hpp"
#include "refflow/csv.hpp"
#include "refflow/error.hpp"
#include "refflow/registry.hpp"

namespace refflow {

inline constexpr std::string_view kCubeMagic = "# refflow-cube v1";

struct CellKey {
  std::string period_id;
  std::string view_id;
  ClusterId citing_cluster = kNoCluster;
  std::string citing_journal;
  ClusterId cited_cluster = kNoCluster;
  std::string cited_journal;
  OutletType outlet = OutletType::journal;

  auto tie() const {
    return std::tie(period_id, view_id, citing_cluster, citing_journal, cited_cluster, cited_journal, outlet);
  }
  friend bool operator<(const CellKey& a, const CellKey& b) { return a.tie() < b.tie(); }
  friend bool operator==(const CellKey& a, const CellKey& b) { return a.tie() == b.tie(); }
};

struct CellValue {
  std::uint8_t flags = 0;
  std::uint64_t count = 0;

  friend bool operator==(const CellValue&, const CellValue&) = default;
};

using CellMap = std::map<CellKey, CellValue>;

struct CubeJournal {
  bool in_registry = false;
  ClusterId cluster = kNoCluster;  // registry cluster, admitted or not
  std::string membership;          // one '0'/'1' per scheme
};

struct CensusEntry {
  std::uint64_t works = 0;
  std::uint64_t citations_received = 0;  // from every registry citing journal, journal outlets only
};

struct CubePeriod {
  PeriodWindow window;
  std::uint64_t works = 0;
  std::uint64_t references = 0;
  std::uint64_t self_work_references = 0;
};

struct CubeMeta {
  std::vector<std::string> schemes;
  std::vector<SchemeView> views;
  std::vector<CubePeriod> periods;
  std::map<ClusterId, ClusterRecord> clusters;
  std::map<std::string, CubeJournal> journals;
  std::map<std::string, std::map<std::string, CensusEntry>> census;  // period -> journal -> entry
};

// Reference tallies of one citing scope.
struct ScopeTally {
  std::array<std::uint64_t, 4> self{};  // indexed by IndicatorType - 1
  std::array<std::uint64_t, 4> outlets{};
  std::uint64_t refs_all = 0;
  std::uint64_t refs_journal = 0;

  std::uint64_t numerator(IndicatorType t) const { return self[static_cast<std::size_t>(t) - 1]; }

  void add(std::uint8_t flags, OutletType outlet, std::uint64_t n) {
    for (auto t : kIndicatorTypes) {
      if (flags & flag_bit(t)) self[static_cast<std::size_t>(t) - 1] += n;
    }
    outlets[static_cast<std::size_t>(outlet)] += n;
    refs_all += n;
    if (outlet == OutletType::journal) refs_journal += n;
  }

  friend bool operator==(const ScopeTally&, const ScopeTally&) = default;
};

// Citations received by a cited scope from the citing set.
struct ReceivedTally {
  std::uint64_t total = 0;
  std::uint64_t from_self = 0;
  std::uint64_t from_same_cluster = 0;

  friend bool operator==(const ReceivedTally&, const ReceivedTally&) = default;
};

struct PeriodTallies {
  ScopeTally field;
  std::map<ClusterId, ScopeTally> clusters;
  std::map<std::string, ScopeTally> journals;
  std::map<ClusterId, ReceivedTally> cluster_received;
  std::map<std::string, ReceivedTally> journal_received;
  std::map<std::pair<ClusterId, ClusterId>, std::uint64_t> cluster_flows;
  std::map<std::pair<std::string, std::string>, std::uint64_t> journal_flows;  // registry journals only
};

class CountsCube {
 public:
  CountsCube() = default;

  CountsCube(CubeMeta meta, CellMap cells) : meta_(std::move(meta)), cells_(std::move(cells)) {
    for (const auto& v : meta_.views) {
      scheme_index(v.citing_scheme);
      scheme_index(v.cited_scheme);
      for (const auto& p : meta_.periods) tallies_[{v.id, p.window.id}];
    }
    for (const auto& [id, j] : meta_.journals) {
      if (j.membership.size() != meta_.schemes.size()) {
        throw DataError("cube: journal '" + id + "' membership width does not match scheme count");
      }
    }
    for (const auto& [key, value] : cells_) {
      auto it = tallies_.find({key.view_id, key.period_id});
      if (it == tallies_.end()) {
        throw DataError("cube: cell references unknown view/period '" + key.view_id + "'/'" + key.period_id + "'");
      }
      accumulate(it->second, key, value);
    }
  }

  const CubeMeta& meta() const noexcept { return meta_; }
  const CellMap& cells() const noexcept { return cells_; }

  const SchemeView& view(std::string_view id) const {
    for (const auto& v : meta_.views) {
      if (v.id == id) return v;
    }
    throw DataError("cube has no scheme view '" + std::string(id) + "'");
  }
  const SchemeView& default_view() const {
    if (meta_.views.empty()) throw DataError("cube has no scheme views");
    return meta_.views.front();
  }
  bool has_view(std::string_view id) const {
    return std::any_of(meta_.views.begin(), meta_.views.end(), [&](const auto& v) { return v.id == id; });
  }

  const CubePeriod& period(std::string_view id) const {
    for (const auto& p : meta_.periods) {
      if (p.window.id == id) return p;
    }
    throw DataError("cube has no period '" + std::string(id) + "'");
  }

  const PeriodTallies& tallies(std::string_view view_id, std::string_view period_id) const {
    view(view_id);
    period(period_id);
    return tallies_.at({std::string(view_id), std::string(period_id)});
  }

  std::uint64_t total(std::string_view view_id, std::string_view period_id) const {
    return tallies(view_id, period_id).field.refs_all;
  }

  std::size_t scheme_index(std::string_view scheme) const {
    for (std::size_t i = 0; i < meta_.schemes.size(); ++i) {
      if (meta_.schemes[i] == scheme) return i;
    }
    throw DataError("unknown scheme '" + std::string(scheme) + "'");
  }

  bool is_member(std::string_view scheme, std::string_view journal) const {
    const auto idx = scheme_index(scheme);
    auto it = meta_.journals.find(std::string(journal));
    return it != meta_.journals.end() && it->second.membership[idx] == '1';
  }

  ClusterId admitted_cluster(std::string_view journal) const {
    auto it = meta_.journals.find(std::string(journal));
    if (it == meta_.journals.end() || it->second.cluster == kNoCluster) return kNoCluster;
    auto c = meta_.clusters.find(it->second.cluster);
    return (c != meta_.clusters.end() && c->second.admitted) ? c->first : kNoCluster;
  }

  std::vector<ClusterId> admitted_clusters() const {
    std::vector<ClusterId> out;
    for (const auto& [id, c] : meta_.clusters) {
      if (c.admitted) out.push_back(id);
    }
    return out;
  }

  std::vector<std::string> cluster_journals(ClusterId cluster) const {
    std::vector<std::string> out;
    for (const auto& [id, j] : meta_.journals) {
      if (j.in_registry && j.cluster == cluster) out.push_back(id);
    }
    return out;
  }

  // Registry journals with >= 1 work in the period that pass the view's
  // citing-scheme filter, sorted by id.
  std::vector<std::string> active_citing_journals(std::string_view view_id, std::string_view period_id) const {
    const auto& v = view(view_id);
    period(period_id);
    std::vector<std::string> out;
    auto it = meta_.census.find(std::string(period_id));
    if (it == meta_.census.end()) return out;
    for (const auto& [journal, entry] : it->second) {
      auto j = meta_.journals.find(journal);
      if (entry.works > 0 && j != meta_.journals.end() && j->second.in_registry &&
          is_member(v.citing_scheme, journal)) {
        out.push_back(journal);
      }
    }
    return out;
  }

  void write(std::ostream& os) const;
  static CountsCube read(std::istream& in);

 private:
  void accumulate(PeriodTallies& t, const CellKey& k, const CellValue& v) const {
    t.field.add(v.flags, k.outlet, v.count);
    t.journals[k.citing_journal].add(v.flags, k.outlet, v.count);
    if (k.citing_cluster != kNoCluster) t.clusters[k.citing_cluster].add(v.flags, k.outlet, v.count);
    if (k.cited_journal.empty()) return;

    auto& jr = t.journal_received[k.cited_journal];
    jr.total += v.count;
    if (k.cited_journal == k.citing_journal) jr.from_self += v.count;
    if (k.cited_cluster != kNoCluster && k.cited_cluster == k.citing_cluster) jr.from_same_cluster += v.count;

    if (k.cited_cluster != kNoCluster) {
      auto& cr = t.cluster_received[k.cited_cluster];
      cr.total += v.count;
      if (k.cited_cluster == k.citing_cluster) {
        cr.from_self += v.count;
        cr.from_same_cluster += v.count;
      }
      if (k.citing_cluster != kNoCluster) t.cluster_flows[{k.citing_cluster, k.cited_cluster}] += v.count;
    }
    auto j = meta_.journals.find(k.cited_journal);
    if (j != meta_.journals.end() && j->second.in_registry) {
      t.journal_flows[{k.citing_journal, k.cited_journal}] += v.count;
    }
  }

  CubeMeta meta_;
  CellMap cells_;
  std::map<std::pair<std::string, std::string>, PeriodTallies> tallies_;
};

// Builds the cube from an ingested store. Works are partitioned into
// `threads` contiguous chunks whose partial cell maps are merged by summation,
// so the result does not depend on the thread count.
inline CountsCube build_counts_cube(const CorpusStore& store, const Registry& registry,
                                    std::vector<SchemeView> views = {}, unsigned threads = 1) {
  if (views.empty()) views = plain_views(registry);
  for (const auto& v : views) {
    registry.require_scheme(v.citing_scheme);
    registry.require_scheme(v.cited_scheme);
  }
  {
    std::set<std::string> ids;
    for (const auto& v : views) {
      if (!ids.insert(v.id).second) throw DataError("duplicate scheme view '" + v.id + "'");
    }
  }

  CubeMeta meta;
  meta.schemes = registry.schemes();
  meta.views = views;
  meta.clusters = registry.clusters();
  for (const auto& p : store.periods()) {
    const auto& t = store.totals(p.id);
    meta.periods.push_back({p, t.works, t.references, t.self_work_references});
    meta.census[p.id];
  }

  auto membership_of = [&](const std::string& journal) {
    std::string bits;
    for (const auto& s : meta.schemes) bits += registry.is_member(s, journal) ? '1' : '0';
    return bits;
  };
  for (const auto& j : registry.journals()) {
    meta.journals[j.id] = CubeJournal{true, j.cluster.value_or(kNoCluster), membership_of(j.id)};
  }
  for (const auto& w : store.works()) {
    auto& period = meta.census[w.period_id];
    ++period[w.journal_id].works;
    for (const auto& ref : w.references) {
      const auto& venue = store.resolve(ref);
      if (venue.outlet != OutletType::journal || venue.journal_id.empty()) continue;
      ++period[venue.journal_id].citations_received;
      if (!meta.journals.count(venue.journal_id)) {
        meta.journals[venue.journal_id] = CubeJournal{false, kNoCluster, membership_of(venue.journal_id)};
      }
    }
  }

  const auto& works = store.works();
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(works.size(), 1))));
  std::vector<CellMap> partial(threads);
  auto scan = [&](unsigned part) {
    const std::size_t begin = works.size() * part / threads;
    const std::size_t end = works.size() * (part + 1) / threads;
    auto& cells = partial[part];
    for (std::size_t i = begin; i < end; ++i) {
      const auto& w = works[i];
      for (const auto& v : views) {
        if (!registry.is_member(v.citing_scheme, w.journal_id)) continue;
        for (const auto& ref : w.references) {
          const auto c = classify_reference(w, ref, store.resolve(ref), registry, v);
          CellKey key{c.period_id, v.id, c.citing_cluster, c.citing_journal_id, c.cited_cluster,
                      c.cited_journal_id, c.outlet};
          auto& cell = cells[key];
          cell.flags = c.flags;
          ++cell.count;
        }
      }
    }
  };
  if (threads == 1) {
    scan(0);
  } else {
    std::vector<std::thread> pool;
    for (unsigned p = 0; p < threads; ++p) pool.emplace_back(scan, p);
    for (auto& t : pool) t.join();
  }
  CellMap cells = std::move(partial.front());
  for (unsigned p = 1; p < threads; ++p) {
    for (auto& [key, value] : partial[p]) {
      auto& cell = cells[key];
      cell.flags = value.flags;
      cell.count += value.count;
    }
  }
  return CountsCube(std::move(meta), std::move(cells));
}

namespace detail {

inline std::string cluster_field(ClusterId c) { return c == kNoCluster ? std::string() : std::to_string(c); }

inline void section(std::ostream& os, std::string_view name, const csv::Row& header) {
  os << '[' << name << "]\n";
  csv::write_row(os, header);
}

inline std::uint64_t parse_count(const std::string& s, std::string_view what) {
  try {
    std::size_t pos = 0;
    const auto v = std::stoull(s, &pos);
    if (pos != s.size() || s.empty() || s[0] == '-') throw std::invalid_argument("bad");
    return v;
  } catch (const std::exception&) {
    throw DataError("cube: bad " + std::string(what) + " '" + s + "'");
  }
}

}  // namespace detail

inline void CountsCube::write(std::ostream& os) const {
  using detail::cluster_field;
  using detail::section;
  os << kCubeMagic << '\n';
  section(os, "schemes", {"scheme_id"});
  for (const auto& s : meta_.schemes) csv::write_row(os, {s});
  section(os, "views", {"view_id", "citing_scheme", "cited_scheme"});
  for (const auto& v : meta_.views) csv::write_row(os, {v.id, v.citing_scheme, v.cited_scheme});
  section(os, "periods", {"period_id", "year_start", "year_end", "works", "references", "self_work_references"});
  for (const auto& p : meta_.periods) {
    csv::write_row(os, {p.window.id, std::to_string(p.window.year_start), std::to_string(p.window.year_end),
                        std::to_string(p.works), std::to_string(p.references),
                        std::to_string(p.self_work_references)});
  }
  section(os, "clusters", {"cluster_id", "label", "member_count", "admitted"});
  for (const auto& [id, c] : meta_.clusters) {
    csv::write_row(os, {std::to_string(id), c.label, std::to_string(c.member_count), c.admitted ? "1" : "0"});
  }
  section(os, "journals", {"journal_id", "in_registry", "cluster_id", "membership"});
  for (const auto& [id, j] : meta_.journals) {
    csv::write_row(os, {id, j.in_registry ? "1" : "0", cluster_field(j.cluster), j.membership});
  }
  section(os, "census", {"period_id", "journal_id", "works", "citations_received"});
  for (const auto& [period, entries] : meta_.census) {
    for (const auto& [journal, e] : entries) {
      csv::write_row(os, {period, journal, std::to_string(e.works), std::to_string(e.citations_received)});
    }
  }
  section(os, "cells",
          {"period_id", "view_id", "citing_cluster", "citing_journal", "cited_cluster", "cited_journal", "outlet",
           "flags", "count"});
  for (const auto& [k, v] : cells_) {
    csv::write_row(os, {k.period_id, k.view_id, cluster_field(k.citing_cluster), k.citing_journal,
                        cluster_field(k.cited_cluster), k.cited_journal, std::string(to_string(k.outlet)),
                        std::to_string(v.flags), std::to_string(v.count)});
  }
}

inline CountsCube CountsCube::read(std::istream& in) {
  std::string magic;
  if (!std::getline(in, magic) || magic != kCubeMagic) throw DataError("cube: missing '# refflow-cube v1' header");

  std::map<std::string, std::vector<csv::Row>> sections;
  std::map<std::string, csv::Row> headers;
  std::string current;
  bool expect_header = false;
  csv::Row row;
  while (csv::read_record(in, row)) {
    if (row.size() == 1 && row[0].size() > 2 && row[0].front() == '[' && row[0].back() == ']') {
      current = row[0].substr(1, row[0].size() - 2);
      if (sections.count(current)) throw DataError("cube: duplicate section [" + current + "]");
      sections[current];
      expect_header = true;
      continue;
    }
    if (current.empty()) throw DataError("cube: data before first section");
    if (expect_header) {
      headers[current] = row;
      expect_header = false;
      continue;
    }
    if (row.size() != headers[current].size()) throw DataError("cube: bad field count in [" + current + "]");
    sections[current].push_back(row);
  }
  for (const char* name : {"schemes", "views", "periods", "clusters", "journals", "census", "cells"}) {
    if (!sections.count(name)) throw DataError(std::string("cube: missing section [") + name + "]");
  }
  auto cluster_of = [](const std::string& s) { return s.empty() ? kNoCluster : parse_int(s, "cluster_id"); };
  using detail::parse_count;

  CubeMeta meta;
  for (const auto& r : sections["schemes"]) meta.schemes.push_back(r[0]);
  for (const auto& r : sections["views"]) meta.views.push_back({r[0], r[1], r[2]});
  for (const auto& r : sections["periods"]) {
    meta.periods.push_back({{r[0], parse_int(r[1], "year_start"), parse_int(r[2], "year_end")},
                            parse_count(r[3], "works"),
                            parse_count(r[4], "references"),
                            parse_count(r[5], "self_work_references")});
  }
  for (const auto& r : sections["clusters"]) {
    const ClusterId id = parse_int(r[0], "cluster_id");
    meta.clusters[id] = ClusterRecord{id, r[1], parse_count(r[2], "member_count"), r[3] == "1"};
  }
  for (const auto& r : sections["journals"]) meta.journals[r[0]] = CubeJournal{r[1] == "1", cluster_of(r[2]), r[3]};
  for (const auto& p : meta.periods) meta.census[p.window.id];
  for (const auto& r : sections["census"]) {
    meta.census[r[0]][r[1]] = CensusEntry{parse_count(r[2], "works"), parse_count(r[3], "citations_received")};
  }
  CellMap cells;
  for (const auto& r : sections["cells"]) {
    CellKey k{r[0], r[1], cluster_of(r[2]), r[3], cluster_of(r[4]), r[5], parse_outlet(r[6])};
    const auto flags = parse_count(r[7], "flags");
    if (flags > 15) throw DataError("cube: bad flags '" + r[7] + "'");
    cells[std::move(k)] = CellValue{static_cast<std::uint8_t>(flags), parse_count(r[8], "count")};
  }
  return CountsCube(std::move(meta), std::move(cells));
}

inline std::string serialize(const CountsCube& cube) {
  std::ostringstream os;
  cube.write(os);
  return os.str();
}

}  // namespace refflow
