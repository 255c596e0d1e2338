#pragma once

// Journal, cluster, period and classification-scheme registries.
//
// The journal registry lists the citing journals. Each journal may belong to
// one cluster and carries a boolean membership per classification scheme
// ("is this an economics journal under scheme X"). Journals that only appear
// on the cited side get their scheme membership from external id lists.

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "refflow/csv.hpp"
#include "refflow/error.hpp"

namespace refflow {

using ClusterId = int;
inline constexpr ClusterId kNoCluster = 0;
inline constexpr std::size_t kDefaultMinClusterSize = 10;

struct PeriodWindow {
  std::string id;
  int year_start = 0;
  int year_end = 0;

  bool contains(int year) const noexcept { return year >= year_start && year <= year_end; }
  friend bool operator==(const PeriodWindow&, const PeriodWindow&) = default;
};

// Validates ids, bounds and pairwise disjointness. Bounds are inclusive.
inline std::vector<PeriodWindow> validate_periods(std::vector<PeriodWindow> periods) {
  std::set<std::string> seen;
  for (const auto& p : periods) {
    if (p.id.empty()) throw DataError("period with empty id");
    if (!seen.insert(p.id).second) throw DataError("duplicate period id '" + p.id + "'");
    if (p.year_start > p.year_end) throw DataError("period '" + p.id + "' has year_start > year_end");
  }
  for (std::size_t i = 0; i < periods.size(); ++i) {
    for (std::size_t j = i + 1; j < periods.size(); ++j) {
      const auto& a = periods[i];
      const auto& b = periods[j];
      if (a.year_start <= b.year_end && b.year_start <= a.year_end) {
        throw DataError("periods '" + a.id + "' and '" + b.id + "' overlap");
      }
    }
  }
  return periods;
}

inline int parse_int(std::string_view text, std::string_view what) {
  std::string s(text);
  s.erase(std::remove_if(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); }), s.end());
  try {
    std::size_t pos = 0;
    const int v = std::stoi(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw DataError(std::string(what) + ": not an integer: '" + std::string(text) + "'");
  }
}

inline std::vector<PeriodWindow> load_periods(const std::filesystem::path& path) {
  const auto table = csv::read_file(path);
  const auto id = table.require_column("period_id", path.string());
  const auto start = table.require_column("year_start", path.string());
  const auto end = table.require_column("year_end", path.string());
  std::vector<PeriodWindow> out;
  for (const auto& row : table.rows()) {
    out.push_back({row[id], parse_int(row[start], "year_start"), parse_int(row[end], "year_end")});
  }
  return validate_periods(std::move(out));
}

// Where a scheme's membership comes from: a 0/1 registry column, an external
// id list, or both (column for registry journals, list for everything else).
struct SchemeConfig {
  std::string id;
  std::optional<std::string> column;
  std::optional<std::filesystem::path> list_path;
  std::string description;
};

inline std::vector<SchemeConfig> default_schemes() {
  return {
      {"econlit", "econlit", std::nullopt, "EconLit-indexed journals"},
      {"truc", "truc", std::nullopt, "restrictive external economics list"},
      {"openalex_econ", "openalex_econ", std::nullopt, "broad topic-based classification"},
  };
}

struct JournalRecord {
  std::string id;
  std::string name;
  std::optional<ClusterId> cluster;
  std::map<std::string, bool> field_membership;
};

struct ClusterRecord {
  ClusterId id = kNoCluster;
  std::string label;
  std::size_t member_count = 0;
  bool admitted = false;  // member_count >= min cluster size
};

// Reads an external scheme list: one journal id per line, '#' comments.
inline std::set<std::string> read_id_list(std::istream& in) {
  std::set<std::string> ids;
  std::string line;
  while (std::getline(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    auto last = line.find_last_not_of(" \t\r");
    ids.insert(line.substr(first, last - first + 1));
  }
  return ids;
}

struct RegistryOptions {
  std::size_t min_cluster_size = kDefaultMinClusterSize;
};

class Registry {
 public:
  using Options = RegistryOptions;

  Registry() = default;

  // `external_lists` maps scheme id -> externally supplied member ids. A scheme
  // without a registry column takes registry membership from its list too.
  Registry(std::vector<JournalRecord> journals, std::vector<std::pair<ClusterId, std::string>> clusters,
           std::vector<std::string> scheme_ids, std::map<std::string, std::set<std::string>> external_lists = {},
           Options options = {})
      : schemes_(std::move(scheme_ids)), external_(std::move(external_lists)), options_(options) {
    for (const auto& s : schemes_) {
      if (std::count(schemes_.begin(), schemes_.end(), s) > 1) throw DataError("duplicate scheme id '" + s + "'");
    }
    for (auto& [id, label] : clusters) {
      if (id <= 0) throw DataError("cluster id must be a positive integer, got " + std::to_string(id));
      if (clusters_.count(id)) throw DataError("duplicate cluster id " + std::to_string(id));
      clusters_[id] = ClusterRecord{id, std::move(label), 0, false};
    }
    std::sort(journals.begin(), journals.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    for (std::size_t i = 0; i < journals.size(); ++i) {
      auto& j = journals[i];
      if (j.id.empty()) throw DataError("journal with empty journal_id");
      if (i > 0 && journals[i - 1].id == j.id) throw DataError("duplicate journal_id '" + j.id + "'");
      if (j.cluster) {
        auto it = clusters_.find(*j.cluster);
        if (it == clusters_.end()) {
          throw DataError("journal '" + j.id + "' references undeclared cluster " + std::to_string(*j.cluster));
        }
        ++it->second.member_count;
      }
      for (const auto& s : schemes_) {
        if (!j.field_membership.count(s)) {
          auto ext = external_.find(s);
          if (ext == external_.end()) {
            throw DataError("journal '" + j.id + "' has no membership for scheme '" + s + "'");
          }
          j.field_membership[s] = ext->second.count(j.id) > 0;
        }
      }
      index_.emplace(j.id, i);
    }
    for (auto& [id, c] : clusters_) c.admitted = c.member_count >= options_.min_cluster_size;
    journals_ = std::move(journals);
  }

  const std::vector<JournalRecord>& journals() const noexcept { return journals_; }
  const std::map<ClusterId, ClusterRecord>& clusters() const noexcept { return clusters_; }
  const std::vector<std::string>& schemes() const noexcept { return schemes_; }
  std::size_t min_cluster_size() const noexcept { return options_.min_cluster_size; }

  bool has_scheme(std::string_view s) const {
    return std::find(schemes_.begin(), schemes_.end(), s) != schemes_.end();
  }
  void require_scheme(std::string_view s) const {
    if (!has_scheme(s)) throw DataError("unknown scheme '" + std::string(s) + "'");
  }

  const JournalRecord* find(std::string_view id) const {
    auto it = index_.find(std::string(id));
    return it == index_.end() ? nullptr : &journals_[it->second];
  }
  bool contains(std::string_view id) const { return find(id) != nullptr; }

  // Cluster of a registry journal if that cluster is admitted to analysis.
  ClusterId admitted_cluster(std::string_view journal_id) const {
    const auto* j = find(journal_id);
    if (!j || !j->cluster) return kNoCluster;
    const auto& c = clusters_.at(*j->cluster);
    return c.admitted ? c.id : kNoCluster;
  }

  // Scheme membership for any journal id, registry or cited-only.
  bool is_member(std::string_view scheme, std::string_view journal_id) const {
    if (const auto* j = find(journal_id)) {
      auto it = j->field_membership.find(std::string(scheme));
      return it != j->field_membership.end() && it->second;
    }
    auto ext = external_.find(std::string(scheme));
    return ext != external_.end() && ext->second.count(std::string(journal_id)) > 0;
  }

  const std::map<std::string, std::set<std::string>>& external_lists() const noexcept { return external_; }

  // List entries that are not registry ids but equal a registry journal name
  // (case-insensitive). Reported only; never auto-matched.
  std::vector<std::string> name_fallback_report() const {
    std::map<std::string, std::string> by_name;
    for (const auto& j : journals_) by_name.emplace(lower(j.name), j.id);
    std::vector<std::string> notes;
    for (const auto& [scheme, ids] : external_) {
      for (const auto& entry : ids) {
        if (contains(entry)) continue;
        if (auto it = by_name.find(lower(entry)); it != by_name.end()) {
          notes.push_back(scheme + ": list entry '" + entry + "' is not a journal_id but matches the name of '" +
                          it->second + "'");
        }
      }
    }
    return notes;
  }

 private:
  static std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
  }

  std::vector<JournalRecord> journals_;
  std::map<std::string, std::size_t> index_;
  std::map<ClusterId, ClusterRecord> clusters_;
  std::vector<std::string> schemes_;
  std::map<std::string, std::set<std::string>> external_;
  Options options_;
};

inline bool parse_flag(std::string_view text, std::string_view what) {
  if (text == "1" || text == "true" || text == "TRUE") return true;
  if (text == "0" || text == "false" || text == "FALSE" || text.empty()) return false;
  throw DataError(std::string(what) + ": expected 0/1, got '" + std::string(text) + "'");
}

inline Registry load_registry(const std::filesystem::path& journal_csv, const std::filesystem::path& cluster_csv,
                              const std::vector<SchemeConfig>& schemes, Registry::Options options = {}) {
  std::vector<std::pair<ClusterId, std::string>> clusters;
  {
    std::ifstream in(cluster_csv, std::ios::binary);
    if (!in) throw DataError("cannot open " + cluster_csv.string());
    if (in.peek() != std::ifstream::traits_type::eof()) {
      const auto table = csv::parse(in, cluster_csv.string());
      const auto id = table.require_column("cluster_id", cluster_csv.string());
      const auto label = table.require_column("label", cluster_csv.string());
      for (const auto& row : table.rows()) clusters.emplace_back(parse_int(row[id], "cluster_id"), row[label]);
    }
  }

  std::map<std::string, std::set<std::string>> lists;
  for (const auto& s : schemes) {
    if (!s.list_path) continue;
    std::ifstream in(*s.list_path);
    if (!in) throw DataError("cannot open scheme list " + s.list_path->string());
    lists[s.id] = read_id_list(in);
  }

  const auto table = csv::read_file(journal_csv);
  const auto ctx = journal_csv.string();
  const auto id_col = table.require_column("journal_id", ctx);
  const auto name_col = table.require_column("name", ctx);
  const auto cluster_col = table.require_column("cluster_id", ctx);
  std::vector<std::pair<std::string, std::size_t>> scheme_cols;
  std::vector<std::string> missing;
  for (const auto& s : schemes) {
    if (!s.column) {
      if (!s.list_path) throw DataError("scheme '" + s.id + "' has neither a registry column nor a list file");
      continue;
    }
    if (auto c = table.column(*s.column)) {
      scheme_cols.emplace_back(s.id, *c);
    } else {
      missing.push_back(*s.column);
    }
  }
  if (!missing.empty()) {
    std::string msg = ctx + ": missing scheme column(s):";
    for (const auto& m : missing) msg += " '" + m + "'";
    throw DataError(msg);
  }

  std::vector<JournalRecord> journals;
  journals.reserve(table.size());
  for (const auto& row : table.rows()) {
    JournalRecord j;
    j.id = row[id_col];
    j.name = row[name_col];
    if (!row[cluster_col].empty()) j.cluster = parse_int(row[cluster_col], "cluster_id");
    for (const auto& [scheme, col] : scheme_cols) j.field_membership[scheme] = parse_flag(row[col], scheme);
    journals.push_back(std::move(j));
  }
  std::vector<std::string> ids;
  for (const auto& s : schemes) ids.push_back(s.id);
  return Registry(std::move(journals), std::move(clusters), std::move(ids), std::move(lists), options);
}

}  // namespace refflow
