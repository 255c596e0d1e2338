#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "refflow/corpus.hpp"
#include "refflow/registry.hpp"

namespace refflow {

// A classification scheme as applied to one cube slice. Citing journals are
// filtered by `citing_scheme`; cited-side field membership comes from
// `cited_scheme`. The two are equal except for explicit mixed-scheme runs.
struct SchemeView {
  std::string id;
  std::string citing_scheme;
  std::string cited_scheme;

  static SchemeView plain(const std::string& scheme) { return {scheme, scheme, scheme}; }
  static SchemeView mixed(const std::string& citing, const std::string& cited) {
    return {citing == cited ? citing : citing + ">" + cited, citing, cited};
  }

  friend bool operator==(const SchemeView&, const SchemeView&) = default;
};

inline std::vector<SchemeView> plain_views(const Registry& registry) {
  std::vector<SchemeView> views;
  for (const auto& s : registry.schemes()) views.push_back(SchemeView::plain(s));
  return views;
}

enum class IndicatorType : int { journal_self = 1, within_cluster = 2, in_any_cluster = 3, within_field = 4 };

inline constexpr IndicatorType kIndicatorTypes[] = {IndicatorType::journal_self, IndicatorType::within_cluster,
                                                    IndicatorType::in_any_cluster, IndicatorType::within_field};

inline constexpr std::uint8_t flag_bit(IndicatorType t) noexcept {
  return static_cast<std::uint8_t>(1u << (static_cast<int>(t) - 1));
}

inline std::string_view to_string(IndicatorType t) {
  switch (t) {
    case IndicatorType::journal_self: return "journal_self";
    case IndicatorType::within_cluster: return "within_cluster";
    case IndicatorType::in_any_cluster: return "in_any_cluster";
    case IndicatorType::within_field: return "within_field";
  }
  return "";
}

struct ClassifiedReference {
  std::string period_id;
  std::string citing_work_id;
  std::string citing_journal_id;
  ClusterId citing_cluster = kNoCluster;
  std::string cited_work_id;
  std::string cited_journal_id;  // empty when unresolved or not a journal outlet
  ClusterId cited_cluster = kNoCluster;
  OutletType outlet = OutletType::repository;
  std::uint8_t flags = 0;
  bool self_work = false;

  bool has(IndicatorType t) const noexcept { return (flags & flag_bit(t)) != 0; }
};

// All four flags require the cited journal to be a field member under the
// view's cited scheme; clusters only count when admitted. Never fails:
// unresolved metadata yields no journal and no flags.
inline ClassifiedReference classify_reference(const WorkRecord& citing, std::string_view cited_work_id,
                                              const VenueInfo& cited, const Registry& registry,
                                              const SchemeView& view) {
  ClassifiedReference ref;
  ref.period_id = citing.period_id;
  ref.citing_work_id = citing.id;
  ref.citing_journal_id = citing.journal_id;
  ref.citing_cluster = registry.admitted_cluster(citing.journal_id);
  ref.cited_work_id = std::string(cited_work_id);
  ref.outlet = cited.outlet;
  ref.self_work = cited_work_id == citing.id;
  if (cited.outlet != OutletType::journal || cited.journal_id.empty()) return ref;

  ref.cited_journal_id = cited.journal_id;
  ref.cited_cluster = registry.admitted_cluster(cited.journal_id);
  if (!registry.is_member(view.cited_scheme, cited.journal_id)) return ref;

  ref.flags |= flag_bit(IndicatorType::within_field);
  if (ref.cited_cluster != kNoCluster) ref.flags |= flag_bit(IndicatorType::in_any_cluster);
  if (ref.cited_cluster != kNoCluster && ref.cited_cluster == ref.citing_cluster) {
    ref.flags |= flag_bit(IndicatorType::within_cluster);
  }
  if (cited.journal_id == citing.journal_id) ref.flags |= flag_bit(IndicatorType::journal_self);
  return ref;
}

}  // namespace refflow
