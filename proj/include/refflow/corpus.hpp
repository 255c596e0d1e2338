#pragma once

// Work ingestion: parses work-record JSONL into a period-stamped store of
// citing works with deduplicated references, plus a venue index that resolves
// any work id (citing or cited) to its journal and outlet type.

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "refflow/error.hpp"
#include "refflow/registry.hpp"

namespace refflow {

enum class OutletType : std::uint8_t { journal = 0, book = 1, conference = 2, repository = 3 };

inline constexpr std::array<OutletType, 4> kOutletTypes = {OutletType::journal, OutletType::book,
                                                           OutletType::conference, OutletType::repository};

inline std::string_view to_string(OutletType t) {
  switch (t) {
    case OutletType::journal: return "journal";
    case OutletType::book: return "book";
    case OutletType::conference: return "conference";
    case OutletType::repository: return "repository";
  }
  return "repository";
}

inline OutletType parse_outlet(std::string_view s) {
  for (auto t : kOutletTypes) {
    if (to_string(t) == s) return t;
  }
  throw DataError("unknown outlet type '" + std::string(s) + "'");
}

// Maps OpenAlex source types ("journal", "book series", "ebook platform",
// "conference", "repository", "other") and common work types onto the four
// outlet classes. Unrecognized or missing types fall back to journal when the
// record names a venue, and to repository ("other") when it does not.
inline OutletType classify_outlet_type(std::string_view type, bool has_journal) {
  static const std::set<std::string_view> journal = {"journal", "article", "review", "letter",
                                                     "editorial", "erratum", "note"};
  static const std::set<std::string_view> book = {"book", "book series", "book-series", "ebook platform",
                                                  "ebook-platform", "book-chapter", "monograph",
                                                  "reference-entry", "edited-book"};
  static const std::set<std::string_view> conference = {"conference", "proceedings", "proceedings-article"};
  static const std::set<std::string_view> repository = {"repository", "other", "preprint", "posted-content",
                                                        "dataset", "dissertation", "report"};
  if (journal.count(type)) return OutletType::journal;
  if (book.count(type)) return OutletType::book;
  if (conference.count(type)) return OutletType::conference;
  if (repository.count(type)) return OutletType::repository;
  return has_journal ? OutletType::journal : OutletType::repository;
}

// Cited-side resolution of a work id. journal_id is empty unless the outlet is
// a journal.
struct VenueInfo {
  std::string journal_id;
  OutletType outlet = OutletType::repository;
  bool resolved = false;

  friend bool operator==(const VenueInfo&, const VenueInfo&) = default;
};

struct WorkRecord {
  std::string id;
  std::string journal_id;
  int year = 0;
  std::string period_id;
  std::vector<std::string> references;  // sorted, unique
  bool cites_itself = false;
};

struct SkipReport {
  std::uint64_t lines = 0;
  std::uint64_t malformed = 0;
  std::uint64_t missing_journal = 0;
  std::uint64_t missing_year = 0;
  std::uint64_t outside_windows = 0;
  std::uint64_t not_in_registry = 0;
  std::uint64_t duplicate_works = 0;
  std::vector<std::size_t> malformed_lines;
};

struct PeriodTotals {
  std::uint64_t works = 0;
  std::uint64_t references = 0;
  std::uint64_t self_work_references = 0;
};

class CorpusStore {
 public:
  CorpusStore() = default;
  CorpusStore(std::vector<PeriodWindow> periods, std::vector<WorkRecord> works,
              std::map<std::string, VenueInfo> venues, SkipReport skips)
      : periods_(validate_periods(std::move(periods))),
        works_(std::move(works)),
        venues_(std::move(venues)),
        skips_(std::move(skips)) {
    std::sort(works_.begin(), works_.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    for (const auto& p : periods_) totals_[p.id];
    for (const auto& w : works_) {
      auto& t = totals_.at(w.period_id);
      ++t.works;
      t.references += w.references.size();
      t.self_work_references += w.cites_itself ? 1 : 0;
      active_[w.journal_id].insert(w.period_id);
    }
  }

  const std::vector<PeriodWindow>& periods() const noexcept { return periods_; }
  const std::vector<WorkRecord>& works() const noexcept { return works_; }
  const std::map<std::string, VenueInfo>& venues() const noexcept { return venues_; }
  const SkipReport& skips() const noexcept { return skips_; }

  const PeriodWindow& period(std::string_view id) const {
    for (const auto& p : periods_) {
      if (p.id == id) return p;
    }
    throw DataError("unknown period '" + std::string(id) + "'");
  }

  const PeriodTotals& totals(std::string_view period_id) const {
    auto it = totals_.find(std::string(period_id));
    if (it == totals_.end()) throw DataError("unknown period '" + std::string(period_id) + "'");
    return it->second;
  }

  // Unknown ids resolve to an unresolved repository ("other") venue.
  const VenueInfo& resolve(std::string_view work_id) const {
    static const VenueInfo unresolved{};
    auto it = venues_.find(std::string(work_id));
    return it == venues_.end() ? unresolved : it->second;
  }

  std::set<std::string> active_periods(std::string_view journal_id) const {
    auto it = active_.find(std::string(journal_id));
    return it == active_.end() ? std::set<std::string>{} : it->second;
  }

 private:
  std::vector<PeriodWindow> periods_;
  std::vector<WorkRecord> works_;
  std::map<std::string, VenueInfo> venues_;
  SkipReport skips_;
  std::map<std::string, PeriodTotals> totals_;
  std::map<std::string, std::set<std::string>> active_;
};

class Ingestor {
 public:
  Ingestor(const Registry& registry, std::vector<PeriodWindow> periods, std::ostream* log = nullptr)
      : registry_(registry), periods_(validate_periods(std::move(periods))), log_(log) {}

  // Citing-side stream: admitted works are stored; every parsable line also
  // feeds the venue index.
  void add_works(std::istream& in, std::string_view source = "works") { consume(in, source, true); }

  // Cited-side metadata stream: feeds the venue index only.
  void add_metadata(std::istream& in, std::string_view source = "metadata") { consume(in, source, false); }

  CorpusStore finish() && {
    std::vector<WorkRecord> works;
    works.reserve(works_.size());
    for (auto& [id, w] : works_) works.push_back(std::move(w));
    return CorpusStore(std::move(periods_), std::move(works), std::move(venues_), std::move(skips_));
  }

 private:
  void note(std::string_view source, std::size_t line, std::string_view what) {
    if (log_) *log_ << source << ':' << line << ": " << what << '\n';
  }

  void consume(std::istream& in, std::string_view source, bool citing) {
    std::string text;
    std::size_t line_no = 0;
    while (std::getline(in, text)) {
      ++line_no;
      if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
      ++skips_.lines;
      nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
      if (j.is_discarded() || !j.is_object() || !j.contains("id") || !j["id"].is_string() ||
          (j.contains("referenced_works") && !j["referenced_works"].is_null() &&
           !j["referenced_works"].is_array())) {
        ++skips_.malformed;
        skips_.malformed_lines.push_back(line_no);
        note(source, line_no, "malformed record (malformed so far: " + std::to_string(skips_.malformed) + ")");
        continue;
      }
      const std::string id = j["id"].get<std::string>();
      std::string journal;
      if (j.contains("journal_id") && j["journal_id"].is_string()) journal = j["journal_id"].get<std::string>();
      std::string type;
      if (j.contains("type") && j["type"].is_string()) type = j["type"].get<std::string>();

      VenueInfo venue;
      venue.outlet = classify_outlet_type(type, !journal.empty());
      venue.resolved = true;
      if (venue.outlet == OutletType::journal) venue.journal_id = journal;
      venues_.emplace(id, venue);

      if (!citing) continue;
      if (journal.empty()) {
        ++skips_.missing_journal;
        note(source, line_no, "work '" + id + "' has no journal_id");
        continue;
      }
      if (!registry_.contains(journal)) {
        ++skips_.not_in_registry;
        continue;
      }
      if (!j.contains("publication_year") || !j["publication_year"].is_number_integer()) {
        ++skips_.missing_year;
        continue;
      }
      const int year = j["publication_year"].get<int>();
      const PeriodWindow* window = nullptr;
      for (const auto& p : periods_) {
        if (p.contains(year)) window = &p;
      }
      if (!window) {
        ++skips_.outside_windows;
        continue;
      }
      if (works_.count(id)) {
        ++skips_.duplicate_works;
        continue;
      }
      WorkRecord w{id, journal, year, window->id, {}, false};
      if (j.contains("referenced_works") && j["referenced_works"].is_array()) {
        for (const auto& r : j["referenced_works"]) {
          if (r.is_string()) w.references.push_back(r.get<std::string>());
        }
      }
      std::sort(w.references.begin(), w.references.end());
      w.references.erase(std::unique(w.references.begin(), w.references.end()), w.references.end());
      w.cites_itself = std::binary_search(w.references.begin(), w.references.end(), id);
      works_.emplace(id, std::move(w));
    }
  }

  const Registry& registry_;
  std::vector<PeriodWindow> periods_;
  std::ostream* log_;
  std::map<std::string, WorkRecord> works_;
  std::map<std::string, VenueInfo> venues_;
  SkipReport skips_;
};

inline CorpusStore ingest_works(std::istream& works, const Registry& registry, std::vector<PeriodWindow> periods,
                                std::ostream* log = nullptr) {
  Ingestor ingestor(registry, std::move(periods), log);
  ingestor.add_works(works);
  return std::move(ingestor).finish();
}

// Store snapshot: JSONL with a header line, then one line per stored work
// (sorted by id), then one line per resolved venue the works reference.
inline void write_store(std::ostream& os, const CorpusStore& store) {
  nlohmann::json header;
  header["format"] = "refflow-store";
  header["version"] = 1;
  header["periods"] = nlohmann::json::array();
  for (const auto& p : store.periods()) {
    header["periods"].push_back({{"id", p.id}, {"year_start", p.year_start}, {"year_end", p.year_end}});
  }
  const auto& s = store.skips();
  header["skips"] = {{"lines", s.lines},
                     {"malformed", s.malformed},
                     {"missing_journal", s.missing_journal},
                     {"missing_year", s.missing_year},
                     {"outside_windows", s.outside_windows},
                     {"not_in_registry", s.not_in_registry},
                     {"duplicate_works", s.duplicate_works},
                     {"malformed_lines", s.malformed_lines}};
  os << header.dump() << '\n';
  std::set<std::string> needed;
  for (const auto& w : store.works()) {
    nlohmann::json j = {{"kind", "work"},       {"id", w.id},     {"journal_id", w.journal_id},
                        {"period", w.period_id}, {"year", w.year}, {"references", w.references}};
    os << j.dump() << '\n';
    needed.insert(w.references.begin(), w.references.end());
  }
  for (const auto& id : needed) {
    auto it = store.venues().find(id);
    if (it == store.venues().end()) continue;
    nlohmann::json j = {{"kind", "venue"}, {"id", id}, {"outlet", to_string(it->second.outlet)}};
    if (!it->second.journal_id.empty()) j["journal_id"] = it->second.journal_id;
    os << j.dump() << '\n';
  }
}

inline CorpusStore read_store(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("store snapshot: empty input");
  auto header = nlohmann::json::parse(line, nullptr, false);
  if (header.is_discarded() || header.value("format", "") != "refflow-store") {
    throw DataError("store snapshot: bad header");
  }
  if (header.value("version", 0) != 1) throw DataError("store snapshot: unsupported version");
  try {
    std::vector<PeriodWindow> periods;
    for (const auto& p : header.at("periods")) {
      periods.push_back({p.at("id").get<std::string>(), p.at("year_start").get<int>(), p.at("year_end").get<int>()});
    }
    SkipReport skips;
    const auto& s = header.at("skips");
    skips.lines = s.at("lines");
    skips.malformed = s.at("malformed");
    skips.missing_journal = s.at("missing_journal");
    skips.missing_year = s.at("missing_year");
    skips.outside_windows = s.at("outside_windows");
    skips.not_in_registry = s.at("not_in_registry");
    skips.duplicate_works = s.at("duplicate_works");
    skips.malformed_lines = s.at("malformed_lines").get<std::vector<std::size_t>>();

    std::vector<WorkRecord> works;
    std::map<std::string, VenueInfo> venues;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      auto j = nlohmann::json::parse(line, nullptr, false);
      if (j.is_discarded()) throw DataError("store snapshot: bad line " + std::to_string(line_no));
      const auto kind = j.at("kind").get<std::string>();
      if (kind == "work") {
        WorkRecord w;
        w.id = j.at("id");
        w.journal_id = j.at("journal_id");
        w.period_id = j.at("period");
        w.year = j.at("year");
        w.references = j.at("references").get<std::vector<std::string>>();
        w.cites_itself = std::binary_search(w.references.begin(), w.references.end(), w.id);
        works.push_back(std::move(w));
      } else if (kind == "venue") {
        VenueInfo v;
        v.outlet = parse_outlet(j.at("outlet").get<std::string>());
        v.journal_id = j.value("journal_id", "");
        v.resolved = true;
        venues.emplace(j.at("id").get<std::string>(), std::move(v));
      } else {
        throw DataError("store snapshot: unknown record kind '" + kind + "'");
      }
    }
    return CorpusStore(std::move(periods), std::move(works), std::move(venues), std::move(skips));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("store snapshot: ") + e.what());
  }
}

}  // namespace refflow
