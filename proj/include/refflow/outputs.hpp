#pragma once

// Stage output files: CSV with leading `# key=value` metadata lines.

#include <charconv>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "refflow/csv.hpp"
#include "refflow/error.hpp"
#include "refflow/version.hpp"

namespace refflow {

using Meta = std::vector<std::pair<std::string, std::string>>;

// Shortest round-trip decimal form.
inline std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw std::runtime_error("format_double");
  std::string s(buf, end);
  return s == "-0" ? "0" : s;
}

inline std::string format_fixed(double v, int places = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", places, v);
  std::string s = buf;
  if (s.find_first_not_of("-0.") == std::string::npos && s.front() == '-') s.erase(0, 1);
  return s;
}

inline void write_meta(std::ostream& os, const Meta& meta) {
  os << "# engine=" << kEngineName << ' ' << kEngineVersion << '\n';
  for (const auto& [k, v] : meta) os << "# " << k << '=' << v << '\n';
}

// Records every file a run writes, in write order, without duplicates.
class OutputLog {
 public:
  void add(const std::filesystem::path& p) {
    std::lock_guard lock(mutex_);
    if (seen_.insert(p.string()).second) files_.push_back(p);
  }
  const std::vector<std::filesystem::path>& files() const noexcept { return files_; }

 private:
  std::mutex mutex_;
  std::set<std::string> seen_;
  std::vector<std::filesystem::path> files_;
};

// Writes through a temp file and renames, so a failed stage never leaves a
// truncated output behind.
inline void write_file(const std::filesystem::path& path, const std::function<void(std::ostream&)>& body,
                       OutputLog* log = nullptr) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("cannot write " + path.string());
    body(os);
    if (!os) throw DataError("write failed for " + path.string());
  }
  std::filesystem::rename(tmp, path);
  if (log) log->add(path);
}

struct MetaTable {
  Meta meta;
  csv::Table table;

  std::string get(const std::string& key, const std::string& fallback = "") const {
    for (const auto& [k, v] : meta) {
      if (k == key) return v;
    }
    return fallback;
  }
};

// Reads a stage output; a missing file names the stage that produces it.
inline MetaTable read_stage_output(const std::filesystem::path& path, std::string_view stage) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw DataError("missing " + path.string() + ": run stage '" + std::string(stage) + "' first");
  }
  MetaTable out;
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::istringstream lines(text);
  std::string line;
  while (lines.peek() == '#' && std::getline(lines, line)) {
    auto body = line.substr(1);
    if (!body.empty() && body.front() == ' ') body.erase(0, 1);
    const auto eq = body.find('=');
    if (eq != std::string::npos && body.compare(0, 6, "engine") != 0) {
      out.meta.emplace_back(body.substr(0, eq), body.substr(eq + 1));
    }
  }
  std::istringstream rest(text);
  out.table = csv::parse(rest, path.string());
  return out;
}

}  // namespace refflow
