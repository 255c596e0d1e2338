#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "oracle.hpp"
#include "refflow/corpus.hpp"
#include "refflow/cube.hpp"
#include "refflow/registry.hpp"
#include "refflow/stages.hpp"

namespace fixtures {

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("refflow-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void spit(const std::filesystem::path& p, const std::string& text) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  out << text;
}

struct Loaded {
  refflow::Registry registry;
  refflow::CorpusStore store;
  refflow::CountsCube cube;
};

// Runs a raw corpus through the engine's file-based load path.
inline Loaded load(const oracle::RawCorpus& raw, const std::filesystem::path& dir,
                   std::vector<refflow::SchemeView> views = {}, unsigned threads = 1) {
  const auto paths = oracle::write_corpus(raw, dir);
  auto registry = refflow::load_registry(paths.registry, paths.clusters,
                                         refflow::resolve_schemes(paths.registry, raw.schemes, paths.lists),
                                         refflow::Registry::Options{raw.min_cluster_size});
  refflow::Ingestor ingestor(registry, refflow::load_periods(paths.periods));
  {
    std::ifstream in(paths.works);
    ingestor.add_works(in);
  }
  {
    std::ifstream in(paths.metadata);
    ingestor.add_metadata(in);
  }
  auto store = std::move(ingestor).finish();
  auto cube = refflow::build_counts_cube(store, registry, std::move(views), threads);
  return {std::move(registry), std::move(store), std::move(cube)};
}

}  // namespace fixtures
