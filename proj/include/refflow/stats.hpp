#pragma once

// k-sample energy-distance test for equality of multivariate distributions,
// with permutation p-values, and Tukey boxplot summaries.
//
// For samples a, b with sizes n_a, n_b the pairwise energy term is
//
//   e(a,b) = n_a n_b / (n_a + n_b) * (2 M_ab - M_aa - M_bb)
//
// where M_xy is the mean Euclidean distance over all n_x * n_y ordered pairs
// (V-statistic form, self-pairs included). The k-sample statistic is the sum
// of e over all sample pairs.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "refflow/csv.hpp"
#include "refflow/error.hpp"
#include "refflow/random.hpp"
#include "refflow/ratio.hpp"

namespace refflow {

using Point = std::vector<double>;

struct Sample {
  std::string label;
  std::vector<Point> points;
};

struct EnergyTestResult {
  double E = 0.0;
  double p_value = 1.0;
  std::uint64_t n_permutations = 0;
  std::uint64_t seed = 0;
  std::uint64_t at_least_as_extreme = 0;  // permuted statistics >= E
};

struct ExactTestResult {
  double E = 0.0;
  std::uint64_t at_least_as_extreme = 0;  // includes the observed labelling
  std::uint64_t assignments = 0;
  Ratio p_value;
};

namespace detail {

// Pooled points with their full distance matrix, computed once.
class PooledSamples {
 public:
  explicit PooledSamples(std::span<const Sample> samples) {
    if (samples.size() < 2) throw DataError("energy test needs at least 2 samples");
    std::size_t dim = 0;
    for (std::size_t g = 0; g < samples.size(); ++g) {
      if (samples[g].points.empty()) throw DataError("sample '" + samples[g].label + "' is empty");
      for (const auto& p : samples[g].points) {
        if (p.empty()) throw DataError("zero-dimensional point in sample '" + samples[g].label + "'");
        if (dim == 0) dim = p.size();
        if (p.size() != dim) throw DataError("dimension mismatch in sample '" + samples[g].label + "'");
        points_.push_back(&p);
        labels_.push_back(static_cast<int>(g));
      }
      sizes_.push_back(samples[g].points.size());
    }
    const auto n = points_.size();
    dist_.assign(n * n, 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        double s = 0.0;
        for (std::size_t d = 0; d < dim; ++d) {
          const double diff = (*points_[i])[d] - (*points_[j])[d];
          s += diff * diff;
        }
        const double dij = std::sqrt(s);
        dist_[i * n + j] = dij;
        dist_[j * n + i] = dij;
        total += dij;
      }
    }
    // Rounding slack for ties between mathematically equal statistics.
    tolerance_ = 1e-11 * std::max(total / static_cast<double>(n), 1e-300);
  }

  std::size_t size() const noexcept { return points_.size(); }
  std::size_t groups() const noexcept { return sizes_.size(); }
  const std::vector<int>& labels() const noexcept { return labels_; }
  double tolerance() const noexcept { return tolerance_; }

  double statistic(const std::vector<int>& labels) const {
    const auto n = points_.size();
    const auto k = sizes_.size();
    std::vector<double> sums(k * k, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto li = static_cast<std::size_t>(labels[i]);
      const double* row = &dist_[i * n];
      for (std::size_t j = i + 1; j < n; ++j) {
        const auto lj = static_cast<std::size_t>(labels[j]);
        sums[std::min(li, lj) * k + std::max(li, lj)] += row[j];
      }
    }
    double e = 0.0;
    for (std::size_t a = 0; a < k; ++a) {
      for (std::size_t b = a + 1; b < k; ++b) {
        const auto na = static_cast<double>(sizes_[a]);
        const auto nb = static_cast<double>(sizes_[b]);
        const double between = sums[a * k + b] / (na * nb);
        const double within_a = 2.0 * sums[a * k + a] / (na * na);
        const double within_b = 2.0 * sums[b * k + b] / (nb * nb);
        e += na * nb / (na + nb) * (2.0 * between - within_a - within_b);
      }
    }
    return e;
  }

 private:
  std::vector<const Point*> points_;
  std::vector<int> labels_;
  std::vector<std::size_t> sizes_;
  std::vector<double> dist_;
  double tolerance_ = 0.0;
};

}  // namespace detail

inline double energy_statistic(std::span<const Sample> samples) {
  detail::PooledSamples pooled(samples);
  return pooled.statistic(pooled.labels());
}

// Pooled points are relabelled uniformly at random (sample sizes preserved)
// n_permutations times. p = (1 + #{E* >= E}) / (1 + n_permutations).
inline EnergyTestResult permutation_test(std::span<const Sample> samples, std::uint64_t n_permutations,
                                         std::uint64_t seed, unsigned threads = 1) {
  if (n_permutations < 1) throw DataError("n_permutations must be >= 1");
  detail::PooledSamples pooled(samples);
  const double observed = pooled.statistic(pooled.labels());
  const double threshold = observed - pooled.tolerance();

  threads = std::max(1u, static_cast<unsigned>(std::min<std::uint64_t>(threads, n_permutations)));
  std::vector<std::uint64_t> counts(threads, 0);
  auto work = [&](unsigned part) {
    const std::uint64_t begin = n_permutations * part / threads;
    const std::uint64_t end = n_permutations * (part + 1) / threads;
    std::vector<int> labels;
    for (std::uint64_t r = begin; r < end; ++r) {
      labels = pooled.labels();
      auto rng = SplitMix64::for_stream(seed, r);
      for (std::size_t i = labels.size() - 1; i > 0; --i) {
        std::swap(labels[i], labels[rng.bounded(i + 1)]);
      }
      if (pooled.statistic(labels) >= threshold) ++counts[part];
    }
  };
  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (unsigned p = 0; p < threads; ++p) pool.emplace_back(work, p);
    for (auto& t : pool) t.join();
  }
  EnergyTestResult result;
  result.E = observed;
  result.n_permutations = n_permutations;
  result.seed = seed;
  result.at_least_as_extreme = std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
  result.p_value =
      static_cast<double>(1 + result.at_least_as_extreme) / static_cast<double>(1 + n_permutations);
  return result;
}

// Enumerates every distinct assignment of the pooled points to samples of the
// original sizes. p = #{E* >= E} / #assignments, exactly.
inline ExactTestResult exact_permutation_test(std::span<const Sample> samples,
                                              std::uint64_t max_assignments = 5'000'000) {
  detail::PooledSamples pooled(samples);
  std::vector<int> labels = pooled.labels();  // sorted by construction
  const double observed = pooled.statistic(labels);
  const double threshold = observed - pooled.tolerance();
  ExactTestResult result;
  result.E = observed;
  do {
    if (++result.assignments > max_assignments) throw DataError("too many label assignments to enumerate");
    if (pooled.statistic(labels) >= threshold) ++result.at_least_as_extreme;
  } while (std::next_permutation(labels.begin(), labels.end()));
  result.p_value = Ratio::of_counts(result.at_least_as_extreme, result.assignments);
  return result;
}

// Reads `scope,<group column>,x,y` rows into one bivariate sample per group,
// groups ordered by label and points by scope.
inline std::vector<Sample> read_point_groups(std::istream& in, std::string_view group_column) {
  const auto table = csv::parse(in, "points");
  const auto scope = table.require_column("scope", "points");
  const auto group = table.require_column(group_column, "points");
  const auto x = table.require_column("x", "points");
  const auto y = table.require_column("y", "points");
  std::map<std::string, std::vector<std::pair<std::string, Point>>> grouped;
  for (const auto& row : table.rows()) {
    Point p(2);
    try {
      p[0] = std::stod(row[x]);
      p[1] = std::stod(row[y]);
    } catch (const std::exception&) {
      throw DataError("points: non-numeric coordinate for scope '" + row[scope] + "'");
    }
    grouped[row[group]].emplace_back(row[scope], std::move(p));
  }
  std::vector<Sample> samples;
  for (auto& [label, pts] : grouped) {
    std::stable_sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    Sample s{label, {}};
    for (auto& [sc, p] : pts) s.points.push_back(std::move(p));
    samples.push_back(std::move(s));
  }
  return samples;
}

struct BoxplotSummary {
  std::size_t n = 0;
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  double lower_whisker = 0.0;
  double upper_whisker = 0.0;
  std::vector<bool> outlier;  // parallel to the input values
};

// Linear interpolation between order statistics (Hyndman-Fan type 7).
inline double quantile_type7(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw DataError("quantile of empty set");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

// Tukey boxplot: whiskers reach the most extreme values within 1.5 IQR of the
// quartiles; anything beyond is an outlier.
inline BoxplotSummary distribution_summary(std::span<const double> values) {
  if (values.empty()) throw DataError("distribution summary needs at least one value");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  BoxplotSummary s;
  s.n = values.size();
  s.q1 = quantile_type7(sorted, 0.25);
  s.median = quantile_type7(sorted, 0.5);
  s.q3 = quantile_type7(sorted, 0.75);
  const double iqr = s.q3 - s.q1;
  const double lo_fence = s.q1 - 1.5 * iqr;
  const double hi_fence = s.q3 + 1.5 * iqr;
  s.lower_whisker = *std::find_if(sorted.begin(), sorted.end(), [&](double v) { return v >= lo_fence; });
  s.upper_whisker = *std::find_if(sorted.rbegin(), sorted.rend(), [&](double v) { return v <= hi_fence; });
  for (double v : values) s.outlier.push_back(v < lo_fence || v > hi_fence);
  return s;
}

}  // namespace refflow
