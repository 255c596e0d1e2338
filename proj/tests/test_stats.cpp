#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "energy_oracle.hpp"
#include "refflow/stats.hpp"

using namespace refflow;

namespace {

std::vector<Sample> random_samples(std::mt19937_64& rng, std::vector<std::size_t> sizes, double shift = 0.0) {
  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<Sample> out;
  for (std::size_t g = 0; g < sizes.size(); ++g) {
    Sample s{"g" + std::to_string(g), {}};
    for (std::size_t i = 0; i < sizes[g]; ++i) s.points.push_back({z(rng) + shift * g, z(rng)});
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

TEST(Energy, UnitSeparation) {
  const std::vector<Sample> s = {{"a", {{0, 0}}}, {"b", {{1, 0}}}};
  EXPECT_NEAR(energy_statistic(s), 1.0, 1e-12);
}

TEST(Energy, IdenticalSamples) {
  const std::vector<Sample> s = {{"a", {{0, 0}, {1, 1}, {2, 0}}}, {"b", {{0, 0}, {1, 1}, {2, 0}}}};
  EXPECT_NEAR(energy_statistic(s), 0.0, 1e-12);
  const auto r = permutation_test(s, 999, 5);
  EXPECT_DOUBLE_EQ(r.p_value, 1.0);
  EXPECT_EQ(r.at_least_as_extreme, 999u);
}

TEST(Energy, MatchesDirectFormula) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 50; ++t) {
    const auto s = random_samples(rng, {3 + rng() % 5, 2 + rng() % 6, 1 + rng() % 4}, 0.5);
    EXPECT_NEAR(energy_statistic(s), oracle::energy(s), 1e-9);
  }
}

TEST(Energy, ExactMatchesBruteForce) {
  std::mt19937_64 rng(17);
  for (int t = 0; t < 40; ++t) {
    const std::size_t k = 2 + rng() % 2;
    std::vector<std::size_t> sizes(k);
    std::size_t n = 0;
    for (auto& s : sizes) n += (s = 1 + rng() % 3);
    if (n > 8) continue;
    const auto s = random_samples(rng, sizes, 0.8);
    const auto exact = exact_permutation_test(s);
    const auto bf = oracle::brute_force(s);
    EXPECT_EQ(exact.assignments, bf.kept);
    EXPECT_EQ(exact.at_least_as_extreme, bf.extreme);
    EXPECT_EQ(exact.p_value, Ratio::of_counts(bf.extreme, bf.kept));
  }
}

TEST(Energy, ExactHandlesTies) {
  // Every relabelling of identical points ties with the observed value.
  const std::vector<Sample> s = {{"a", {{1, 1}, {1, 1}}}, {"b", {{1, 1}, {1, 1}}}};
  const auto r = exact_permutation_test(s);
  EXPECT_EQ(r.assignments, 6u);
  EXPECT_EQ(r.at_least_as_extreme, 6u);
}

TEST(Energy, MinimumPValueUnderSeparation) {
  std::mt19937_64 rng(8);
  const auto s = random_samples(rng, {40, 40}, 50.0);
  const auto r = permutation_test(s, 9999, 1);
  EXPECT_EQ(r.at_least_as_extreme, 0u);
  EXPECT_DOUBLE_EQ(r.p_value, 1.0 / 10000.0);
}

TEST(Energy, ThreadCountDoesNotChangeResult) {
  std::mt19937_64 rng(21);
  const auto s = random_samples(rng, {12, 15, 9}, 0.2);
  const auto a = permutation_test(s, 499, 77, 1);
  const auto b = permutation_test(s, 499, 77, 4);
  EXPECT_EQ(a.at_least_as_extreme, b.at_least_as_extreme);
  EXPECT_EQ(a.p_value, b.p_value);
  const auto c = permutation_test(s, 499, 78, 1);
  EXPECT_EQ(c.seed, 78u);
}

TEST(Energy, RejectsBadInput) {
  const std::vector<Sample> one = {{"a", {{0, 0}}}};
  EXPECT_THROW(energy_statistic(one), DataError);
  const std::vector<Sample> empty = {{"a", {{0, 0}}}, {"b", {}}};
  EXPECT_THROW(energy_statistic(empty), DataError);
  const std::vector<Sample> ragged = {{"a", {{0, 0}}}, {"b", {{0}}}};
  EXPECT_THROW(energy_statistic(ragged), DataError);
  const std::vector<Sample> ok = {{"a", {{0, 0}}}, {"b", {{1, 0}}}};
  EXPECT_THROW(permutation_test(ok, 0, 1), DataError);
}

TEST(Energy, ReadPointGroups) {
  std::istringstream in("# engine=refflow\nperiod,scope,x,y\nP2,b,0.5,0.5\nP1,z,1,0\nP1,a,0,0\n");
  const auto g = read_point_groups(in, "period");
  ASSERT_EQ(g.size(), 2u);
  EXPECT_EQ(g[0].label, "P1");
  EXPECT_EQ(g[0].points, (std::vector<Point>{{0, 0}, {1, 0}}));
  std::istringstream bad("period,scope,x,y\nP1,a,zero,0\n");
  EXPECT_THROW(read_point_groups(bad, "period"), DataError);
  std::istringstream missing("scope,x,y\na,0,0\n");
  EXPECT_THROW(read_point_groups(missing, "period"), DataError);
}

TEST(Boxplot, FiveValues) {
  const std::vector<double> v = {5, 3, 1, 4, 2};
  const auto s = distribution_summary(v);
  EXPECT_EQ(s.n, 5u);
  EXPECT_DOUBLE_EQ(s.median, 3);
  EXPECT_DOUBLE_EQ(s.q1, 2);
  EXPECT_DOUBLE_EQ(s.q3, 4);
  EXPECT_DOUBLE_EQ(s.lower_whisker, 1);
  EXPECT_DOUBLE_EQ(s.upper_whisker, 5);
  for (bool o : s.outlier) EXPECT_FALSE(o);
}

TEST(Boxplot, FlagsOutlier) {
  std::vector<double> v(9, 0.0);
  v.push_back(100.0);
  const auto s = distribution_summary(v);
  EXPECT_DOUBLE_EQ(s.median, 0);
  EXPECT_DOUBLE_EQ(s.upper_whisker, 0);
  EXPECT_TRUE(s.outlier.back());
  EXPECT_EQ(std::count(s.outlier.begin(), s.outlier.end(), true), 1);
  EXPECT_THROW(distribution_summary(std::vector<double>{}), DataError);
}

TEST(Boxplot, Type7Interpolation) {
  const std::vector<double> v = {1, 2, 3, 4};
  EXPECT_DOUBLE_EQ(quantile_type7(v, 0.25), 1.75);
  EXPECT_DOUBLE_EQ(quantile_type7(v, 0.5), 2.5);
  EXPECT_DOUBLE_EQ(quantile_type7(v, 1.0), 4);
}
