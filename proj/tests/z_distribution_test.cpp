#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "qndsim/z_distribution.hpp"

namespace qnd {
namespace {

std::vector<std::int64_t> maximum_weights(int m, int k) {
  std::vector<std::int64_t> w(static_cast<std::size_t>(m), 0);
  for (int j = 0; j < k; ++j) w[static_cast<std::size_t>(j)] = 1;
  return w;
}

std::vector<std::int64_t> minimum_weights(int m) {
  std::vector<std::int64_t> w(static_cast<std::size_t>(m));
  for (int j = 0; j < m; ++j) w[static_cast<std::size_t>(j)] = j % 2 == 0 ? 1 : -1;
  return w;
}

void expect_matches_brute_force(int n, const std::vector<std::int64_t>& w) {
  const auto lattice = LatticeSpec::contiguous(n, static_cast<std::int64_t>(w.size()), 1);
  const auto d = initial_z_distribution(InitialState::superfluid(), lattice, w);
  const auto expected = testing::brute_force_sf_histogram(n, w);
  const auto p = d.probabilities();
  double total = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    auto it = expected.find(d.z_at(i));
    const double want = it == expected.end() ? 0.0 : it->second;
    EXPECT_NEAR(p[i], want, 1e-12) << "z=" << d.z_at(i) << " n=" << n << " m=" << w.size();
    total += p[i];
  }
  EXPECT_NEAR(total, 1.0, 1e-12);
  for (const auto& [z, prob] : expected) EXPECT_TRUE(d.grid().index_of(z).has_value()) << z;
}

TEST(LogSumExp, HandlesInfinities) {
  const std::vector<double> empty;
  EXPECT_EQ(log_sum_exp(empty), neg_inf);
  const std::vector<double> xs{neg_inf, std::log(0.25), std::log(0.75)};
  EXPECT_NEAR(log_sum_exp(xs), 0.0, 1e-15);
  const std::vector<double> huge{-1000.0, -1000.0};
  EXPECT_NEAR(log_sum_exp(huge), -1000.0 + std::log(2.0), 1e-12);
}

TEST(ZGrid, StepFromWeightParity) {
  EXPECT_EQ(z_grid_for(maximum_weights(4, 2), 3), (ZGrid{0, 1, 4}));
  EXPECT_EQ(z_grid_for(minimum_weights(4), 4), (ZGrid{-4, 2, 5}));
  // A dark site breaks the parity lock.
  EXPECT_EQ(z_grid_for({1, -1, 0}, 2), (ZGrid{-2, 1, 5}));
  EXPECT_EQ(z_grid_for({1, 1}, 3), (ZGrid{3, 1, 1}));
}

TEST(InitialZDistribution, SuperfluidTwoAtomsIsBinomial) {
  const auto d = initial_z_distribution(InitialState::superfluid(), LatticeSpec::contiguous(2, 2, 1), {1, 0});
  ASSERT_EQ(d.size(), 3u);
  EXPECT_NEAR(d.probability(0), 0.25, 1e-15);
  EXPECT_NEAR(d.probability(1), 0.5, 1e-15);
  EXPECT_NEAR(d.probability(2), 0.25, 1e-15);
}

TEST(InitialZDistribution, MottIsDelta) {
  const auto d = initial_z_distribution(InitialState::mott(), LatticeSpec::contiguous(4, 4, 2), {1, 1, 0, 0});
  EXPECT_DOUBLE_EQ(d.probability(2), 1.0);
  EXPECT_EQ(d.probability(1), 0.0);
  EXPECT_EQ(d.log_weights()[0], neg_inf);
}

TEST(InitialZDistribution, CustomSumsConfigurationsSharingZ) {
  const auto lattice = LatticeSpec::contiguous(2, 3, 1);
  const auto state = InitialState::custom({{{{2, 0, 0}}, 0.5}, {{{1, 0, 1}}, 0.25}, {{{1, 1, 0}}, 0.25}});
  const auto d = initial_z_distribution(state, lattice, {1, 0, 0});
  EXPECT_NEAR(d.probability(2), 0.5, 1e-15);
  EXPECT_NEAR(d.probability(1), 0.5, 1e-15);
  EXPECT_EQ(d.probability(0), 0.0);
}

TEST(InitialZDistribution, MinimumHundredAtomsCenteredWithWidthSqrtN) {
  const auto d = initial_z_distribution(InitialState::superfluid(), LatticeSpec::contiguous(100, 100, 100), minimum_weights(100));
  EXPECT_EQ(d.step(), 2);
  EXPECT_EQ(d.z_at(0), -100);
  EXPECT_EQ(d.z_at(d.size() - 1), 100);
  EXPECT_NEAR(d.mean(), 0.0, 1e-12);
  EXPECT_NEAR(std::sqrt(d.moment(2)), 10.0, 1e-9);
}

TEST(InitialZDistribution, MatchesEnumerationForAllSmallLattices) {
  for (int n = 1; n <= 8; ++n) {
    for (int m = 1; m <= 6; ++m) {
      expect_matches_brute_force(n, maximum_weights(m, std::max(1, m / 2)));
      expect_matches_brute_force(n, minimum_weights(m));
    }
  }
}

TEST(InitialZDistribution, MatchesEnumerationForRandomWeights) {
  std::mt19937_64 gen(20240611);
  std::uniform_int_distribution<int> size(1, 6), atoms(1, 8), weight(-3, 3);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::int64_t> w(static_cast<std::size_t>(size(gen)));
    for (auto& x : w) x = weight(gen);
    expect_matches_brute_force(atoms(gen), w);
  }
}

TEST(InitialZDistribution, MaximumIsBinomialInKOverM) {
  for (auto [n, m, k] : {std::tuple{16, 16, 8}, std::tuple{100, 100, 50}, std::tuple{30, 10, 3}}) {
    const auto d = initial_z_distribution(InitialState::superfluid(), LatticeSpec::contiguous(n, m, k), maximum_weights(m, k));
    const auto binom = testing::binomial_pmf(n, static_cast<double>(k) / m);
    const auto p = d.probabilities();
    ASSERT_EQ(p.size(), binom.size());
    for (std::size_t z = 0; z < p.size(); ++z) EXPECT_NEAR(p[z], binom[z], 1e-13 + 1e-11 * binom[z]);
  }
}

TEST(InitialZDistribution, MinimumIsExactlySymmetric) {
  for (int n : {3, 8, 21, 100}) {
    for (int m : {2, 4, 10}) {
      const auto d = initial_z_distribution(InitialState::superfluid(), LatticeSpec::contiguous(n, m, m), minimum_weights(m));
      for (std::size_t i = 0; i < d.size(); ++i) {
        EXPECT_EQ(d.log_weights()[i], d.log_weights()[d.size() - 1 - i]) << "n=" << n << " m=" << m;
      }
    }
  }
}

TEST(InitialZDistribution, MeanIsLinearInWeights) {
  std::mt19937_64 gen(7);
  std::uniform_int_distribution<int> weight(-4, 5);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<std::int64_t> w(7);
    for (auto& x : w) x = weight(gen);
    const int n = 40;
    const auto d = initial_z_distribution(InitialState::superfluid(), LatticeSpec::contiguous(n, 7, 1), w);
    const double expected = n * static_cast<double>(std::accumulate(w.begin(), w.end(), std::int64_t{0})) / 7.0;
    EXPECT_NEAR(d.mean(), expected, 1e-9 * std::max(1.0, std::abs(expected)));
  }
}

TEST(InitialZDistribution, WeightLengthMustMatchSites) {
  EXPECT_THROW(initial_z_distribution(InitialState::superfluid(), LatticeSpec::contiguous(2, 3, 1), {1, 0}), argument_error);
}

}  // namespace
}  // namespace qnd
