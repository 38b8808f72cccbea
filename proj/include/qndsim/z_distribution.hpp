#ifndef QNDSIM_Z_DISTRIBUTION_HPP
#define QNDSIM_Z_DISTRIBUTION_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "qndsim/errors.hpp"
#include "qndsim/lattice.hpp"

namespace qnd {

inline constexpr double neg_inf = -std::numeric_limits<double>::infinity();

/// log(sum exp(x)); -inf for an empty or all -inf input.
inline double log_sum_exp(std::span<const double> xs) {
  double hi = neg_inf;
  for (double x : xs) hi = std::max(hi, x);
  if (hi == neg_inf) return neg_inf;
  double acc = 0.0;
  for (double x : xs) acc += std::exp(x - hi);
  return hi + std::log(acc);
}

inline double log_add(double a, double b) {
  if (a < b) std::swap(a, b);
  if (b == neg_inf) return a;
  return a + std::log1p(std::exp(b - a));
}

/// Uniform integer grid z_min, z_min + step, ..., z_min + (size-1) step.
struct ZGrid {
  std::int64_t z_min = 0;
  std::int64_t step = 1;
  std::size_t size = 1;

  std::int64_t z_at(std::size_t i) const { return z_min + static_cast<std::int64_t>(i) * step; }
  std::int64_t z_max() const { return z_at(size - 1); }

  std::optional<std::size_t> index_of(std::int64_t z) const {
    const auto offset = z - z_min;
    if (offset < 0 || offset % step != 0) return std::nullopt;
    const auto i = static_cast<std::size_t>(offset / step);
    if (i >= size) return std::nullopt;
    return i;
  }

  friend bool operator==(const ZGrid&, const ZGrid&) = default;
};

/// Grid of every z = sum_j w_j q_j reachable by N atoms. The spacing is the
/// gcd of the weight differences, so a pure +-1 pattern gets step 2.
inline ZGrid z_grid_for(const std::vector<std::int64_t>& weights, std::int64_t n_atoms) {
  if (weights.empty()) throw argument_error("empty weight vector");
  const auto [lo, hi] = std::minmax_element(weights.begin(), weights.end());
  std::int64_t g = 0;
  for (auto w : weights) g = std::gcd(g, w - *lo);
  if (g == 0) return ZGrid{n_atoms * *lo, 1, 1};
  return ZGrid{n_atoms * *lo, g, static_cast<std::size_t>(n_atoms * (*hi - *lo) / g) + 1};
}

/// Unnormalized distribution over z, stored as natural-log weights.
/// Unreachable points keep a -inf weight so indices stay stable.
class ZDistribution {
 public:
  ZDistribution(ZGrid grid, std::vector<double> log_weights) : grid_(grid), log_weights_(std::move(log_weights)) {
    if (grid_.step < 1) throw argument_error("grid step must be positive");
    if (log_weights_.size() != grid_.size) throw argument_error("log weights do not match grid size");
    if (log_weights_.empty()) throw argument_error("empty distribution");
  }

  const ZGrid& grid() const noexcept { return grid_; }
  std::size_t size() const noexcept { return log_weights_.size(); }
  std::int64_t step() const noexcept { return grid_.step; }
  std::int64_t z_at(std::size_t i) const { return grid_.z_at(i); }
  std::span<const double> log_weights() const noexcept { return log_weights_; }

  std::vector<std::int64_t> z_values() const {
    std::vector<std::int64_t> out(size());
    for (std::size_t i = 0; i < size(); ++i) out[i] = z_at(i);
    return out;
  }

  double log_normalizer() const { return log_sum_exp(log_weights_); }

  std::vector<double> probabilities() const {
    const double lz = log_normalizer();
    std::vector<double> p(size());
    for (std::size_t i = 0; i < size(); ++i) p[i] = std::exp(log_weights_[i] - lz);
    return p;
  }

  double probability(std::int64_t z) const {
    auto i = grid_.index_of(z);
    return i ? std::exp(log_weights_[*i] - log_normalizer()) : 0.0;
  }

  ZDistribution normalized() const {
    const double lz = log_normalizer();
    auto lw = log_weights_;
    for (auto& x : lw) x -= lz;
    return ZDistribution(grid_, std::move(lw));
  }

  /// E[z^k] of the normalized distribution.
  double moment(int k) const {
    const auto p = probabilities();
    double acc = 0.0;
    for (std::size_t i = 0; i < size(); ++i) acc += p[i] * std::pow(static_cast<double>(z_at(i)), k);
    return acc;
  }

  double mean() const { return moment(1); }

 private:
  ZGrid grid_;
  std::vector<double> log_weights_;
};

/// p0(z) of an initial state under the statistic z = sum_j w_j q_j.
///
/// Superfluid occupations are multinomial, so z is a sum of N independent
/// single-atom contributions w_{s_a} with s_a uniform over the M sites; p0 is
/// the N-fold convolution of that single-atom histogram, done in log space.
/// Mott and custom states are summed directly over their configurations.
inline ZDistribution initial_z_distribution(const InitialState& state, const LatticeSpec& lattice,
                                            const std::vector<std::int64_t>& weights,
                                            std::uint64_t cap = default_enumeration_cap) {
  if (static_cast<std::int64_t>(weights.size()) != lattice.n_sites()) {
    throw argument_error("weight vector length must equal the number of sites");
  }
  validate(state, lattice);
  const ZGrid grid = z_grid_for(weights, lattice.n_atoms());
  std::vector<double> lw(grid.size, neg_inf);

  switch (state.kind) {
    case InitialKind::superfluid: {
      const auto w_min = *std::min_element(weights.begin(), weights.end());
      // Single-atom histogram in grid units.
      std::map<std::int64_t, double> single;
      for (auto w : weights) single[(w - w_min) / grid.step] += 1.0;
      std::vector<std::pair<std::size_t, double>> kernel;
      const double log_m = std::log(static_cast<double>(weights.size()));
      for (auto [offset, count] : single) kernel.emplace_back(static_cast<std::size_t>(offset), std::log(count) - log_m);
      const std::size_t max_offset = kernel.back().first;

      std::vector<double> cur{0.0};
      for (std::int64_t atom = 0; atom < lattice.n_atoms(); ++atom) {
        std::vector<double> next(cur.size() + max_offset, neg_inf);
        for (std::size_t s = 0; s < cur.size(); ++s) {
          if (cur[s] == neg_inf) continue;
          for (auto [offset, lp] : kernel) next[s + offset] = log_add(next[s + offset], cur[s] + lp);
        }
        cur = std::move(next);
      }
      lw = std::move(cur);
      break;
    }
    case InitialKind::mott: {
      const auto z = statistic(mott_configuration(lattice), weights);
      lw[*grid.index_of(z)] = 0.0;
      break;
    }
    case InitialKind::custom: {
      if (state.custom_weights.size() > cap) throw size_error("custom state exceeds configuration cap");
      for (const auto& [config, w] : state.custom_weights) {
        if (w == 0.0) continue;
        const auto i = *grid.index_of(statistic(config, weights));
        lw[i] = log_add(lw[i], std::log(w));
      }
      break;
    }
  }
  return ZDistribution(grid, std::move(lw));
}

}  // namespace qnd

#endif  // QNDSIM_Z_DISTRIBUTION_HPP
