#ifndef QNDSIM_LATTICE_HPP
#define QNDSIM_LATTICE_HPP

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "qndsim/errors.hpp"

namespace qnd {

/// N atoms on M lattice sites, K of which are illuminated by the probe.
class LatticeSpec {
 public:
  LatticeSpec(std::int64_t n_atoms, std::vector<bool> illuminated)
      : n_atoms_(n_atoms), illuminated_(std::move(illuminated)) {
    if (n_atoms_ < 1) throw argument_error("lattice needs at least one atom");
    if (illuminated_.empty()) throw argument_error("lattice needs at least one site");
    if (n_illuminated() < 1) throw argument_error("at least one site must be illuminated");
  }

  /// The first K sites are illuminated.
  static LatticeSpec contiguous(std::int64_t n_atoms, std::int64_t n_sites, std::int64_t k) {
    if (n_sites < 1) throw argument_error("lattice needs at least one site");
    if (k < 1 || k > n_sites) throw argument_error("illuminated count must satisfy 1 <= K <= M");
    std::vector<bool> mask(static_cast<std::size_t>(n_sites), false);
    std::fill_n(mask.begin(), k, true);
    return LatticeSpec(n_atoms, std::move(mask));
  }

  /// Every second site (1, 3, 5, ...) is illuminated; M must be even.
  static LatticeSpec alternating(std::int64_t n_atoms, std::int64_t n_sites) {
    if (n_sites < 2 || n_sites % 2 != 0) throw argument_error("alternating pattern requires even M");
    std::vector<bool> mask(static_cast<std::size_t>(n_sites), false);
    for (std::size_t j = 0; j < mask.size(); j += 2) mask[j] = true;
    return LatticeSpec(n_atoms, std::move(mask));
  }

  std::int64_t n_atoms() const noexcept { return n_atoms_; }
  std::int64_t n_sites() const noexcept { return static_cast<std::int64_t>(illuminated_.size()); }
  std::int64_t n_illuminated() const noexcept {
    return std::count(illuminated_.begin(), illuminated_.end(), true);
  }
  const std::vector<bool>& illuminated() const noexcept { return illuminated_; }
  bool is_illuminated(std::size_t site) const { return illuminated_.at(site); }

  friend bool operator==(const LatticeSpec&, const LatticeSpec&) = default;

 private:
  std::int64_t n_atoms_;
  std::vector<bool> illuminated_;
};

/// Site occupations q_1..q_M of one classical atom configuration.
struct FockConfiguration {
  std::vector<int> occupations;

  std::int64_t total() const {
    return std::accumulate(occupations.begin(), occupations.end(), std::int64_t{0});
  }

  friend auto operator<=>(const FockConfiguration&, const FockConfiguration&) = default;
  friend bool operator==(const FockConfiguration&, const FockConfiguration&) = default;
};

/// Linear statistic z = sum_j w_j q_j.
inline std::int64_t statistic(const FockConfiguration& config, const std::vector<std::int64_t>& weights) {
  std::int64_t z = 0;
  for (std::size_t j = 0; j < config.occupations.size(); ++j) z += weights.at(j) * config.occupations[j];
  return z;
}

/// C(N+M-1, M-1), saturating at uint64 max.
inline std::uint64_t count_configurations(std::int64_t n_atoms, std::int64_t n_sites) {
  // C(n, k) built incrementally; each partial product is itself a binomial.
  const std::uint64_t n = static_cast<std::uint64_t>(n_atoms + n_sites - 1);
  const std::uint64_t k = static_cast<std::uint64_t>(std::min(n_sites - 1, n_atoms));
  std::uint64_t result = 1;
  for (std::uint64_t i = 1; i <= k; ++i) {
    const std::uint64_t numer = n - k + i;
    const std::uint64_t g = std::gcd(result, i);
    const std::uint64_t r = result / g;
    const std::uint64_t d = i / g;
    if (r > std::numeric_limits<std::uint64_t>::max() / numer) return std::numeric_limits<std::uint64_t>::max();
    result = r * (numer / d);  // numer divisible by d since the quotient is integral
  }
  return result;
}

inline constexpr std::uint64_t default_enumeration_cap = 2'000'000;

/// All compositions of N into M nonnegative parts, lexicographic in
/// (q_1, ..., q_M).
inline std::vector<FockConfiguration> enumerate_configurations(const LatticeSpec& lattice,
                                                               std::uint64_t cap = default_enumeration_cap) {
  const auto count = count_configurations(lattice.n_atoms(), lattice.n_sites());
  if (count > cap) {
    throw size_error("configuration count " + std::to_string(count) + " exceeds cap " + std::to_string(cap));
  }
  const auto n_sites = static_cast<std::size_t>(lattice.n_sites());
  const auto n_atoms = static_cast<int>(lattice.n_atoms());

  std::vector<FockConfiguration> out;
  out.reserve(count);
  std::vector<int> q(n_sites, 0);
  // Odometer over the first M-1 sites; the last site takes the remainder.
  auto fill = [&](auto&& self, std::size_t site, int remaining) -> void {
    if (site + 1 == n_sites) {
      q[site] = remaining;
      out.push_back(FockConfiguration{q});
      return;
    }
    for (int k = 0; k <= remaining; ++k) {
      q[site] = k;
      self(self, site + 1, remaining - k);
    }
  };
  fill(fill, 0, n_atoms);
  return out;
}

/// log(n!) by accumulation of log k.
inline double log_factorial(std::int64_t n) {
  static const std::vector<double> table = [] {
    std::vector<double> t(4097, 0.0);
    for (std::size_t k = 2; k < t.size(); ++k) t[k] = t[k - 1] + std::log(static_cast<double>(k));
    return t;
  }();
  if (n < 0) throw argument_error("log_factorial of a negative number");
  if (static_cast<std::size_t>(n) < table.size()) return table[static_cast<std::size_t>(n)];
  double acc = table.back();
  for (std::int64_t k = static_cast<std::int64_t>(table.size()); k <= n; ++k) acc += std::log(static_cast<double>(k));
  return acc;
}

/// log of the multinomial probability N!/(q_1!...q_M!) M^-N of a
/// configuration in the uniform superfluid.
inline double sf_log_probability(const FockConfiguration& config) {
  const auto n_atoms = config.total();
  double lp = log_factorial(n_atoms);
  for (int q : config.occupations) lp -= log_factorial(q);
  return lp - static_cast<double>(n_atoms) * std::log(static_cast<double>(config.occupations.size()));
}

enum class InitialKind { superfluid, mott, custom };

/// Initial atomic state as squared amplitudes over Fock configurations.
struct InitialState {
  InitialKind kind = InitialKind::superfluid;
  std::map<FockConfiguration, double> custom_weights;

  static InitialState superfluid() { return {InitialKind::superfluid, {}}; }
  static InitialState mott() { return {InitialKind::mott, {}}; }
  static InitialState custom(std::map<FockConfiguration, double> weights) {
    return {InitialKind::custom, std::move(weights)};
  }

  friend bool operator==(const InitialState&, const InitialState&) = default;
};

/// The unique Mott configuration q_j = N/M.
inline FockConfiguration mott_configuration(const LatticeSpec& lattice) {
  if (lattice.n_atoms() % lattice.n_sites() != 0) throw argument_error("Mott state requires N divisible by M");
  return FockConfiguration{
      std::vector<int>(static_cast<std::size_t>(lattice.n_sites()), static_cast<int>(lattice.n_atoms() / lattice.n_sites()))};
}

inline void validate(const InitialState& state, const LatticeSpec& lattice) {
  switch (state.kind) {
    case InitialKind::superfluid:
      return;
    case InitialKind::mott:
      (void)mott_configuration(lattice);
      return;
    case InitialKind::custom: {
      if (state.custom_weights.empty()) throw argument_error("custom state has no configurations");
      double total = 0.0;
      for (const auto& [config, w] : state.custom_weights) {
        if (static_cast<std::int64_t>(config.occupations.size()) != lattice.n_sites() ||
            config.total() != lattice.n_atoms() ||
            std::any_of(config.occupations.begin(), config.occupations.end(), [](int q) { return q < 0; })) {
          throw argument_error("custom configuration does not fit the lattice");
        }
        if (!(w >= 0.0)) throw argument_error("custom squared amplitude must be nonnegative");
        total += w;
      }
      if (std::abs(total - 1.0) > 1e-12) throw argument_error("custom squared amplitudes must sum to 1");
      return;
    }
  }
}

/// Squared amplitude |c_q|^2 as a natural log (-inf when absent).
inline double initial_log_weight(const InitialState& state, const LatticeSpec& lattice, const FockConfiguration& config) {
  constexpr double neg_inf = -std::numeric_limits<double>::infinity();
  switch (state.kind) {
    case InitialKind::superfluid:
      return sf_log_probability(config);
    case InitialKind::mott:
      return config == mott_configuration(lattice) ? 0.0 : neg_inf;
    case InitialKind::custom: {
      auto it = state.custom_weights.find(config);
      return (it == state.custom_weights.end() || it->second == 0.0) ? neg_inf : std::log(it->second);
    }
  }
  return neg_inf;
}

}  // namespace qnd

#endif  // QNDSIM_LATTICE_HPP
