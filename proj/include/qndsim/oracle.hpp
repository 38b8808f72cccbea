#ifndef QNDSIM_ORACLE_HPP
#define QNDSIM_ORACLE_HPP

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <vector>

#include "qndsim/errors.hpp"
#include "qndsim/geometry.hpp"
#include "qndsim/lattice.hpp"
#include "qndsim/rng.hpp"
#include "qndsim/trajectory.hpp"
#include "qndsim/z_distribution.hpp"

namespace qnd {

inline constexpr std::uint64_t oracle_configuration_cap = 1716;

/// Conditional atom-light state over the full configuration space, evolved
/// event by event. Each configuration carries its own field amplitude built
/// from both D10 and D11, so the oracle needs neither the z-reduction nor
/// the single-drive restriction.
///
/// Amplitudes are kept as (log modulus, phase) so long records neither
/// overflow nor lose their relative phases.
class FullConditionalState {
 public:
  FullConditionalState(const LatticeSpec& lattice, const OpticalGeometry& geometry, const InitialState& initial,
                       std::uint64_t cap = oracle_configuration_cap)
      : n_atoms_(lattice.n_atoms()), configurations_(enumerate_configurations(lattice, cap)) {
    if (static_cast<std::int64_t>(geometry.n_sites()) != lattice.n_sites()) {
      throw argument_error("geometry and lattice disagree on the number of sites");
    }
    if (!(geometry.kappa > 0.0)) throw argument_error("kappa must be positive");
    validate(initial, lattice);
    const auto n = configurations_.size();
    log_modulus_.resize(n);
    phase_.assign(n, 0.0);
    paired_alpha_.resize(n);
    decay_.resize(n);
    phase_rate_.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
      const auto& q = configurations_[k].occupations;
      complex d10{0.0, 0.0};
      double d11 = 0.0;
      for (std::size_t j = 0; j < q.size(); ++j) {
        d10 += geometry.mode_products_10[j] * static_cast<double>(q[j]);
        d11 += geometry.mode_products_11[j] * static_cast<double>(q[j]);
      }
      const complex i{0.0, 1.0};
      const complex x_num = geometry.mirror_drive_eta - i * geometry.coupling_u10 * geometry.probe_amplitude_a0 * d10;
      const complex a = x_num / (i * (geometry.coupling_u11 * d11 - geometry.detuning_dp) + geometry.kappa);
      paired_alpha_[k] = a;
      decay_[k] = std::norm(a) * geometry.kappa;  // amplitude decay; probability decays twice as fast
      phase_rate_[k] = (geometry.mirror_drive_eta * std::conj(a) -
                        i * geometry.coupling_u10 * geometry.probe_amplitude_a0 * d10 * std::conj(a))
                           .imag();
      log_modulus_[k] = 0.5 * initial_log_weight(initial, lattice, configurations_[k]);
    }
  }

  const std::vector<FockConfiguration>& configurations() const noexcept { return configurations_; }
  const std::vector<complex>& paired_alpha() const noexcept { return paired_alpha_; }
  std::uint64_t counts() const noexcept { return counts_; }
  double time() const noexcept { return time_; }
  std::int64_t n_atoms() const noexcept { return n_atoms_; }

  void advance(double dt) {
    if (!(dt >= 0.0) || !std::isfinite(dt)) throw argument_error("no-count interval must be finite and nonnegative");
    for (std::size_t k = 0; k < configurations_.size(); ++k) {
      if (log_modulus_[k] == neg_inf) continue;
      log_modulus_[k] -= decay_[k] * dt;
      phase_[k] += phase_rate_[k] * dt;
    }
    time_ += dt;
  }

  void jump() {
    bool any = false;
    for (std::size_t k = 0; k < configurations_.size(); ++k) {
      if (log_modulus_[k] == neg_inf) continue;
      if (paired_alpha_[k] == complex{0.0, 0.0}) {
        log_modulus_[k] = neg_inf;
        continue;
      }
      log_modulus_[k] += std::log(std::abs(paired_alpha_[k]));
      phase_[k] += std::arg(paired_alpha_[k]);
      any = true;
    }
    if (!any) throw impossible_jump("every populated configuration is dark");
    ++counts_;
  }

  /// Unit-norm amplitudes c_q alpha_q^m exp(Phi_q(t)) / F(t).
  std::vector<complex> normalized_amplitudes() const {
    const double lz = 0.5 * log_sum_exp(twice(log_modulus_));
    std::vector<complex> out(configurations_.size());
    for (std::size_t k = 0; k < out.size(); ++k) {
      out[k] = log_modulus_[k] == neg_inf ? complex{0.0, 0.0} : std::polar(std::exp(log_modulus_[k] - lz), phase_[k]);
    }
    return out;
  }

  /// Normalized log |amplitude|^2 per configuration.
  std::vector<double> log_probabilities() const {
    auto lp = twice(log_modulus_);
    const double lz = log_sum_exp(lp);
    for (auto& x : lp) x -= lz;
    return lp;
  }

  /// Accumulated phase of configuration k (not reduced mod 2 pi).
  double phase(std::size_t k) const { return phase_.at(k); }

 private:
  static std::vector<double> twice(const std::vector<double>& v) {
    std::vector<double> out(v);
    for (auto& x : out) x *= 2.0;
    return out;
  }

  std::int64_t n_atoms_;
  std::vector<FockConfiguration> configurations_;
  std::vector<double> log_modulus_;
  std::vector<double> phase_;
  std::vector<complex> paired_alpha_;
  std::vector<double> decay_;
  std::vector<double> phase_rate_;
  std::uint64_t counts_ = 0;
  double time_ = 0.0;
};

/// Detection times and the final time of a photocount record.
struct CountRecord {
  std::vector<double> jump_times;
  double horizon = 0.0;
};

/// Evolves the state along `record` up to its horizon. The state is taken to
/// have followed the same record so far: its first counts() jumps are skipped.
inline FullConditionalState oracle_evolve(FullConditionalState state, const CountRecord& record) {
  if (record.horizon < state.time()) throw argument_error("record horizon lies before the state time");
  for (std::size_t k = state.counts(); k < record.jump_times.size(); ++k) {
    const double t = record.jump_times[k];
    if (t > record.horizon) break;
    if (t < state.time()) throw argument_error("record jump lies before the state time");
    state.advance(t - state.time());
    state.jump();
  }
  state.advance(record.horizon - state.time());
  return state;
}

/// Distribution of z = sum_j w_j q_j in the normalized state.
inline ZDistribution z_marginal(const FullConditionalState& state, const std::vector<std::int64_t>& weights) {
  const ZGrid grid = z_grid_for(weights, state.n_atoms());
  std::vector<double> lw(grid.size, neg_inf);
  const auto lp = state.log_probabilities();
  for (std::size_t k = 0; k < lp.size(); ++k) {
    if (lp[k] == neg_inf) continue;
    const auto i = *grid.index_of(statistic(state.configurations()[k], weights));
    lw[i] = log_add(lw[i], lp[k]);
  }
  return ZDistribution(grid, std::move(lw));
}

/// Relative phase arg(minus sector) - arg(plus sector), in [0, 2 pi).
inline double superposition_phase(const FullConditionalState& state, const std::vector<std::int64_t>& weights,
                                  std::int64_t z_plus, std::int64_t z_minus) {
  const auto amps = state.normalized_amplitudes();
  auto sector_phase = [&](std::int64_t z) {
    bool found = false;
    double ref = 0.0;
    for (std::size_t k = 0; k < amps.size(); ++k) {
      if (amps[k] == complex{0.0, 0.0} || statistic(state.configurations()[k], weights) != z) continue;
      const double ph = state.phase(k);
      if (!found) {
        ref = ph;
        found = true;
        continue;
      }
      const double spread = std::remainder(ph - ref, 2.0 * std::numbers::pi);
      if (std::abs(spread) > 1e-9) throw ambiguity_error("phases inside z-sector " + std::to_string(z) + " differ");
    }
    if (!found) throw argument_error("z-sector " + std::to_string(z) + " carries no weight");
    return ref;
  };
  const double rel = std::fmod(sector_phase(z_minus) - sector_phase(z_plus), 2.0 * std::numbers::pi);
  return rel < 0.0 ? rel + 2.0 * std::numbers::pi : rel;
}

/// Count record produced by the fixed-step procedure.
struct FixedDtRecord {
  std::vector<double> jump_times;
  ConditionalState final_state;
};

/// Fixed-step photodetection: in each step of length dt a count happens with
/// probability (photon flux) dt, decided by a uniform draw. Kept only to
/// cross-check the exact waiting-time sampler.
inline FixedDtRecord fixed_dt_sampler(const ConditionalState& state, double dt, std::uint64_t seed, double horizon,
                                      std::uint64_t max_jumps = std::numeric_limits<std::uint64_t>::max()) {
  if (!(dt > 0.0)) throw argument_error("dt must be positive");
  const auto& rates = state.branches().decay_rate;
  const double max_rate = rates.empty() ? 0.0 : *std::max_element(rates.begin(), rates.end());
  if (dt * max_rate > 0.1) throw argument_error("dt too coarse: dt * max decay rate exceeds 0.1");
  uniform_stream rng(seed);
  const double t0 = state.time();
  const auto steps = static_cast<std::uint64_t>(std::ceil(horizon / dt));
  std::uint64_t counts = state.counts();
  std::vector<double> jumps;
  std::vector<double> p;
  for (std::uint64_t k = 1; k <= steps && jumps.size() < max_jumps; ++k) {
    const auto now = state.at(counts, t0 + static_cast<double>(k - 1) * dt);
    now.log_probabilities(p);
    double flux = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) flux += rates[i] * std::exp(p[i]);
    if (flux == 0.0) break;
    if (rng.next() < flux * dt) {
      ++counts;
      jumps.push_back(t0 + static_cast<double>(k) * dt);
    }
  }
  const double t_end = jumps.size() >= max_jumps ? jumps.back() : t0 + horizon;
  return {std::move(jumps), state.at(counts, t_end)};
}

}  // namespace qnd

#endif  // QNDSIM_ORACLE_HPP
