#ifndef QNDSIM_GEOMETRY_HPP
#define QNDSIM_GEOMETRY_HPP

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <vector>

#include "qndsim/errors.hpp"
#include "qndsim/lattice.hpp"
#include "qndsim/z_distribution.hpp"

namespace qnd {

using complex = std::complex<double>;

enum class GeometryKind { diffraction_maximum, diffraction_minimum, mirror_probe, custom };

/// Cavity, probe and lattice-site mode overlaps. Rates are in units of kappa
/// when kappa = 1.
struct OpticalGeometry {
  std::vector<complex> mode_products_10;  ///< u1*(r_j) u0(r_j), zero off the mask
  std::vector<double> mode_products_11;   ///< |u1(r_j)|^2, zero off the mask
  double coupling_u10 = 1.0;
  double coupling_u11 = 0.0;
  complex probe_amplitude_a0{0.0, 0.0};
  complex mirror_drive_eta{0.0, 0.0};
  double detuning_dp = 0.0;
  double kappa = 1.0;
  bool neglect_shift = true;
  GeometryKind kind = GeometryKind::custom;

  std::size_t n_sites() const noexcept { return mode_products_10.size(); }
};

/// Couplings U_lm = g_l g_m / Delta_a from atom-light constants.
struct Couplings {
  double u10;
  double u11;
};

inline Couplings couplings_from_atom_light(double g0, double g1, double delta_a) {
  if (delta_a == 0.0) throw argument_error("cavity-atom detuning must be nonzero");
  return {g1 * g0 / delta_a, g1 * g1 / delta_a};
}

struct TransverseProbe {
  double u10 = 1.0;
  complex a0{1.0, 0.0};
  double detuning = 0.0;
  double kappa = 1.0;
  double u11 = 0.0;
  bool neglect_shift = true;
};

struct MirrorProbe {
  complex eta{1.0, 0.0};
  double u11 = 1.0;
  double detuning = 0.0;
  double kappa = 1.0;
};

namespace detail {

inline void check_kappa(double kappa) {
  if (!(kappa > 0.0) || !std::isfinite(kappa)) throw argument_error("kappa must be positive and finite");
}

inline OpticalGeometry transverse_base(const LatticeSpec& lattice, const TransverseProbe& probe) {
  check_kappa(probe.kappa);
  OpticalGeometry g;
  const auto m = static_cast<std::size_t>(lattice.n_sites());
  g.mode_products_10.assign(m, complex{0.0, 0.0});
  g.mode_products_11.assign(m, 0.0);
  for (std::size_t j = 0; j < m; ++j)
    if (lattice.is_illuminated(j)) g.mode_products_11[j] = 1.0;
  g.coupling_u10 = probe.u10;
  g.coupling_u11 = probe.u11;
  g.probe_amplitude_a0 = probe.a0;
  g.detuning_dp = probe.detuning;
  g.kappa = probe.kappa;
  g.neglect_shift = probe.neglect_shift;
  return g;
}

}  // namespace detail

/// Bragg geometry: every illuminated atom scatters in phase, D10 = N_K.
inline OpticalGeometry diffraction_maximum(const LatticeSpec& lattice, const TransverseProbe& probe = {}) {
  auto g = detail::transverse_base(lattice, probe);
  for (std::size_t j = 0; j < g.n_sites(); ++j)
    if (lattice.is_illuminated(j)) g.mode_products_10[j] = 1.0;
  g.kind = GeometryKind::diffraction_maximum;
  return g;
}

/// Neighbouring sites scatter out of phase: product (-1)^(j+1) on site j.
inline OpticalGeometry diffraction_minimum(const LatticeSpec& lattice, const TransverseProbe& probe = {}) {
  auto g = detail::transverse_base(lattice, probe);
  for (std::size_t j = 0; j < g.n_sites(); ++j)
    if (lattice.is_illuminated(j)) g.mode_products_10[j] = (j % 2 == 0) ? 1.0 : -1.0;
  g.kind = GeometryKind::diffraction_minimum;
  return g;
}

/// Cavity driven through the mirror; the statistic is D11 = N_K.
inline OpticalGeometry mirror_probe(const LatticeSpec& lattice, const MirrorProbe& probe = {}) {
  detail::check_kappa(probe.kappa);
  OpticalGeometry g;
  const auto m = static_cast<std::size_t>(lattice.n_sites());
  g.mode_products_10.assign(m, complex{0.0, 0.0});
  g.mode_products_11.assign(m, 0.0);
  for (std::size_t j = 0; j < m; ++j)
    if (lattice.is_illuminated(j)) g.mode_products_11[j] = 1.0;
  g.coupling_u10 = 0.0;
  g.coupling_u11 = probe.u11;
  g.mirror_drive_eta = probe.eta;
  g.detuning_dp = probe.detuning;
  g.kappa = probe.kappa;
  g.neglect_shift = false;
  g.kind = GeometryKind::mirror_probe;
  return g;
}

enum class Scenario { transverse, mirror };

inline Scenario scenario_of(const OpticalGeometry& g) {
  const bool has_probe = g.probe_amplitude_a0 != complex{0.0, 0.0} && g.coupling_u10 != 0.0;
  const bool has_eta = g.mirror_drive_eta != complex{0.0, 0.0};
  if (has_probe && !has_eta) return Scenario::transverse;
  if (has_eta && g.probe_amplitude_a0 == complex{0.0, 0.0}) return Scenario::mirror;
  if (has_probe && has_eta) throw unsupported_scenario("mixed transverse and mirror drive; use the exact oracle");
  throw unsupported_scenario("geometry has no drive");
}

/// Integer site weights w_j with D = scale * sum_j w_j q_j.
struct Reduction {
  Scenario scenario = Scenario::transverse;
  std::vector<std::int64_t> weights;
  double scale = 1.0;
  bool valid = false;
};

namespace detail {

// Writes w with products = scale * w, or returns false.
inline bool integer_proportional(const std::vector<double>& products, std::vector<std::int64_t>& w, double& scale) {
  double largest = 0.0, smallest = 0.0;
  for (double p : products) {
    if (!std::isfinite(p)) return false;
    largest = std::max(largest, std::abs(p));
    if (p != 0.0 && (smallest == 0.0 || std::abs(p) < smallest)) smallest = std::abs(p);
  }
  if (largest == 0.0) return false;
  const double tol = 1e-12 * largest;
  for (double candidate : {1.0, smallest}) {
    w.assign(products.size(), 0);
    bool ok = true;
    for (std::size_t j = 0; j < products.size() && ok; ++j) {
      const double r = std::round(products[j] / candidate);
      ok = std::abs(products[j] - candidate * r) <= tol && std::abs(r) < 1e9;
      w[j] = static_cast<std::int64_t>(r);
    }
    if (ok) {
      scale = candidate;
      return true;
    }
  }
  return false;
}

}  // namespace detail

/// Site weights of the driving statistic z. Transverse probing uses the
/// probe-cavity products (and needs neglect_shift); mirror probing uses the
/// cavity-mode intensities. `valid` is false when the products are not
/// integer-proportional, leaving only the exact oracle.
inline Reduction reduction_weights(const OpticalGeometry& g) {
  Reduction r;
  r.scenario = scenario_of(g);
  std::vector<double> products;
  if (r.scenario == Scenario::transverse) {
    if (!g.neglect_shift) return r;
    for (const auto& p : g.mode_products_10) {
      if (std::abs(p.imag()) > 1e-12 * std::max(1.0, std::abs(p))) return r;
      products.push_back(p.real());
    }
  } else {
    products = g.mode_products_11;
  }
  r.valid = detail::integer_proportional(products, r.weights, r.scale);
  if (!r.valid) r.weights.clear();
  return r;
}

/// Steady-state field for given realizations of D10 and D11: the classical
/// Lorentzian response of the driven, damped cavity.
inline complex steady_alpha(double d10, double d11, const OpticalGeometry& g) {
  const complex i{0.0, 1.0};
  return (g.mirror_drive_eta - i * g.coupling_u10 * g.probe_amplitude_a0 * d10) /
         (i * (g.coupling_u11 * d11 - g.detuning_dp) + g.kappa);
}

/// Steady-state field of branch z under a reduction. Transverse probing feeds
/// z into D10 and drops the D11 shift; mirror probing feeds z into D11.
inline complex steady_alpha(std::int64_t z, const OpticalGeometry& g, const Reduction& r) {
  const double d = r.scale * static_cast<double>(z);
  return r.scenario == Scenario::transverse ? steady_alpha(d, 0.0, g) : steady_alpha(0.0, d, g);
}

inline complex steady_alpha(std::int64_t z, const OpticalGeometry& g) {
  const auto r = reduction_weights(g);
  if (!r.valid) throw unsupported_scenario("geometry has no integer z-reduction");
  return steady_alpha(z, g, r);
}

/// Imaginary rate of the exponent: Im(eta alpha* - i U10 a0 D10 alpha*).
/// It rotates branch phases but never changes branch weights.
inline double phase_rate(complex alpha, double d10, const OpticalGeometry& g) {
  const complex i{0.0, 1.0};
  const complex x = g.mirror_drive_eta * std::conj(alpha) - i * g.coupling_u10 * g.probe_amplitude_a0 * d10 * std::conj(alpha);
  return x.imag();
}

/// Per-z steady-state amplitudes with their weight-decay and phase rates.
struct BranchSet {
  ZGrid grid;
  std::vector<complex> alpha;
  std::vector<double> decay_rate;      ///< 2 |alpha|^2 kappa
  std::vector<double> phase_rate;
  std::vector<double> log_abs_alpha;   ///< -inf for dark branches
  std::vector<double> arg_alpha;

  std::size_t size() const noexcept { return alpha.size(); }
};

inline BranchSet branch_rates(const ZGrid& grid, const OpticalGeometry& g, const Reduction& r) {
  if (!r.valid) throw unsupported_scenario("branch rates need a valid z-reduction");
  BranchSet b;
  b.grid = grid;
  b.alpha.resize(grid.size);
  b.decay_rate.resize(grid.size);
  b.phase_rate.resize(grid.size);
  b.log_abs_alpha.resize(grid.size);
  b.arg_alpha.resize(grid.size);
  for (std::size_t i = 0; i < grid.size; ++i) {
    const auto z = grid.z_at(i);
    const complex a = steady_alpha(z, g, r);
    const double d10 = r.scenario == Scenario::transverse ? r.scale * static_cast<double>(z) : 0.0;
    b.alpha[i] = a;
    b.decay_rate[i] = 2.0 * std::norm(a) * g.kappa;
    b.phase_rate[i] = phase_rate(a, d10, g);
    b.log_abs_alpha[i] = a == complex{0.0, 0.0} ? neg_inf : std::log(std::abs(a));
    b.arg_alpha[i] = std::arg(a);
  }
  return b;
}

inline BranchSet branch_rates(const ZGrid& grid, const OpticalGeometry& g) {
  return branch_rates(grid, g, reduction_weights(g));
}

/// C with alpha_z = C z for transverse probing (ignoring the D11 shift).
inline complex transverse_constant(const OpticalGeometry& g, const Reduction& r) {
  const complex i{0.0, 1.0};
  return -i * g.coupling_u10 * g.probe_amplitude_a0 * r.scale / (g.kappa - i * g.detuning_dp);
}

}  // namespace qnd

#endif  // QNDSIM_GEOMETRY_HPP
