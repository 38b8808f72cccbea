#ifndef QNDSIM_TRAJECTORY_HPP
#define QNDSIM_TRAJECTORY_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include "qndsim/errors.hpp"
#include "qndsim/geometry.hpp"
#include "qndsim/lattice.hpp"
#include "qndsim/rng.hpp"
#include "qndsim/z_distribution.hpp"

namespace qnd {

/// Conditional z-distribution after m counts at time t.
///
/// Branch amplitudes are time-independent in steady state, so the state is
/// fully described by (m, t): log p(z) = log p0(z) + 2m log|alpha_z|
/// - decay_rate(z) t + const, whatever the order of jumps and no-count
/// segments was.
class ConditionalState {
 public:
  ConditionalState(std::shared_ptr<const ZDistribution> initial, std::shared_ptr<const BranchSet> branches)
      : initial_(std::move(initial)), branches_(std::move(branches)) {
    if (!initial_ || !branches_) throw argument_error("conditional state needs p0 and branches");
    if (!(initial_->grid() == branches_->grid)) throw argument_error("p0 and branch grids differ");
  }

  const ZDistribution& initial() const noexcept { return *initial_; }
  const BranchSet& branches() const noexcept { return *branches_; }
  const ZGrid& grid() const noexcept { return branches_->grid; }
  std::size_t size() const noexcept { return branches_->size(); }
  std::uint64_t counts() const noexcept { return counts_; }
  double time() const noexcept { return time_; }

  double log_weight(std::size_t i) const {
    double lw = initial_->log_weights()[i];
    if (lw == neg_inf) return neg_inf;
    if (counts_ > 0) {
      const double la = branches_->log_abs_alpha[i];
      if (la == neg_inf) return neg_inf;
      lw += 2.0 * static_cast<double>(counts_) * la;
    }
    const double rate = branches_->decay_rate[i];
    if (rate != 0.0) lw -= rate * time_;
    return lw;
  }

  /// Normalized log probabilities, written into `out`.
  void log_probabilities(std::vector<double>& out) const {
    out.resize(size());
    for (std::size_t i = 0; i < size(); ++i) out[i] = log_weight(i);
    const double lz = log_sum_exp(out);
    for (auto& x : out) x -= lz;
  }

  std::vector<double> probabilities() const {
    std::vector<double> p;
    log_probabilities(p);
    for (auto& x : p) x = std::exp(x);
    return p;
  }

  ZDistribution distribution() const {
    std::vector<double> lw(size());
    for (std::size_t i = 0; i < size(); ++i) lw[i] = log_weight(i);
    return ZDistribution(grid(), std::move(lw));
  }

  /// Branch phases m arg(alpha_z) + phase_rate(z) t, reduced to [0, 2 pi).
  std::vector<double> phases() const {
    std::vector<double> out(size());
    for (std::size_t i = 0; i < size(); ++i) {
      const double ph = std::fmod(static_cast<double>(counts_) * branches_->arg_alpha[i] + branches_->phase_rate[i] * time_,
                                  2.0 * std::numbers::pi);
      out[i] = ph < 0.0 ? ph + 2.0 * std::numbers::pi : ph;
    }
    return out;
  }

  /// The same branches and p0 at another point of the record.
  ConditionalState at(std::uint64_t counts, double time) const {
    ConditionalState s = *this;
    s.counts_ = counts;
    s.time_ = time;
    return s;
  }

 private:
  std::shared_ptr<const ZDistribution> initial_;
  std::shared_ptr<const BranchSet> branches_;
  std::uint64_t counts_ = 0;
  double time_ = 0.0;
};

/// <a+a>_c = sum_z |alpha_z|^2 p(z).
inline double conditioned_photon_number(const ConditionalState& s) {
  const auto p = s.probabilities();
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) acc += std::norm(s.branches().alpha[i]) * p[i];
  return acc;
}

/// No-count evolution over dt.
inline ConditionalState advance_no_count(const ConditionalState& s, double dt) {
  if (!(dt >= 0.0) || !std::isfinite(dt)) throw argument_error("no-count interval must be finite and nonnegative");
  return s.at(s.counts(), s.time() + dt);
}

/// One photodetection: every branch is multiplied by alpha_z.
inline ConditionalState apply_jump(const ConditionalState& s) {
  if (!(conditioned_photon_number(s) > 0.0)) throw impossible_jump("every populated branch is dark");
  return s.at(s.counts() + 1, s.time());
}

/// Waiting time to the next count by inversion of the survival function
/// S(dt) = sum_z p(z) exp(-decay_rate(z) dt) at level r. Returns nullopt when
/// r <= S(inf), i.e. the dark branches absorb the rest of the record.
inline std::optional<double> sample_waiting_time(const ConditionalState& s, double r) {
  if (!(r > 0.0 && r < 1.0)) throw argument_error("survival level must lie in (0, 1)");
  std::vector<double> lp;
  s.log_probabilities(lp);
  const auto& rate = s.branches().decay_rate;

  std::vector<double> dark;
  std::vector<std::pair<double, double>> active;  // (log p, rate)
  for (std::size_t i = 0; i < lp.size(); ++i) {
    if (lp[i] == neg_inf) continue;
    if (rate[i] == 0.0) dark.push_back(lp[i]);
    else active.emplace_back(lp[i], rate[i]);
  }
  const double log_r = std::log(r);
  if (log_r <= log_sum_exp(dark) || active.empty()) return std::nullopt;

  // g(x) = log S(x) - log r is convex and decreasing, so Newton started left
  // of the root climbs to it monotonically.
  auto eval = [&](double x, double& slope) {
    double hi = neg_inf;
    for (double d : dark) hi = std::max(hi, d);
    for (auto [l, g] : active) hi = std::max(hi, l - g * x);
    double sum = 0.0, weighted = 0.0;
    for (double d : dark) sum += std::exp(d - hi);
    for (auto [l, g] : active) {
      const double e = std::exp(l - g * x - hi);
      sum += e;
      weighted += e * g;
    }
    slope = -weighted / sum;
    return hi + std::log(sum) - log_r;
  };

  constexpr double rel_tol = 1e-12;
  double x = 0.0;
  double slope = 0.0;
  double g = eval(x, slope);
  for (int iter = 0; iter < 200; ++iter) {
    if (g <= 0.0) return x;
    const double next = x - g / slope;
    if (!std::isfinite(next)) break;
    if (next - x <= rel_tol * next) return next;
    x = next;
    g = eval(x, slope);
  }

  // Fallback: bracket and bisect.
  double lo = x;
  double hi = std::max(2.0 * x, 1.0 / active.front().second);
  while (eval(hi, slope) > 0.0) {
    lo = hi;
    hi *= 2.0;
    if (!std::isfinite(hi)) return std::nullopt;
  }
  while (hi - lo > rel_tol * hi) {
    const double mid = 0.5 * (lo + hi);
    (eval(mid, slope) > 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// Full width at half maximum with linear interpolation between grid points.
/// Points outside the grid count as zero. A peak whose two neighbours both
/// sit below half maximum has width one grid step. Ties for the maximum go to
/// the smaller z, so a doublet is measured on its lower peak.
inline double fwhm(std::span<const double> p, const ZGrid& grid) {
  if (p.empty() || p.size() != grid.size) throw argument_error("fwhm of an empty distribution");
  const auto n = static_cast<std::int64_t>(p.size());
  const auto peak = static_cast<std::int64_t>(std::max_element(p.begin(), p.end()) - p.begin());
  const double top = p[static_cast<std::size_t>(peak)];
  if (!(top > 0.0)) throw argument_error("fwhm of a distribution without mass");
  const double half = 0.5 * top;
  auto val = [&](std::int64_t i) { return (i < 0 || i >= n) ? 0.0 : p[static_cast<std::size_t>(i)]; };
  const auto step = static_cast<double>(grid.step);
  auto z = [&](std::int64_t i) { return static_cast<double>(grid.z_min) + static_cast<double>(i) * step; };

  if (val(peak - 1) < half && val(peak + 1) < half) return step;
  std::int64_t lo = peak;
  while (val(lo - 1) >= half) --lo;
  std::int64_t hi = peak;
  while (val(hi + 1) >= half) ++hi;
  const double left = z(lo - 1) + (half - val(lo - 1)) / (val(lo) - val(lo - 1)) * step;
  const double right = z(hi) + (val(hi) - half) / (val(hi) - val(hi + 1)) * step;
  return right - left;
}

inline double fwhm(const ZDistribution& d) {
  const auto p = d.probabilities();
  return fwhm(p, d.grid());
}

/// Groups of branches that the photocount cannot tell apart (equal |alpha|).
/// Returns a class label per branch.
inline std::vector<std::size_t> degeneracy_classes(const BranchSet& b) {
  std::vector<std::size_t> order(b.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](auto x, auto y) { return b.decay_rate[x] < b.decay_rate[y]; });
  const double scale = b.decay_rate.empty() ? 0.0 : *std::max_element(b.decay_rate.begin(), b.decay_rate.end());
  std::vector<std::size_t> label(b.size(), 0);
  std::size_t current = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (k > 0 && b.decay_rate[order[k]] - b.decay_rate[order[k - 1]] > 1e-9 * scale) ++current;
    label[order[k]] = current;
  }
  return label;
}

enum class OutcomeKind { unresolved, singlet, doublet };

struct Outcome {
  OutcomeKind kind = OutcomeKind::unresolved;
  std::int64_t z_low = 0;   ///< singlet value, or lower doublet member
  std::int64_t z_high = 0;  ///< equals z_low for a singlet

  friend bool operator==(const Outcome&, const Outcome&) = default;
};

/// Singlet when one z holds more than 1 - eps. Doublet when the two leading
/// z share |alpha| (so no further count can split them), hold more than
/// 1 - eps together and more than eps/2 each.
inline Outcome classify(std::span<const double> p, const BranchSet& b, std::span<const std::size_t> classes,
                        double eps) {
  std::size_t first = 0, second = p.size() > 1 ? 1 : 0;
  if (p.size() > 1 && p[1] > p[0]) std::swap(first, second);
  for (std::size_t i = 2; i < p.size(); ++i) {
    if (p[i] > p[first]) {
      second = first;
      first = i;
    } else if (p[i] > p[second]) {
      second = i;
    }
  }
  if (p[first] > 1.0 - eps) return {OutcomeKind::singlet, b.grid.z_at(first), b.grid.z_at(first)};
  if (first != second && classes[first] == classes[second] && p[first] + p[second] > 1.0 - eps &&
      p[first] > 0.5 * eps && p[second] > 0.5 * eps) {
    const auto a = b.grid.z_at(first), c = b.grid.z_at(second);
    return {OutcomeKind::doublet, std::min(a, c), std::max(a, c)};
  }
  return {};
}

/// Everything a trajectory needs that does not depend on the seed.
struct TrajectoryModel {
  LatticeSpec lattice;
  OpticalGeometry geometry;
  InitialState initial;
  Reduction reduction;
  std::shared_ptr<const ZDistribution> p0;
  std::shared_ptr<const BranchSet> branches;
  std::vector<std::size_t> classes;
  /// d tau / d t = 2 |C|^2 kappa for transverse probing; nullopt for mirror.
  std::optional<double> tau_rate;
  /// |C|^2 for transverse probing, 1 otherwise.
  double photon_scale = 1.0;

  ConditionalState initial_state() const { return ConditionalState(p0, branches); }

  double time_from_tau(double tau) const {
    if (!tau_rate || *tau_rate == 0.0) throw argument_error("tau is only defined for transverse probing");
    return tau / *tau_rate;
  }
  double tau_from_time(double t) const {
    return tau_rate ? *tau_rate * t : std::numeric_limits<double>::quiet_NaN();
  }
};

inline TrajectoryModel make_model(const LatticeSpec& lattice, const OpticalGeometry& geometry,
                                  const InitialState& initial) {
  if (static_cast<std::int64_t>(geometry.n_sites()) != lattice.n_sites() ||
      geometry.mode_products_11.size() != geometry.n_sites()) {
    throw argument_error("geometry and lattice disagree on the number of sites");
  }
  if (!(geometry.kappa > 0.0)) throw argument_error("kappa must be positive");
  auto reduction = reduction_weights(geometry);
  if (!reduction.valid) throw unsupported_scenario("no integer z-reduction for this geometry; use the exact oracle");
  auto p0 = std::make_shared<const ZDistribution>(initial_z_distribution(initial, lattice, reduction.weights));
  auto branches = std::make_shared<const BranchSet>(branch_rates(p0->grid(), geometry, reduction));
  TrajectoryModel m{lattice, geometry, initial, reduction, p0, branches, degeneracy_classes(*branches), std::nullopt, 1.0};
  if (reduction.scenario == Scenario::transverse) {
    const double c2 = std::norm(transverse_constant(geometry, reduction));
    m.tau_rate = 2.0 * c2 * geometry.kappa;
    m.photon_scale = c2;
  }
  return m;
}

inline Outcome classify(const ConditionalState& s, const TrajectoryModel& model, double eps) {
  const auto p = s.probabilities();
  return classify(p, s.branches(), model.classes, eps);
}

struct StopRule {
  std::optional<double> max_time;  ///< in units of 1/kappa
  bool stop_on_collapse = true;
  double collapse_eps = 1e-3;
  std::uint64_t max_counts = 10'000'000;
};

enum class SnapshotUnit { time, tau };

/// Snapshot times: explicit points, or `geometric_count` points spaced
/// geometrically between the first count and the stop time. t = 0 and the
/// stop time are always included.
struct SnapshotPlan {
  SnapshotUnit unit = SnapshotUnit::time;
  std::vector<double> points;
  std::size_t geometric_count = 64;
};

struct Snapshot {
  double time = 0.0;
  double tau = 0.0;
  std::uint64_t counts = 0;
  std::vector<double> probabilities;
  double mean_z = 0.0;
  double fwhm = 0.0;
  double photon_number = 0.0;
  Outcome outcome;
};

struct TrajectoryRecord {
  std::uint64_t seed = 0;
  ZGrid grid;
  std::vector<double> jump_times;
  /// <a+a>_c immediately before and after each count.
  std::vector<double> photon_before_jump;
  std::vector<double> photon_after_jump;
  std::vector<Snapshot> snapshots;
  Outcome outcome;
  double stop_time = 0.0;
  /// First event time at which the state was classified as collapsed.
  std::optional<double> collapse_time;
  bool dark_absorbed = false;  ///< the record ended with no further count possible
};

namespace detail {

// Earliest time after `from` (counts fixed) at which a no-count segment
// resolves the state, found by doubling then bisection.
inline std::optional<double> dark_collapse_time(const ConditionalState& s, const TrajectoryModel& model, double eps) {
  auto resolved = [&](double t) { return classify(s.at(s.counts(), t), model, eps).kind != OutcomeKind::unresolved; };
  const double t0 = s.time();
  double span = 1.0 / model.geometry.kappa;
  while (!resolved(t0 + span)) {
    span *= 2.0;
    if (span > 1e15) return std::nullopt;
  }
  double lo = 0.0, hi = span;
  for (int i = 0; i < 80 && hi - lo > 1e-13 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    (resolved(t0 + mid) ? hi : lo) = mid;
  }
  return t0 + hi;
}

}  // namespace detail

/// Jump record of one trajectory, without snapshots.
inline TrajectoryRecord simulate_record(const TrajectoryModel& model, std::uint64_t seed, const StopRule& stop) {
  if (!stop.max_time && !stop.stop_on_collapse) throw argument_error("stop rule needs max_time or collapse stopping");
  if (stop.max_time && !(*stop.max_time >= 0.0)) throw argument_error("max_time must be nonnegative");
  const double eps = stop.collapse_eps;
  TrajectoryRecord rec;
  rec.seed = seed;
  rec.grid = model.p0->grid();
  uniform_stream rng(seed);
  ConditionalState state = model.initial_state();

  auto resolved = [&](const ConditionalState& s) {
    return classify(s, model, eps).kind != OutcomeKind::unresolved;
  };
  auto note_collapse = [&](const ConditionalState& s) {
    if (!rec.collapse_time && resolved(s)) rec.collapse_time = s.time();
    return rec.collapse_time.has_value();
  };

  if (note_collapse(state) && stop.stop_on_collapse) {
    rec.stop_time = 0.0;
  } else {
    while (true) {
      if (state.counts() >= stop.max_counts) {
        rec.stop_time = state.time();
        break;
      }
      const auto wait = sample_waiting_time(state, rng.next());
      if (!wait) {
        rec.dark_absorbed = true;
        if (stop.stop_on_collapse && !rec.collapse_time) {
          if (auto tc = detail::dark_collapse_time(state, model, eps)) rec.collapse_time = tc;
        }
        if (stop.max_time) {
          rec.stop_time = std::max(state.time(), *stop.max_time);
          if (stop.stop_on_collapse && rec.collapse_time) rec.stop_time = std::min(rec.stop_time, *rec.collapse_time);
        } else {
          rec.stop_time = rec.collapse_time.value_or(state.time());
        }
        break;
      }
      const double t_next = state.time() + *wait;
      if (stop.max_time && t_next > *stop.max_time) {
        rec.stop_time = *stop.max_time;
        break;
      }
      const auto before = advance_no_count(state, *wait);
      if (note_collapse(before) && stop.stop_on_collapse) {
        rec.stop_time = t_next;
        break;
      }
      rec.photon_before_jump.push_back(conditioned_photon_number(before));
      state = apply_jump(before);
      rec.photon_after_jump.push_back(conditioned_photon_number(state));
      rec.jump_times.push_back(t_next);
      if (note_collapse(state) && stop.stop_on_collapse) {
        rec.stop_time = t_next;
        break;
      }
    }
  }
  const auto final_state = model.initial_state().at(rec.jump_times.size(), rec.stop_time);
  rec.outcome = classify(final_state, model, eps);
  return rec;
}

/// Number of counts with t_i <= t.
inline std::uint64_t counts_at(const TrajectoryRecord& rec, double t) {
  return static_cast<std::uint64_t>(std::upper_bound(rec.jump_times.begin(), rec.jump_times.end(), t) -
                                    rec.jump_times.begin());
}

inline Snapshot take_snapshot(const TrajectoryModel& model, const TrajectoryRecord& rec, double t, double eps) {
  const auto s = model.initial_state().at(counts_at(rec, t), t);
  Snapshot snap;
  snap.time = t;
  snap.tau = model.tau_from_time(t);
  snap.counts = s.counts();
  snap.probabilities = s.probabilities();
  double mean = 0.0, photons = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    mean += static_cast<double>(s.grid().z_at(i)) * snap.probabilities[i];
    photons += std::norm(s.branches().alpha[i]) * snap.probabilities[i];
  }
  snap.mean_z = mean;
  snap.photon_number = photons;
  snap.fwhm = fwhm(snap.probabilities, s.grid());
  snap.outcome = classify(snap.probabilities, s.branches(), model.classes, eps);
  return snap;
}

inline std::vector<double> snapshot_times(const TrajectoryModel& model, const TrajectoryRecord& rec,
                                          const SnapshotPlan& plan) {
  std::vector<double> times{0.0, rec.stop_time};
  if (!plan.points.empty()) {
    for (double x : plan.points) {
      const double t = plan.unit == SnapshotUnit::tau ? model.time_from_tau(x) : x;
      // Tolerate rounding in the tau -> t conversion at the stop time.
      if (t <= rec.stop_time * (1.0 + 1e-12)) times.push_back(std::min(t, rec.stop_time));
    }
  } else if (!rec.jump_times.empty() && plan.geometric_count > 0 && rec.stop_time > rec.jump_times.front()) {
    const double a = rec.jump_times.front(), b = rec.stop_time;
    const auto n = plan.geometric_count;
    for (std::size_t k = 0; k < n; ++k) {
      const double f = n == 1 ? 0.0 : static_cast<double>(k) / static_cast<double>(n - 1);
      times.push_back(a * std::pow(b / a, f));
    }
  }
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  return times;
}

/// One seeded trajectory with snapshots.
inline TrajectoryRecord run_trajectory(const TrajectoryModel& model, std::uint64_t seed, const StopRule& stop,
                                       const SnapshotPlan& plan = {}) {
  auto rec = simulate_record(model, seed, stop);
  for (double t : snapshot_times(model, rec, plan)) rec.snapshots.push_back(take_snapshot(model, rec, t, stop.collapse_eps));
  return rec;
}

inline TrajectoryRecord run_trajectory(const LatticeSpec& lattice, const OpticalGeometry& geometry,
                                       const InitialState& initial, std::uint64_t seed, const StopRule& stop,
                                       const SnapshotPlan& plan = {}) {
  return run_trajectory(make_model(lattice, geometry, initial), seed, stop, plan);
}

}  // namespace qnd

#endif  // QNDSIM_TRAJECTORY_HPP
