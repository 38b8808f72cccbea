// Acceptance suite: one PASS/FAIL line per criterion.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "oracles.hpp"
#include "qndsim/qndsim.hpp"

namespace {

using namespace qnd;

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

const std::vector<double> shrink_taus{0.0, 0.005, 0.018, 0.03, 0.05, 0.5};

TrajectoryModel shrink_model() {
  const auto lattice = LatticeSpec::contiguous(100, 100, 50);
  return make_model(lattice, diffraction_maximum(lattice), InitialState::superfluid());
}

TrajectoryRecord shrink_run(const TrajectoryModel& model, std::uint64_t seed) {
  return run_trajectory(model, seed, {.max_time = model.time_from_tau(0.5), .stop_on_collapse = false},
                        {SnapshotUnit::tau, shrink_taus});
}

// 1. Shrinking distribution along one maximum-preset trajectory.
Verdict shrinking_distribution() {
  const auto model = shrink_model();
  const auto rec = shrink_run(model, 1);
  const auto& snaps = rec.snapshots;
  if (snaps.size() != shrink_taus.size()) return {false, "wrong snapshot count"};

  bool monotone = true;
  for (std::size_t k = 1; k < snaps.size(); ++k) monotone = monotone && snaps[k].fwhm <= snaps[k - 1].fwhm;

  bool widths_ok = true;
  std::string widths;
  for (const auto& s : snaps) {
    if (s.counts == 0 || s.tau <= 0.0) continue;
    const double z1 = std::sqrt(double(s.counts) / s.tau);
    const double predicted = std::sqrt(2.0 * std::log(2.0) / s.tau);
    const bool gated = s.fwhm >= 1.0 && s.fwhm <= z1 / 3.0;
    const double rel = s.fwhm / predicted - 1.0;
    if (gated) widths_ok = widths_ok && std::abs(rel) < 0.15;
    widths += fmt(" tau=%g:fwhm=%.3g/pred=%.3g%s", s.tau, s.fwhm, predicted, gated ? (std::abs(rel) < 0.15 ? "" : "(off)") : "(ungated)");
  }
  const double drift = std::abs(snaps.back().mean_z - snaps[snaps.size() - 2].mean_z);
  const bool pass = monotone && widths_ok && drift < 0.5;
  return {pass, fmt("monotone=%d drift=%.3g m=%llu;", monotone, drift, (unsigned long long)snaps.back().counts) + widths};
}

// 2. Argmax of p(z) against sqrt(m / tau) over 100 trajectories.
Verdict peak_law() {
  const auto model = shrink_model();
  std::size_t checked = 0, misses = 0;
  double worst = 0.0;
  for (std::uint64_t k = 0; k < 100; ++k) {
    const auto rec = shrink_run(model, child_seed(2, k));
    for (const auto& s : rec.snapshots) {
      if (s.counts < 10) continue;
      const auto peak = std::max_element(s.probabilities.begin(), s.probabilities.end()) - s.probabilities.begin();
      const double z = double(rec.grid.z_at(std::size_t(peak)));
      const double gap = std::abs(z - std::sqrt(double(s.counts) / s.tau)) / double(rec.grid.step);
      worst = std::max(worst, gap);
      ++checked;
      if (gap > 1.0) ++misses;
    }
  }
  return {checked > 0 && misses == 0, fmt("%zu snapshots, %zu outside one step, worst %.3g steps", checked, misses, worst)};
}

// 3. Minimum preset: doublet at +-z1, exact symmetry, photon-number signature.
Verdict minimum_doublet() {
  const auto lattice = LatticeSpec::contiguous(100, 100, 100);
  const auto model = make_model(lattice, diffraction_minimum(lattice), InitialState::superfluid());
  const std::uint64_t seed = 3;
  const auto rec = run_trajectory(model, seed, {.stop_on_collapse = true}, {.geometric_count = 64});

  double asym = 0.0;
  for (const auto& s : rec.snapshots)
    for (std::size_t i = 0; i < s.probabilities.size(); ++i)
      asym = std::max(asym, std::abs(s.probabilities[i] - s.probabilities[s.probabilities.size() - 1 - i]));

  // Between counts the photon number must not grow; at each count it must rise.
  bool decreasing = true;
  double prev_t = 0.0;
  std::uint64_t m = 0;
  for (std::size_t k = 0; k <= rec.jump_times.size(); ++k) {
    const double end = k < rec.jump_times.size() ? rec.jump_times[k] : rec.stop_time;
    double last = conditioned_photon_number(model.initial_state().at(m, prev_t));
    for (int j = 1; j <= 8; ++j) {
      const double now = conditioned_photon_number(model.initial_state().at(m, prev_t + (end - prev_t) * j / 8.0));
      decreasing = decreasing && now <= last * (1.0 + 1e-14);
      last = now;
    }
    prev_t = end;
    ++m;
  }
  bool jumps_up = !rec.jump_times.empty();
  for (std::size_t k = 0; k < rec.jump_times.size(); ++k) jumps_up = jumps_up && rec.photon_after_jump[k] > rec.photon_before_jump[k];

  const auto& o = rec.outcome;
  const double tau = model.tau_from_time(rec.stop_time);
  const double z1 = std::sqrt(double(rec.jump_times.size()) / tau);
  const bool doublet = o.kind == OutcomeKind::doublet && o.z_low == -o.z_high &&
                       std::abs(double(o.z_high) - z1) <= double(rec.grid.step);
  const bool pass = doublet && asym == 0.0 && decreasing && jumps_up;
  return {pass, fmt("seed %llu outcome %s z1=%.3g m=%zu tau=%.3g asym=%.3g decreasing=%d jumps_up=%d",
                    (unsigned long long)seed, outcome_label(o).c_str(), z1, rec.jump_times.size(), tau, asym, decreasing, jumps_up)};
}

// 4. Full oracle against reduced engine along shared records.
Verdict oracle_equivalence() {
  std::mt19937_64 gen(4);
  double worst = 0.0;
  std::size_t comparisons = 0;
  for (std::int64_t n : {2, 3, 4}) {
    for (std::int64_t m : {2, 3, 4}) {
      const auto k = std::max<std::int64_t>(1, m / 2);
      const auto half = LatticeSpec::contiguous(n, m, k);
      const auto full = LatticeSpec::contiguous(n, m, m);
      const std::vector<std::pair<LatticeSpec, OpticalGeometry>> cases{
          {half, diffraction_maximum(half, {.u10 = 0.8, .a0 = complex{0.6, 0.3}, .detuning = 0.4, .kappa = 1.2})},
          {full, diffraction_minimum(full, {.u10 = 1.1, .a0 = 0.9, .detuning = -0.7, .kappa = 0.9})},
          {half, mirror_probe(half, {.eta = complex{0.7, -0.2}, .u11 = 0.45, .detuning = 0.5, .kappa = 1.0})}};
      for (const auto& [lattice, g] : cases) {
        const auto model = make_model(lattice, g, InitialState::superfluid());
        for (std::uint64_t r = 0; r < 50; ++r) {
          const auto rec = simulate_record(model, child_seed(4, r), {.max_time = 2.0, .stop_on_collapse = false, .max_counts = 80});
          std::uniform_real_distribution<double> u(0.0, rec.stop_time);
          std::vector<double> checkpoints(20);
          for (auto& t : checkpoints) t = u(gen);
          std::sort(checkpoints.begin(), checkpoints.end());
          FullConditionalState state(lattice, g, InitialState::superfluid());
          for (double t : checkpoints) {
            state = oracle_evolve(std::move(state), {rec.jump_times, t});
            const auto po = z_marginal(state, model.reduction.weights).probabilities();
            const auto pe = model.initial_state().at(counts_at(rec, t), t).probabilities();
            for (std::size_t i = 0; i < po.size(); ++i) worst = std::max(worst, std::abs(po[i] - pe[i]));
            ++comparisons;
          }
        }
      }
    }
  }
  return {worst <= 1e-12, fmt("%zu checkpoints, max |diff| %.3g", comparisons, worst)};
}

// 5. Outcome statistics of the projection postulate.
Verdict projection_ensemble() {
  const auto lattice = LatticeSpec::contiguous(16, 16, 8);
  const auto model = make_model(lattice, diffraction_maximum(lattice), InitialState::superfluid());
  const auto s = ensemble_run(model, 20000, 5, {.stop_on_collapse = true, .collapse_eps = 1e-3});
  // Reference computed independently of the convolution.
  const auto binom = testing::binomial_pmf(16, 0.5);
  double tv = 0.0;
  for (std::size_t z = 0; z < binom.size(); ++z) tv += std::abs(s.histogram[z] / 20000.0 - binom[z]);
  tv *= 0.5;
  return {tv < 0.02 && s.unresolved == 0, fmt("TV %.4g, unresolved %zu", tv, s.unresolved)};
}

// 6. (-1)^m relative sign of the +-z sectors in the full oracle.
Verdict superposition_parity() {
  const auto lattice = LatticeSpec::contiguous(4, 4, 4);
  const auto g = diffraction_minimum(lattice);
  const auto model = make_model(lattice, g, InitialState::superfluid());
  const std::vector<std::int64_t> w{1, -1, 1, -1};
  double worst = 0.0;
  std::size_t checked = 0;
  for (std::uint64_t m = 1; m <= 6; ++m) {
    for (std::uint64_t r = 0; r < 10; ++r) {
      const auto rec = simulate_record(model, child_seed(6, 100 * m + r), {.max_time = 5.0, .stop_on_collapse = false, .max_counts = m});
      if (rec.jump_times.size() != m) continue;
      const auto state = oracle_evolve(FullConditionalState(lattice, g, InitialState::superfluid()),
                                       {rec.jump_times, rec.jump_times.back() + 0.01});
      for (std::int64_t z : {2, 4}) {
        const double phase = superposition_phase(state, w, z, -z);
        worst = std::max(worst, std::abs(std::remainder(phase - double(m % 2) * std::numbers::pi, 2 * std::numbers::pi)));
        ++checked;
      }
    }
  }
  return {checked >= 60 && worst <= 1e-9, fmt("%zu sector pairs, max phase error %.3g rad", checked, worst)};
}

// 7. Mirror probing: detuning inside the spectrum gives doublets, outside singlets.
Verdict mirror_regimes() {
  const auto lattice = LatticeSpec::contiguous(9, 10, 5);
  std::size_t doublets = 0, singlets = 0;
  for (const auto& [detuning, want] : {std::pair{2.25, OutcomeKind::doublet}, std::pair{-1.5, OutcomeKind::singlet}}) {
    const auto model = make_model(lattice, mirror_probe(lattice, {.eta = 1.0, .u11 = 0.5, .detuning = detuning, .kappa = 1.0}),
                                  InitialState::superfluid());
    const auto s = ensemble_run(model, 200, 7, {.stop_on_collapse = true});
    for (const auto& o : s.outcomes) {
      if (o.kind != want) continue;
      (want == OutcomeKind::doublet ? doublets : singlets) += 1;
    }
  }
  return {doublets == 200 && singlets == 200,
          fmt("mid-spectrum (dp/U11 = 4.5): %zu/200 doublets; outside (dp/U11 = -3): %zu/200 singlets", doublets, singlets)};
}

// 8. Inversion sampler against the fixed-step sampler, first-count times.
Verdict sampler_cross_check() {
  const auto lattice = LatticeSpec::contiguous(4, 4, 2);
  const auto model = make_model(lattice, diffraction_maximum(lattice), InitialState::superfluid());
  const auto s0 = model.initial_state();
  const double horizon = 10.0;
  const double censored = 1e9;  // no count before the horizon
  std::vector<double> inversion, fixed;
  for (std::uint64_t k = 0; k < 10000; ++k) {
    uniform_stream rng(child_seed(8, k));
    const auto dt = sample_waiting_time(s0, rng.next());
    inversion.push_back(dt && *dt <= horizon ? *dt : censored);
    const auto rec = fixed_dt_sampler(s0, 1e-3 / model.geometry.kappa, child_seed(80, k), horizon, 1);
    fixed.push_back(rec.jump_times.empty() ? censored : rec.jump_times.front());
  }
  const double d = testing::ks_statistic(inversion, fixed);
  const double p = testing::ks_p_value(d, inversion.size(), fixed.size());
  return {p > 0.01, fmt("KS D = %.4g, p = %.3g", d, p)};
}

// 9. Convolution p0 against configuration enumeration.
Verdict initial_distribution() {
  std::mt19937_64 gen(9);
  std::uniform_int_distribution<int> weight(-3, 3);
  double worst = 0.0;
  std::size_t cases = 0;
  auto check = [&](int n, const std::vector<std::int64_t>& w) {
    const auto d = initial_z_distribution(InitialState::superfluid(), LatticeSpec::contiguous(n, std::int64_t(w.size()), 1), w);
    const auto expected = testing::brute_force_sf_histogram(n, w);
    const auto p = d.probabilities();
    for (std::size_t i = 0; i < p.size(); ++i) {
      const auto it = expected.find(d.z_at(i));
      worst = std::max(worst, std::abs(p[i] - (it == expected.end() ? 0.0 : it->second)));
    }
    for (const auto& [z, prob] : expected)
      if (!d.grid().index_of(z)) worst = std::max(worst, prob);
    ++cases;
  };
  for (int n = 1; n <= 8; ++n) {
    for (int m = 1; m <= 6; ++m) {
      for (int k = 1; k <= m; ++k) {
        std::vector<std::int64_t> w(std::size_t(m), 0);
        std::fill(w.begin(), w.begin() + k, 1);
        check(n, w);
      }
      std::vector<std::int64_t> alt(static_cast<std::size_t>(m));
      for (int j = 0; j < m; ++j) alt[std::size_t(j)] = j % 2 ? -1 : 1;
      check(n, alt);
      for (int r = 0; r < 20; ++r) {
        std::vector<std::int64_t> w(static_cast<std::size_t>(m));
        for (auto& x : w) x = weight(gen);
        check(n, w);
      }
    }
  }
  return {worst <= 1e-12, fmt("%zu weight vectors, max |diff| %.3g", cases, worst)};
}

}  // namespace

// Usage: acceptance [--expect-fail 1,2,...]
// Criteria listed after --expect-fail still run and still print FAIL, but do
// not change the exit status. A listed criterion that passes is reported.
int main(int argc, char** argv) {
  std::set<int> expected;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--expect-fail" && i + 1 < argc) {
      std::stringstream list(argv[++i]);
      for (std::string item; std::getline(list, item, ',');) expected.insert(std::stoi(item));
    } else {
      std::fprintf(stderr, "usage: acceptance [--expect-fail 1,2,...]\n");
      return 2;
    }
  }

  const std::vector<std::tuple<int, const char*, double, std::function<Verdict()>>> criteria{
      {1, "shrinking distribution at the maximum", 5.0, shrinking_distribution},
      {2, "peak law", 0.0, peak_law},
      {3, "doublet at the minimum", 5.0, minimum_doublet},
      {4, "oracle equivalence", 0.0, oracle_equivalence},
      {5, "projection-postulate ensemble", 60.0, projection_ensemble},
      {6, "superposition parity", 0.0, superposition_parity},
      {7, "mirror-probing regimes", 0.0, mirror_regimes},
      {8, "sampler cross-validation", 0.0, sampler_cross_check},
      {9, "initial distribution exactness", 0.0, initial_distribution},
  };
  int failures = 0, unexpected = 0;
  for (const auto& [id, name, budget, fn] : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = fn();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (budget > 0.0 && secs >= budget) {
      v.pass = false;
      v.detail += fmt("; over the %.0f s budget", budget);
    }
    const bool known = expected.count(id) > 0;
    std::printf("criterion %d: %s  %s (%.2f s) %s%s\n", id, v.pass ? "PASS" : "FAIL", name, secs, v.detail.c_str(),
                known ? (v.pass ? " [listed as expected failure]" : " [expected failure]") : "");
    std::fflush(stdout);
    if (!v.pass) ++failures;
    if (!v.pass && !known) ++unexpected;
  }
  std::printf("%d of %zu criteria failed, %d unexpectedly\n", failures, criteria.size(), unexpected);
  return unexpected == 0 ? 0 : 1;
}
