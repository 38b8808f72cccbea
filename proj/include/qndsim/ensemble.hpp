#ifndef QNDSIM_ENSEMBLE_HPP
#define QNDSIM_ENSEMBLE_HPP

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <map>
#include <mutex>
#include <thread>
#include <vector>

#include "qndsim/rng.hpp"
#include "qndsim/trajectory.hpp"

namespace qnd {

struct EnsembleSummary {
  std::uint64_t master_seed = 0;
  std::vector<std::uint64_t> seeds;
  std::vector<Outcome> outcomes;
  std::vector<double> stop_times;
  std::vector<std::optional<double>> collapse_times;

  ZGrid grid;
  /// Outcome mass per grid point: a singlet adds 1, a doublet 1/2 to each member.
  std::vector<double> histogram;
  std::vector<double> reference;  ///< p0 on the same grid
  std::size_t unresolved = 0;

  /// Total-variation distance between outcome and p0 masses, summed over
  /// classes of branches with equal |alpha|. At the diffraction minimum this is
  /// the folded distance over |z|.
  double tv_distance = 0.0;

  double mean_collapse_time = 0.0;
  double stddev_collapse_time = 0.0;
  double median_collapse_time = 0.0;
  std::size_t n_collapsed = 0;
};

/// Folds a histogram over z onto |z| >= 0: h(|z|) = h(z) + h(-z).
inline std::map<std::int64_t, double> fold(const ZGrid& grid, std::span<const double> values) {
  std::map<std::int64_t, double> out;
  for (std::size_t i = 0; i < grid.size; ++i) out[std::abs(grid.z_at(i))] += values[i];
  return out;
}

/// Runs `n_traj` trajectories with seeds child_seed(master_seed, index).
/// Results are written by index and reduced in index order, so the summary
/// does not depend on thread scheduling.
inline EnsembleSummary ensemble_run(const TrajectoryModel& model, std::size_t n_traj, std::uint64_t master_seed,
                                    const StopRule& stop, unsigned threads = 0) {
  if (n_traj < 1) throw argument_error("ensemble needs at least one trajectory");
  EnsembleSummary s;
  s.master_seed = master_seed;
  s.seeds.resize(n_traj);
  for (std::size_t k = 0; k < n_traj; ++k) s.seeds[k] = child_seed(master_seed, k);
  s.outcomes.resize(n_traj);
  s.stop_times.resize(n_traj);
  s.collapse_times.resize(n_traj);

  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n_traj));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    try {
      for (std::size_t k = next++; k < n_traj; k = next++) {
        const auto rec = simulate_record(model, s.seeds[k], stop);
        s.outcomes[k] = rec.outcome;
        s.stop_times[k] = rec.stop_time;
        s.collapse_times[k] = rec.collapse_time;
      }
    } catch (...) {
      std::lock_guard lock(failure_mutex);
      if (!failure) failure = std::current_exception();
      next = n_traj;
    }
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  s.grid = model.p0->grid();
  s.reference = model.p0->probabilities();
  s.histogram.assign(s.grid.size, 0.0);
  std::vector<double> collapsed;
  for (std::size_t k = 0; k < n_traj; ++k) {
    const auto& o = s.outcomes[k];
    switch (o.kind) {
      case OutcomeKind::singlet:
        s.histogram[*s.grid.index_of(o.z_low)] += 1.0;
        break;
      case OutcomeKind::doublet:
        s.histogram[*s.grid.index_of(o.z_low)] += 0.5;
        s.histogram[*s.grid.index_of(o.z_high)] += 0.5;
        break;
      case OutcomeKind::unresolved:
        ++s.unresolved;
        break;
    }
    if (s.collapse_times[k]) collapsed.push_back(*s.collapse_times[k]);
  }

  std::map<std::size_t, std::pair<double, double>> by_class;
  for (std::size_t i = 0; i < s.grid.size; ++i) {
    auto& [h, p] = by_class[model.classes[i]];
    h += s.histogram[i] / static_cast<double>(n_traj);
    p += s.reference[i];
  }
  double tv = 0.0;
  for (const auto& [label, hp] : by_class) tv += std::abs(hp.first - hp.second);
  s.tv_distance = 0.5 * tv;

  s.n_collapsed = collapsed.size();
  if (!collapsed.empty()) {
    double sum = 0.0;
    for (double t : collapsed) sum += t;
    s.mean_collapse_time = sum / static_cast<double>(collapsed.size());
    double var = 0.0;
    for (double t : collapsed) var += (t - s.mean_collapse_time) * (t - s.mean_collapse_time);
    s.stddev_collapse_time = collapsed.size() > 1 ? std::sqrt(var / static_cast<double>(collapsed.size() - 1)) : 0.0;
    std::sort(collapsed.begin(), collapsed.end());
    const auto n = collapsed.size();
    s.median_collapse_time = n % 2 ? collapsed[n / 2] : 0.5 * (collapsed[n / 2 - 1] + collapsed[n / 2]);
  }
  return s;
}

}  // namespace qnd

#endif  // QNDSIM_ENSEMBLE_HPP
