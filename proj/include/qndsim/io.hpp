#ifndef QNDSIM_IO_HPP
#define QNDSIM_IO_HPP

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "qndsim/config.hpp"
#include "qndsim/ensemble.hpp"
#include "qndsim/errors.hpp"
#include "qndsim/oracle.hpp"
#include "qndsim/trajectory.hpp"

namespace qnd {

namespace fs = std::filesystem;

/// Output could not be written.
class output_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::string outcome_label(const Outcome& o) {
  switch (o.kind) {
    case OutcomeKind::singlet:
      return "singlet(" + std::to_string(o.z_low) + ")";
    case OutcomeKind::doublet:
      return "doublet(" + std::to_string(o.z_low) + "|" + std::to_string(o.z_high) + ")";
    case OutcomeKind::unresolved:
      break;
  }
  return "unresolved";
}

inline nlohmann::json outcome_json(const Outcome& o) {
  nlohmann::json j;
  j["kind"] = o.kind == OutcomeKind::singlet ? "singlet" : o.kind == OutcomeKind::doublet ? "doublet" : "unresolved";
  if (o.kind != OutcomeKind::unresolved) {
    j["z_low"] = o.z_low;
    j["z_high"] = o.z_high;
  }
  return j;
}

namespace detail {

inline std::string num(double x) { return fmt_double(x); }

// Comment block carrying the full config echo; every table starts with it.
inline std::string header(const std::string& title, const RunConfig& cfg) {
  std::ostringstream o;
  o << "# " << title << "\n";
  o << "# seed = " << cfg.run.seed << "\n";
  std::istringstream in(echo_config(cfg));
  for (std::string line; std::getline(in, line);) o << "#| " << line << "\n";
  return o.str();
}

inline std::ofstream open_out(const fs::path& path) {
  std::error_code ec;
  fs::create_directories(path.parent_path(), ec);
  std::ofstream out(path);
  if (!out) throw output_error("cannot write " + path.string());
  return out;
}

inline void close_checked(std::ofstream& out, const fs::path& path) {
  out.close();
  if (!out) throw output_error("failed while writing " + path.string());
}

}  // namespace detail

/// Rebuilds the run configuration from the comment header of any table
/// written by this module.
inline RunConfig config_from_header(const std::string& text) {
  std::istringstream in(text);
  std::string ini;
  for (std::string line; std::getline(in, line);) {
    if (line.rfind("#| ", 0) == 0) ini += line.substr(3) + "\n";
    else if (line == "#|") ini += "\n";
  }
  return parse_config(ini);
}

struct TrajectoryFiles {
  fs::path snapshots;
  std::vector<fs::path> distributions;
  fs::path summary;
};

/// Snapshot table, one distribution dump per snapshot and a JSON summary.
inline TrajectoryFiles emit_trajectory(const TrajectoryRecord& rec, const TrajectoryModel& model, const RunConfig& cfg,
                                       const fs::path& out_dir, double wall_seconds) {
  using detail::num;
  TrajectoryFiles files;
  const auto head = detail::header("trajectory snapshots", cfg);

  files.snapshots = out_dir / "snapshots.csv";
  {
    auto out = detail::open_out(files.snapshots);
    out << head;
    out << "time,tau,m,mean_z,fwhm,photon_number_over_C2,outcome_flag\n";
    for (const auto& s : rec.snapshots) {
      out << num(s.time) << "," << num(s.tau) << "," << s.counts << "," << num(s.mean_z) << "," << num(s.fwhm) << ","
          << num(s.photon_number / model.photon_scale) << "," << outcome_label(s.outcome) << "\n";
    }
    detail::close_checked(out, files.snapshots);
  }

  if (cfg.snapshots.dump) {
    for (std::size_t k = 0; k < rec.snapshots.size(); ++k) {
      const auto& s = rec.snapshots[k];
      char name[64];
      std::snprintf(name, sizeof name, "snapshot_%03zu.csv", k);
      const auto path = out_dir / "distributions" / name;
      auto out = detail::open_out(path);
      out << head;
      out << "# snapshot = " << k << ", time = " << num(s.time) << ", tau = " << num(s.tau) << ", m = " << s.counts << "\n";
      out << "z,probability\n";
      for (std::size_t i = 0; i < s.probabilities.size(); ++i) out << rec.grid.z_at(i) << "," << num(s.probabilities[i]) << "\n";
      detail::close_checked(out, path);
      files.distributions.push_back(path);
    }
  }

  files.summary = out_dir / "summary.json";
  nlohmann::json j;
  j["kind"] = "trajectory";
  j["config"] = echo_config(cfg);
  j["seed"] = rec.seed;
  j["jump_times"] = rec.jump_times;
  j["photon_before_jump"] = rec.photon_before_jump;
  j["photon_after_jump"] = rec.photon_after_jump;
  j["outcome"] = outcome_json(rec.outcome);
  j["stop_time"] = rec.stop_time;
  j["stop_tau"] = model.tau_rate ? nlohmann::json(model.tau_from_time(rec.stop_time)) : nlohmann::json(nullptr);
  j["collapse_time"] = rec.collapse_time ? nlohmann::json(*rec.collapse_time) : nlohmann::json(nullptr);
  j["dark_absorbed"] = rec.dark_absorbed;
  j["counts"] = rec.jump_times.size();
  j["wall_time_seconds"] = wall_seconds;
  auto out = detail::open_out(files.summary);
  out << j.dump(2) << "\n";
  detail::close_checked(out, files.summary);
  return files;
}

struct EnsembleFiles {
  fs::path histogram;
  fs::path summary;
};

/// Outcome histogram table and JSON summary with the per-trajectory seeds.
inline EnsembleFiles emit_ensemble(const EnsembleSummary& s, const RunConfig& cfg, const fs::path& out_dir,
                                   double wall_seconds) {
  using detail::num;
  EnsembleFiles files;
  const bool folded = cfg.geometry.preset == GeometryKind::diffraction_minimum;
  const double n = static_cast<double>(s.outcomes.size());

  files.histogram = out_dir / "histogram.csv";
  {
    auto out = detail::open_out(files.histogram);
    out << detail::header("ensemble outcome histogram", cfg);
    out << "z,count,frequency,p0_reference";
    if (folded) out << ",folded_count,folded_frequency,folded_p0_reference";
    out << "\n";
    const auto fh = fold(s.grid, s.histogram);
    const auto fp = fold(s.grid, s.reference);
    for (std::size_t i = 0; i < s.grid.size; ++i) {
      const auto z = s.grid.z_at(i);
      out << z << "," << num(s.histogram[i]) << "," << num(s.histogram[i] / n) << "," << num(s.reference[i]);
      if (folded) {
        if (z >= 0) out << "," << num(fh.at(z)) << "," << num(fh.at(z) / n) << "," << num(fp.at(z));
        else out << ",,,";
      }
      out << "\n";
    }
    detail::close_checked(out, files.histogram);
  }

  files.summary = out_dir / "summary.json";
  nlohmann::json j;
  j["kind"] = "ensemble";
  j["config"] = echo_config(cfg);
  j["seed"] = s.master_seed;
  j["n_traj"] = s.outcomes.size();
  j["unresolved"] = s.unresolved;
  j["tv_distance"] = s.tv_distance;
  j["collapse_time"] = {{"n", s.n_collapsed},
                        {"mean", s.mean_collapse_time},
                        {"stddev", s.stddev_collapse_time},
                        {"median", s.median_collapse_time}};
  j["trajectory_seeds"] = s.seeds;
  std::vector<std::string> labels;
  labels.reserve(s.outcomes.size());
  for (const auto& o : s.outcomes) labels.push_back(outcome_label(o));
  j["outcomes"] = labels;
  j["wall_time_seconds"] = wall_seconds;
  auto out = detail::open_out(files.summary);
  out << j.dump(2) << "\n";
  detail::close_checked(out, files.summary);
  return files;
}

/// Reduced-engine versus full-oracle comparison along one record.
struct OracleCheck {
  std::vector<double> times;
  std::vector<std::uint64_t> counts;
  std::vector<double> max_abs_diff;
  double worst = 0.0;
  /// Relative phase of the +-z sectors at the end of the record (minimum
  /// preset with both sectors populated).
  std::optional<double> superposition_phase;
  std::int64_t phase_z = 0;
};

inline OracleCheck oracle_check(const TrajectoryModel& model, const TrajectoryRecord& rec) {
  OracleCheck check;
  FullConditionalState full(model.lattice, model.geometry, model.initial);
  for (const auto& snap : rec.snapshots) {
    full = oracle_evolve(std::move(full), {rec.jump_times, snap.time});
    const auto marginal = z_marginal(full, model.reduction.weights).probabilities();
    double worst = 0.0;
    for (std::size_t i = 0; i < marginal.size(); ++i) worst = std::max(worst, std::abs(marginal[i] - snap.probabilities[i]));
    check.times.push_back(snap.time);
    check.counts.push_back(snap.counts);
    check.max_abs_diff.push_back(worst);
    check.worst = std::max(check.worst, worst);
  }
  if (model.geometry.kind == GeometryKind::diffraction_minimum && !rec.snapshots.empty()) {
    const auto& p = rec.snapshots.back().probabilities;
    double best = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const auto z = rec.grid.z_at(i);
      if (z <= 0) continue;
      const auto mirror = rec.grid.index_of(-z);
      if (mirror && p[i] > 0.0 && p[*mirror] > 0.0 && p[i] + p[*mirror] > best) {
        best = p[i] + p[*mirror];
        check.phase_z = z;
      }
    }
    if (best > 0.0) check.superposition_phase = superposition_phase(full, model.reduction.weights, check.phase_z, -check.phase_z);
  }
  return check;
}

inline fs::path emit_oracle_check(const OracleCheck& check, const RunConfig& cfg, const fs::path& out_dir) {
  const auto path = out_dir / "oracle_check.csv";
  auto out = detail::open_out(path);
  out << detail::header("oracle check", cfg);
  if (check.superposition_phase) {
    out << "# superposition_phase(z=+-" << check.phase_z << ") = " << detail::num(*check.superposition_phase) << "\n";
  }
  out << "time,m,max_abs_diff\n";
  for (std::size_t k = 0; k < check.times.size(); ++k)
    out << detail::num(check.times[k]) << "," << check.counts[k] << "," << detail::num(check.max_abs_diff[k]) << "\n";
  detail::close_checked(out, path);
  return path;
}

}  // namespace qnd

#endif  // QNDSIM_IO_HPP
