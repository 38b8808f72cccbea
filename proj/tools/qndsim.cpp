// Command-line driver: single trajectories, ensembles and oracle checks.
//
// Exit codes: 0 success, 2 configuration error, 3 runtime error.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "qndsim/qndsim.hpp"

namespace {

constexpr int exit_config = 2;
constexpr int exit_runtime = 3;

struct Overrides {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> n_traj;
  std::string out_dir = "out";
  std::string snapshots;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("config", o.config_path, "Run configuration (INI)")->required();
  cmd->add_option("--seed", o.seed, "Override run.seed");
  cmd->add_option("--out-dir", o.out_dir, "Output directory")->capture_default_str();
  cmd->add_option("--snapshots", o.snapshots, "Comma-separated snapshot points, in snapshots.unit");
}

qnd::RunConfig load(const Overrides& o, qnd::RunMode mode) {
  std::ifstream in(o.config_path);
  if (!in) throw qnd::config_error("", "cannot read config file " + o.config_path);
  std::stringstream text;
  text << in.rdbuf();
  auto cfg = qnd::parse_config(text.str());
  cfg.run.mode = mode;
  if (o.seed) cfg.run.seed = *o.seed;
  if (o.n_traj) cfg.run.n_traj = *o.n_traj;
  if (!o.snapshots.empty()) cfg.snapshots.points = qnd::detail::parse_list("--snapshots", o.snapshots);
  qnd::validate(cfg);
  return cfg;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

int run_trajectory_cmd(const Overrides& o) {
  const auto cfg = load(o, qnd::RunMode::trajectory);
  const auto start = std::chrono::steady_clock::now();
  const auto lattice = qnd::make_lattice(cfg);
  const auto model = qnd::make_model(lattice, qnd::make_geometry(cfg, lattice), cfg.initial);
  const auto rec = qnd::run_trajectory(model, cfg.run.seed, qnd::make_stop_rule(cfg, model), qnd::make_snapshot_plan(cfg));
  const auto files = qnd::emit_trajectory(rec, model, cfg, o.out_dir, seconds_since(start));
  std::printf("seed %llu: %zu counts, stop time %.6g, outcome %s\n", static_cast<unsigned long long>(rec.seed),
              rec.jump_times.size(), rec.stop_time, qnd::outcome_label(rec.outcome).c_str());
  std::printf("wrote %s (%zu snapshots)\n", files.snapshots.string().c_str(), rec.snapshots.size());
  return 0;
}

int run_ensemble_cmd(const Overrides& o) {
  const auto cfg = load(o, qnd::RunMode::ensemble);
  const auto start = std::chrono::steady_clock::now();
  const auto lattice = qnd::make_lattice(cfg);
  const auto model = qnd::make_model(lattice, qnd::make_geometry(cfg, lattice), cfg.initial);
  const auto summary = qnd::ensemble_run(model, cfg.run.n_traj, cfg.run.seed, qnd::make_stop_rule(cfg, model), cfg.run.threads);
  const auto files = qnd::emit_ensemble(summary, cfg, o.out_dir, seconds_since(start));
  std::printf("%zu trajectories, %zu unresolved, TV distance to p0 %.6g\n", summary.outcomes.size(), summary.unresolved,
              summary.tv_distance);
  std::printf("wrote %s\n", files.histogram.string().c_str());
  return 0;
}

int oracle_check_cmd(const Overrides& o) {
  const auto cfg = load(o, qnd::RunMode::oracle_check);
  const auto lattice = qnd::make_lattice(cfg);
  const auto model = qnd::make_model(lattice, qnd::make_geometry(cfg, lattice), cfg.initial);
  const auto rec = qnd::run_trajectory(model, cfg.run.seed, qnd::make_stop_rule(cfg, model), qnd::make_snapshot_plan(cfg));
  const auto check = qnd::oracle_check(model, rec);
  const auto path = qnd::emit_oracle_check(check, cfg, o.out_dir);
  std::printf("max |engine - oracle| over %zu snapshots: %.3g\n", check.times.size(), check.worst);
  if (check.superposition_phase) {
    std::printf("relative phase of z = +-%lld sectors after %zu counts: %.12g rad\n", static_cast<long long>(check.phase_z),
                rec.jump_times.size(), *check.superposition_phase);
  }
  std::printf("wrote %s\n", path.string().c_str());
  if (!(check.worst <= 1e-12)) {
    std::fprintf(stderr, "oracle and engine disagree beyond 1e-12\n");
    return exit_runtime;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cavity photon-counting collapse of lattice atom states"};
  app.require_subcommand(1);
  Overrides traj, ens, oracle;
  auto* t = app.add_subcommand("run-trajectory", "Run one seeded trajectory");
  add_common(t, traj);
  auto* e = app.add_subcommand("run-ensemble", "Run an ensemble of trajectories");
  add_common(e, ens);
  e->add_option("--n-traj", ens.n_traj, "Override run.n_traj");
  auto* c = app.add_subcommand("oracle-check", "Compare the reduced engine with the full-configuration oracle");
  add_common(c, oracle);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& err) {
    return app.exit(err);
  } catch (const CLI::ParseError& err) {
    app.exit(err);
    return exit_config;
  }

  try {
    if (t->parsed()) return run_trajectory_cmd(traj);
    if (e->parsed()) return run_ensemble_cmd(ens);
    if (c->parsed()) return oracle_check_cmd(oracle);
  } catch (const qnd::config_error& err) {
    std::fprintf(stderr, "config error: %s\n", err.what());
    return exit_config;
  } catch (const std::exception& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return exit_runtime;
  }
  return exit_config;
}
