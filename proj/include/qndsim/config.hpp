#ifndef QNDSIM_CONFIG_HPP
#define QNDSIM_CONFIG_HPP

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "qndsim/errors.hpp"
#include "qndsim/geometry.hpp"
#include "qndsim/lattice.hpp"
#include "qndsim/trajectory.hpp"

namespace qnd {

enum class IlluminationPattern { contiguous, alternating, explicit_mask };
enum class RunMode { trajectory, ensemble, oracle_check };

struct LatticeConfig {
  std::int64_t n_atoms = 0;
  std::int64_t n_sites = 0;
  IlluminationPattern pattern = IlluminationPattern::contiguous;
  std::int64_t illuminated = 0;  ///< K for the contiguous pattern
  std::vector<bool> mask;        ///< explicit pattern only

  friend bool operator==(const LatticeConfig&, const LatticeConfig&) = default;
};

struct GeometryConfig {
  GeometryKind preset = GeometryKind::diffraction_maximum;
  double kappa = 1.0;
  double u10 = 1.0;
  double u11 = 0.0;
  double a0_re = 1.0, a0_im = 0.0;
  double eta_re = 0.0, eta_im = 0.0;
  double detuning = 0.0;
  bool neglect_shift = true;
  std::vector<double> mode_products_10;  ///< custom preset only
  std::vector<double> mode_products_11;  ///< custom preset only

  friend bool operator==(const GeometryConfig&, const GeometryConfig&) = default;
};

struct RunSection {
  RunMode mode = RunMode::trajectory;
  std::uint64_t seed = 1;
  std::uint64_t n_traj = 1;
  std::optional<double> max_time;
  std::optional<double> max_tau;
  double collapse_eps = 1e-3;
  bool stop_on_collapse = true;
  std::uint64_t max_counts = 10'000'000;
  unsigned threads = 0;

  friend bool operator==(const RunSection&, const RunSection&) = default;
};

struct SnapshotConfig {
  SnapshotUnit unit = SnapshotUnit::tau;
  std::vector<double> points;
  std::uint64_t count = 64;
  bool dump = true;

  friend bool operator==(const SnapshotConfig&, const SnapshotConfig&) = default;
};

struct RunConfig {
  LatticeConfig lattice;
  GeometryConfig geometry;
  InitialState initial;
  RunSection run;
  SnapshotConfig snapshots;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) out.push_back(trim(item));
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

inline std::string fmt_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  const auto t = trim(text);
  T value{};
  const auto* first = t.data();
  const auto* last = t.data() + t.size();
  if (!t.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (t.empty() || ec != std::errc{} || ptr != last) throw config_error(key, "expected a number, got '" + t + "'");
  if constexpr (std::is_floating_point_v<T>) {
    if (!std::isfinite(value)) throw config_error(key, "value must be finite");
  }
  return value;
}

inline bool parse_bool(const std::string& key, const std::string& text) {
  const auto t = trim(text);
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  throw config_error(key, "expected true or false, got '" + t + "'");
}

inline std::vector<double> parse_list(const std::string& key, const std::string& text) {
  std::vector<double> out;
  if (trim(text).empty()) return out;
  for (const auto& item : split(text, ',')) out.push_back(parse_number<double>(key, item));
  return out;
}

template <class E>
E parse_enum(const std::string& key, const std::string& text, const std::map<std::string, E>& names) {
  auto it = names.find(trim(text));
  if (it == names.end()) {
    std::string allowed;
    for (const auto& [n, v] : names) allowed += (allowed.empty() ? "" : ", ") + n;
    throw config_error(key, "unknown value '" + trim(text) + "' (allowed: " + allowed + ")");
  }
  return it->second;
}

template <class E>
std::string enum_name(E value, const std::map<std::string, E>& names) {
  for (const auto& [n, v] : names)
    if (v == value) return n;
  return "?";
}

inline const std::map<std::string, IlluminationPattern>& pattern_names() {
  static const std::map<std::string, IlluminationPattern> m{{"contiguous", IlluminationPattern::contiguous},
                                                            {"alternating", IlluminationPattern::alternating},
                                                            {"explicit", IlluminationPattern::explicit_mask}};
  return m;
}
inline const std::map<std::string, GeometryKind>& preset_names() {
  static const std::map<std::string, GeometryKind> m{{"diffraction_maximum", GeometryKind::diffraction_maximum},
                                                     {"diffraction_minimum", GeometryKind::diffraction_minimum},
                                                     {"mirror_probe", GeometryKind::mirror_probe},
                                                     {"custom", GeometryKind::custom}};
  return m;
}
inline const std::map<std::string, InitialKind>& initial_names() {
  static const std::map<std::string, InitialKind> m{
      {"superfluid", InitialKind::superfluid}, {"mott", InitialKind::mott}, {"custom", InitialKind::custom}};
  return m;
}
inline const std::map<std::string, RunMode>& mode_names() {
  static const std::map<std::string, RunMode> m{
      {"trajectory", RunMode::trajectory}, {"ensemble", RunMode::ensemble}, {"oracle-check", RunMode::oracle_check}};
  return m;
}
inline const std::map<std::string, SnapshotUnit>& unit_names() {
  static const std::map<std::string, SnapshotUnit> m{{"time", SnapshotUnit::time}, {"tau", SnapshotUnit::tau}};
  return m;
}

// Flat view of the INI document: "section.key" -> value.
class KeyTable {
 public:
  explicit KeyTable(const boost::property_tree::ptree& tree) {
    for (const auto& [section, body] : tree) {
      if (body.empty()) throw config_error(section, "key outside of any section");
      for (const auto& [key, value] : body) {
        if (!value.empty()) throw config_error(section + "." + key, "nested keys are not supported");
        values_[section + "." + key] = value.data();
      }
    }
  }

  std::optional<std::string> take(const std::string& key) {
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    used_.insert(key);
    return it->second;
  }

  std::string require(const std::string& key) {
    auto v = take(key);
    if (!v) throw config_error(key, "required key is missing");
    return *v;
  }

  void reject_unknown() const {
    for (const auto& [key, value] : values_)
      if (!used_.count(key)) throw config_error(key, "unknown key");
  }

 private:
  std::map<std::string, std::string> values_;
  std::set<std::string> used_;
};

inline FockConfiguration parse_occupations(const std::string& key, const std::string& text) {
  FockConfiguration c;
  for (const auto& item : split(text, ',')) c.occupations.push_back(parse_number<int>(key, item));
  return c;
}

inline bool transverse_preset(GeometryKind k) {
  return k == GeometryKind::diffraction_maximum || k == GeometryKind::diffraction_minimum;
}

}  // namespace detail

/// Checks every cross-key invariant; throws config_error naming the key.
inline void validate(const RunConfig& c) {
  const auto& l = c.lattice;
  if (l.n_atoms < 1) throw config_error("lattice.n_atoms", "must be at least 1");
  if (l.n_sites < 1) throw config_error("lattice.n_sites", "must be at least 1");
  switch (l.pattern) {
    case IlluminationPattern::contiguous:
      if (l.illuminated < 1 || l.illuminated > l.n_sites) throw config_error("lattice.illuminated", "must satisfy 1 <= K <= n_sites");
      break;
    case IlluminationPattern::alternating:
      if (l.n_sites % 2 != 0) throw config_error("lattice.pattern", "alternating pattern requires even n_sites");
      break;
    case IlluminationPattern::explicit_mask:
      if (static_cast<std::int64_t>(l.mask.size()) != l.n_sites) throw config_error("lattice.mask", "length must equal n_sites");
      if (std::count(l.mask.begin(), l.mask.end(), true) < 1) throw config_error("lattice.mask", "at least one site must be illuminated");
      break;
  }

  const auto& g = c.geometry;
  if (!(g.kappa > 0.0)) throw config_error("geometry.kappa", "must be positive");
  const bool has_eta = g.eta_re != 0.0 || g.eta_im != 0.0;
  const bool has_a0 = g.a0_re != 0.0 || g.a0_im != 0.0;
  if (detail::transverse_preset(g.preset)) {
    if (has_eta) throw config_error("geometry.eta_re", "transverse presets require eta = 0");
    if (!has_a0) throw config_error("geometry.a0_re", "transverse presets require a nonzero probe amplitude");
    if (g.u10 == 0.0) throw config_error("geometry.u10", "transverse presets require a nonzero coupling");
  }
  if (g.preset == GeometryKind::mirror_probe) {
    if (has_a0) throw config_error("geometry.a0_re", "mirror probing requires a0 = 0");
    if (!has_eta) throw config_error("geometry.eta_re", "mirror probing requires a nonzero eta");
  }
  if (g.preset == GeometryKind::custom) {
    if (static_cast<std::int64_t>(g.mode_products_10.size()) != l.n_sites)
      throw config_error("geometry.mode_products_10", "length must equal n_sites");
    if (static_cast<std::int64_t>(g.mode_products_11.size()) != l.n_sites)
      throw config_error("geometry.mode_products_11", "length must equal n_sites");
  } else if (!g.mode_products_10.empty() || !g.mode_products_11.empty()) {
    throw config_error("geometry.mode_products_10", "mode products are only accepted with preset = custom");
  }

  if (c.initial.kind == InitialKind::mott && l.n_atoms % l.n_sites != 0)
    throw config_error("initial.kind", "mott requires n_atoms divisible by n_sites");
  if (c.initial.kind == InitialKind::custom) {
    try {
      validate(c.initial, LatticeSpec(l.n_atoms, std::vector<bool>(static_cast<std::size_t>(l.n_sites), true)));
    } catch (const argument_error& e) {
      throw config_error("initial.states", e.what());
    }
  } else if (!c.initial.custom_weights.empty()) {
    throw config_error("initial.states", "only accepted with kind = custom");
  }

  const auto& r = c.run;
  if (r.n_traj < 1) throw config_error("run.n_traj", "must be at least 1");
  if (r.max_time && *r.max_time < 0.0) throw config_error("run.max_time", "must be nonnegative");
  if (r.max_tau && *r.max_tau < 0.0) throw config_error("run.max_tau", "must be nonnegative");
  if (r.max_time && r.max_tau) throw config_error("run.max_tau", "give either max_time or max_tau, not both");
  if (r.max_tau && !detail::transverse_preset(g.preset)) throw config_error("run.max_tau", "tau is defined for transverse presets only");
  if (!(r.collapse_eps > 0.0 && r.collapse_eps < 1.0)) throw config_error("run.collapse_eps", "must lie in (0, 1)");
  if (!r.stop_on_collapse && !r.max_time && !r.max_tau)
    throw config_error("run.max_time", "a run without collapse stopping needs max_time or max_tau");
  if (r.max_counts < 1) throw config_error("run.max_counts", "must be at least 1");

  if (c.snapshots.unit == SnapshotUnit::tau && !detail::transverse_preset(g.preset))
    throw config_error("snapshots.unit", "tau is defined for transverse presets only");
  for (double x : c.snapshots.points)
    if (x < 0.0) throw config_error("snapshots.points", "must be nonnegative");
}

/// Parses the INI-style run configuration. Unknown keys are errors.
inline RunConfig parse_config(const std::string& text) {
  boost::property_tree::ptree tree;
  try {
    std::istringstream in(text);
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw config_error("", std::string("malformed config: ") + e.what());
  }
  detail::KeyTable keys(tree);
  using detail::parse_number;
  RunConfig c;

  auto& l = c.lattice;
  l.n_atoms = parse_number<std::int64_t>("lattice.n_atoms", keys.require("lattice.n_atoms"));
  l.n_sites = parse_number<std::int64_t>("lattice.n_sites", keys.require("lattice.n_sites"));
  if (auto v = keys.take("lattice.pattern")) l.pattern = detail::parse_enum("lattice.pattern", *v, detail::pattern_names());
  l.illuminated = l.n_sites;
  if (auto v = keys.take("lattice.illuminated")) {
    if (l.pattern != IlluminationPattern::contiguous) throw config_error("lattice.illuminated", "only used by the contiguous pattern");
    l.illuminated = parse_number<std::int64_t>("lattice.illuminated", *v);
  }
  if (l.pattern == IlluminationPattern::alternating) l.illuminated = l.n_sites / 2;
  if (auto v = keys.take("lattice.mask")) {
    if (l.pattern != IlluminationPattern::explicit_mask) throw config_error("lattice.mask", "only used by the explicit pattern");
    for (const auto& item : detail::split(*v, ',')) l.mask.push_back(detail::parse_bool("lattice.mask", item));
  }
  if (l.pattern == IlluminationPattern::explicit_mask) {
    if (l.mask.empty()) throw config_error("lattice.mask", "required key is missing");
    l.illuminated = std::count(l.mask.begin(), l.mask.end(), true);
  }

  auto& g = c.geometry;
  g.preset = detail::parse_enum("geometry.preset", keys.require("geometry.preset"), detail::preset_names());
  const bool transverse = detail::transverse_preset(g.preset);
  g.a0_re = transverse ? 1.0 : 0.0;
  g.eta_re = g.preset == GeometryKind::mirror_probe ? 1.0 : 0.0;
  g.u10 = transverse ? 1.0 : 0.0;
  g.u11 = g.preset == GeometryKind::mirror_probe ? 1.0 : 0.0;
  g.neglect_shift = g.preset != GeometryKind::mirror_probe;
  auto num = [&](const char* key, double& dst) {
    if (auto v = keys.take(key)) dst = parse_number<double>(key, *v);
  };
  num("geometry.kappa", g.kappa);
  num("geometry.u10", g.u10);
  num("geometry.u11", g.u11);
  num("geometry.a0_re", g.a0_re);
  num("geometry.a0_im", g.a0_im);
  num("geometry.eta_re", g.eta_re);
  num("geometry.eta_im", g.eta_im);
  num("geometry.detuning", g.detuning);
  if (auto v = keys.take("geometry.neglect_shift")) g.neglect_shift = detail::parse_bool("geometry.neglect_shift", *v);
  if (auto v = keys.take("geometry.mode_products_10")) g.mode_products_10 = detail::parse_list("geometry.mode_products_10", *v);
  if (auto v = keys.take("geometry.mode_products_11")) g.mode_products_11 = detail::parse_list("geometry.mode_products_11", *v);

  if (auto v = keys.take("initial.kind")) c.initial.kind = detail::parse_enum("initial.kind", *v, detail::initial_names());
  if (auto v = keys.take("initial.states")) {
    for (const auto& entry : detail::split(*v, ';')) {
      if (entry.empty()) continue;
      const auto colon = entry.find(':');
      if (colon == std::string::npos) throw config_error("initial.states", "entries look like 'q1,q2,...: weight'");
      auto config = detail::parse_occupations("initial.states", entry.substr(0, colon));
      const double w = parse_number<double>("initial.states", entry.substr(colon + 1));
      if (!c.initial.custom_weights.emplace(std::move(config), w).second)
        throw config_error("initial.states", "configuration listed twice");
    }
  }

  auto& r = c.run;
  if (auto v = keys.take("run.mode")) r.mode = detail::parse_enum("run.mode", *v, detail::mode_names());
  if (auto v = keys.take("run.seed")) r.seed = parse_number<std::uint64_t>("run.seed", *v);
  if (auto v = keys.take("run.n_traj")) r.n_traj = parse_number<std::uint64_t>("run.n_traj", *v);
  auto opt = [&](const char* key, std::optional<double>& dst) {
    if (auto v = keys.take(key); v && detail::trim(*v) != "none") dst = parse_number<double>(key, *v);
  };
  opt("run.max_time", r.max_time);
  opt("run.max_tau", r.max_tau);
  num("run.collapse_eps", r.collapse_eps);
  if (auto v = keys.take("run.stop_on_collapse")) r.stop_on_collapse = detail::parse_bool("run.stop_on_collapse", *v);
  if (auto v = keys.take("run.max_counts")) r.max_counts = parse_number<std::uint64_t>("run.max_counts", *v);
  if (auto v = keys.take("run.threads")) r.threads = parse_number<unsigned>("run.threads", *v);

  auto& s = c.snapshots;
  s.unit = transverse ? SnapshotUnit::tau : SnapshotUnit::time;
  if (auto v = keys.take("snapshots.unit")) s.unit = detail::parse_enum("snapshots.unit", *v, detail::unit_names());
  if (auto v = keys.take("snapshots.points")) s.points = detail::parse_list("snapshots.points", *v);
  if (auto v = keys.take("snapshots.count")) s.count = parse_number<std::uint64_t>("snapshots.count", *v);
  if (auto v = keys.take("snapshots.dump")) s.dump = detail::parse_bool("snapshots.dump", *v);

  keys.reject_unknown();
  validate(c);
  return c;
}

/// Full config with every default spelled out; parse_config of the result
/// reproduces `c`.
inline std::string echo_config(const RunConfig& c) {
  using detail::fmt_double;
  std::ostringstream o;
  auto list = [](const std::vector<double>& xs) {
    std::string s;
    for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? ", " : "") + fmt_double(xs[i]);
    return s;
  };
  auto optional = [&](const std::optional<double>& x) { return x ? fmt_double(*x) : std::string("none"); };
  auto boolean = [](bool b) { return b ? "true" : "false"; };

  const auto& l = c.lattice;
  o << "[lattice]\n";
  o << "n_atoms = " << l.n_atoms << "\n";
  o << "n_sites = " << l.n_sites << "\n";
  o << "pattern = " << detail::enum_name(l.pattern, detail::pattern_names()) << "\n";
  if (l.pattern == IlluminationPattern::contiguous) o << "illuminated = " << l.illuminated << "\n";
  if (l.pattern == IlluminationPattern::explicit_mask) {
    o << "mask = ";
    for (std::size_t i = 0; i < l.mask.size(); ++i) o << (i ? "," : "") << (l.mask[i] ? 1 : 0);
    o << "\n";
  }

  const auto& g = c.geometry;
  o << "\n[geometry]\n";
  o << "preset = " << detail::enum_name(g.preset, detail::preset_names()) << "\n";
  o << "kappa = " << fmt_double(g.kappa) << "\n";
  o << "u10 = " << fmt_double(g.u10) << "\n";
  o << "u11 = " << fmt_double(g.u11) << "\n";
  o << "a0_re = " << fmt_double(g.a0_re) << "\n";
  o << "a0_im = " << fmt_double(g.a0_im) << "\n";
  o << "eta_re = " << fmt_double(g.eta_re) << "\n";
  o << "eta_im = " << fmt_double(g.eta_im) << "\n";
  o << "detuning = " << fmt_double(g.detuning) << "\n";
  o << "neglect_shift = " << boolean(g.neglect_shift) << "\n";
  if (g.preset == GeometryKind::custom) {
    o << "mode_products_10 = " << list(g.mode_products_10) << "\n";
    o << "mode_products_11 = " << list(g.mode_products_11) << "\n";
  }

  o << "\n[initial]\n";
  o << "kind = " << detail::enum_name(c.initial.kind, detail::initial_names()) << "\n";
  if (c.initial.kind == InitialKind::custom) {
    o << "states = ";
    bool first = true;
    for (const auto& [config, w] : c.initial.custom_weights) {
      o << (first ? "" : "; ");
      first = false;
      for (std::size_t j = 0; j < config.occupations.size(); ++j) o << (j ? "," : "") << config.occupations[j];
      o << ": " << fmt_double(w);
    }
    o << "\n";
  }

  const auto& r = c.run;
  o << "\n[run]\n";
  o << "mode = " << detail::enum_name(r.mode, detail::mode_names()) << "\n";
  o << "seed = " << r.seed << "\n";
  o << "n_traj = " << r.n_traj << "\n";
  o << "max_time = " << optional(r.max_time) << "\n";
  o << "max_tau = " << optional(r.max_tau) << "\n";
  o << "collapse_eps = " << fmt_double(r.collapse_eps) << "\n";
  o << "stop_on_collapse = " << boolean(r.stop_on_collapse) << "\n";
  o << "max_counts = " << r.max_counts << "\n";
  o << "threads = " << r.threads << "\n";

  const auto& s = c.snapshots;
  o << "\n[snapshots]\n";
  o << "unit = " << detail::enum_name(s.unit, detail::unit_names()) << "\n";
  o << "points = " << list(s.points) << "\n";
  o << "count = " << s.count << "\n";
  o << "dump = " << boolean(s.dump) << "\n";
  return o.str();
}

inline LatticeSpec make_lattice(const RunConfig& c) {
  const auto& l = c.lattice;
  switch (l.pattern) {
    case IlluminationPattern::contiguous:
      return LatticeSpec::contiguous(l.n_atoms, l.n_sites, l.illuminated);
    case IlluminationPattern::alternating:
      return LatticeSpec::alternating(l.n_atoms, l.n_sites);
    case IlluminationPattern::explicit_mask:
      return LatticeSpec(l.n_atoms, l.mask);
  }
  throw config_error("lattice.pattern", "unknown pattern");
}

inline OpticalGeometry make_geometry(const RunConfig& c, const LatticeSpec& lattice) {
  const auto& g = c.geometry;
  const complex a0{g.a0_re, g.a0_im};
  const complex eta{g.eta_re, g.eta_im};
  switch (g.preset) {
    case GeometryKind::diffraction_maximum:
      return diffraction_maximum(lattice, {g.u10, a0, g.detuning, g.kappa, g.u11, g.neglect_shift});
    case GeometryKind::diffraction_minimum:
      return diffraction_minimum(lattice, {g.u10, a0, g.detuning, g.kappa, g.u11, g.neglect_shift});
    case GeometryKind::mirror_probe:
      return mirror_probe(lattice, {eta, g.u11, g.detuning, g.kappa});
    case GeometryKind::custom: {
      OpticalGeometry out;
      for (double p : g.mode_products_10) out.mode_products_10.emplace_back(p, 0.0);
      out.mode_products_11 = g.mode_products_11;
      out.coupling_u10 = g.u10;
      out.coupling_u11 = g.u11;
      out.probe_amplitude_a0 = a0;
      out.mirror_drive_eta = eta;
      out.detuning_dp = g.detuning;
      out.kappa = g.kappa;
      out.neglect_shift = g.neglect_shift;
      return out;
    }
  }
  throw config_error("geometry.preset", "unknown preset");
}

inline StopRule make_stop_rule(const RunConfig& c, const TrajectoryModel& model) {
  StopRule s;
  s.max_time = c.run.max_time;
  if (c.run.max_tau) s.max_time = model.time_from_tau(*c.run.max_tau);
  s.stop_on_collapse = c.run.stop_on_collapse;
  s.collapse_eps = c.run.collapse_eps;
  s.max_counts = c.run.max_counts;
  return s;
}

inline SnapshotPlan make_snapshot_plan(const RunConfig& c) {
  return SnapshotPlan{c.snapshots.unit, c.snapshots.points, static_cast<std::size_t>(c.snapshots.count)};
}

}  // namespace qnd

#endif  // QNDSIM_CONFIG_HPP
