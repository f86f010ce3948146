#pragma once

// INI-style configuration: one section per ring / coupler / modulation, plus
// drive, grid, sweep, clock, run, analysis and lattice sections. Frequencies
// may be given as *_hz (converted with 2 pi) or *_rad_s; serialization always
// writes *_rad_s so that parse(serialize(c)) == c exactly.

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "synthring/floquet.hpp"
#include "synthring/tight_binding.hpp"

namespace synthring {

// Uniform detuning sweep, center +- span/2.
struct SweepSpec {
  double center = 0.0;  // rad/s
  double span = 0.0;    // rad/s
  int points = 1;

  std::vector<double> detunings() const {
    if (points == 1) return {center};
    FrequencyGrid g{0.0, center, span, points};
    return g.offsets();
  }

  void validate() const {
    if (points < 1) throw InvariantError("sweep.points", "sweep.points must be >= 1");
    if (points > 1 && !(span > 0.0)) throw InvariantError("sweep.span", "sweep.span must be > 0 when points > 1");
  }

  bool operator==(const SweepSpec&) const = default;
};

struct AnalysisOptions {
  double prominence = kDefaultProminence;
  int fit_n_min = 3;
  std::optional<int> fit_n_max;
  double ridge_threshold = 0.3;
  double level_threshold = 0.05;

  bool operator==(const AnalysisOptions&) const = default;
};

// Lattice for the eigen command. Unset rates fall back to values derived from
// the topology (J from the modulation, K from the inter-ring coupler, loss
// from the photon lifetime).
struct LatticeConfig {
  LatticeKind kind = LatticeKind::Chain;
  int sites = 9;
  int right_sites = 0;
  std::optional<double> hopping;
  std::optional<double> rung_coupling;
  double flux = 0.0;
  std::optional<double> site_loss_rate;
  Boundary boundary = Boundary::Open;
  int left_offset = -1;
  int k_points = 128;
  int drive_site = -1;  // response map drive; negative means the left leg's centre

  bool operator==(const LatticeConfig&) const = default;
};

struct Config {
  TopologySpec topology;
  DriveSpec drive;
  std::optional<FrequencyGrid> grid;  // static transmission; auto when absent
  SweepSpec sweep;
  ClockOptions clock;
  RunOptions run;
  AnalysisOptions analysis;
  std::optional<LatticeConfig> lattice;

  bool operator==(const Config&) const = default;
};

namespace detail {

using boost::property_tree::ptree;

inline const std::map<std::string, std::set<std::string>>& schema() {
  static const std::set<std::string> ring{"length_m", "group_velocity_m_s", "roundtrip_power_loss", "label"};
  static const std::set<std::string> coupler{"amplitude_ratio"};
  static const std::set<std::string> mod{"enabled", "frequency_hz", "frequency_rad_s", "phase_depth_rad",
                                         "phase_offset_rad"};
  static const std::map<std::string, std::set<std::string>> s{
      {"topology", {"variant"}},
      {"main_ring", ring},
      {"aux_ring", ring},
      {"right_ring", ring},
      {"bus_coupler", coupler},
      {"aux_coupler", coupler},
      {"inter_ring_coupler", coupler},
      {"modulation", mod},
      {"right_modulation", mod},
      {"drive", {"detuning_hz", "detuning_rad_s", "input_site", "amplitude"}},
      {"grid",
       {"reference_frequency_hz", "reference_frequency_rad_s", "center_hz", "center_rad_s", "span_hz", "span_rad_s",
        "points"}},
      {"sweep", {"center_hz", "center_rad_s", "span_hz", "span_rad_s", "points"}},
      {"clock", {"samples_per_aux_roundtrip", "n_max"}},
      {"run", {"settle_lifetimes", "record_periods", "max_extensions", "settle_tolerance"}},
      {"analysis", {"prominence", "fit_n_min", "fit_n_max", "ridge_threshold", "level_threshold"}},
      {"lattice",
       {"kind", "sites", "right_sites", "hopping_hz", "hopping_rad_s", "rung_hz", "rung_rad_s", "flux_rad",
        "site_loss_rate_per_s", "boundary", "left_offset", "k_points", "drive_site"}},
  };
  return s;
}

class Section {
 public:
  Section(const ptree* node, std::string name) : node_(node), name_(std::move(name)) {}

  bool present() const { return node_ != nullptr; }
  std::string key(const std::string& k) const { return name_ + "." + k; }

  std::optional<std::string> raw(const std::string& k) const {
    if (!node_) return std::nullopt;
    auto v = node_->get_optional<std::string>(k);
    if (!v) return std::nullopt;
    return *v;
  }

  double number(const std::string& k) const {
    auto v = raw(k);
    if (!v) throw MissingKeyError(key(k));
    return parse_number(k, *v);
  }
  double number(const std::string& k, double fallback) const { return raw(k) ? number(k) : fallback; }

  int integer(const std::string& k) const {
    auto v = raw(k);
    if (!v) throw MissingKeyError(key(k));
    const double d = parse_number(k, *v);
    if (d != std::floor(d) || std::abs(d) > 1e9) throw ParseError(key(k), key(k) + ": expected an integer, got '" + *v + "'");
    return static_cast<int>(d);
  }
  int integer(const std::string& k, int fallback) const { return raw(k) ? integer(k) : fallback; }

  bool boolean(const std::string& k, bool fallback) const {
    auto v = raw(k);
    if (!v) return fallback;
    if (*v == "true" || *v == "1" || *v == "yes") return true;
    if (*v == "false" || *v == "0" || *v == "no") return false;
    throw ParseError(key(k), key(k) + ": expected true or false, got '" + *v + "'");
  }

  std::string text(const std::string& k, const std::string& fallback) const { return raw(k).value_or(fallback); }

  // Frequency given as <stem>_hz or <stem>_rad_s (not both). "auto" -> nullopt.
  std::optional<double> frequency(const std::string& stem, bool allow_auto = false) const {
    auto hz = raw(stem + "_hz");
    auto rad = raw(stem + "_rad_s");
    if (hz && rad) throw ParseError(key(stem + "_hz"), "give either " + key(stem + "_hz") + " or " + key(stem + "_rad_s"));
    if (!hz && !rad) return std::nullopt;
    const std::string k = hz ? stem + "_hz" : stem + "_rad_s";
    const std::string& v = hz ? *hz : *rad;
    if (v == "auto") {
      if (!allow_auto) throw ParseError(key(k), key(k) + ": 'auto' is not allowed here");
      return std::nullopt;
    }
    const double x = parse_number(k, v);
    return hz ? kTwoPi * x : x;
  }
  double frequency(const std::string& stem, double fallback) const { return frequency(stem).value_or(fallback); }
  double required_frequency(const std::string& stem) const {
    auto f = frequency(stem);
    if (!f) throw MissingKeyError(key(stem + "_hz"));
    return *f;
  }

 private:
  double parse_number(const std::string& k, const std::string& v) const {
    const char* b = v.c_str();
    char* e = nullptr;
    const double d = std::strtod(b, &e);
    if (e == b || *e != '\0' || !std::isfinite(d)) throw ParseError(key(k), key(k) + ": not a number: '" + v + "'");
    return d;
  }

  const ptree* node_;
  std::string name_;
};

inline RingSpec read_ring(const Section& s) {
  RingSpec r;
  r.length = s.number("length_m");
  r.group_velocity = s.number("group_velocity_m_s");
  r.roundtrip_power_loss = s.number("roundtrip_power_loss", 0.0);
  r.label = s.text("label", "");
  return r;
}

// Keys absent from the section keep the values of `base`.
inline ModulationSpec read_modulation(const Section& s, ModulationSpec base = {}) {
  ModulationSpec m = base;
  m.enabled = s.boolean("enabled", true);
  if (s.raw("frequency_hz") || s.raw("frequency_rad_s")) m.frequency = s.frequency("frequency", true);
  m.phase_depth = s.number("phase_depth_rad", base.phase_depth);
  m.phase_offset = s.number("phase_offset_rad", base.phase_offset);
  return m;
}

}  // namespace detail

inline Config parse_config(const std::string& text) {
  using detail::ptree;
  ptree tree;
  std::istringstream in(text);
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ParseError("", "config parse error at line " + std::to_string(e.line()) + ": " + e.message());
  }
  const auto& schema = detail::schema();
  for (const auto& [name, node] : tree) {
    auto it = schema.find(name);
    if (it == schema.end()) {
      if (node.empty()) throw ParseError(name, "key '" + name + "' must be inside a section");
      throw ParseError(name, "unknown section [" + name + "]");
    }
    for (const auto& [k, v] : node) {
      if (!it->second.count(k)) throw ParseError(name + "." + k, "unknown key " + name + "." + k);
    }
  }
  auto section = [&](const std::string& name) {
    auto child = tree.get_child_optional(name);
    return detail::Section(child ? &*child : nullptr, name);
  };

  Config c;
  auto& t = c.topology;
  const auto topo = section("topology");
  if (!topo.present() || !topo.raw("variant")) throw MissingKeyError("topology.variant");
  const auto variant = parse_variant(*topo.raw("variant"));
  if (!variant) throw ParseError("topology.variant", "topology.variant: unknown variant '" + *topo.raw("variant") + "'");
  t.variant = *variant;

  auto required = [&](const std::string& name) {
    auto s = section(name);
    if (!s.present()) throw MissingKeyError(name);
    return s;
  };
  t.main_ring = detail::read_ring(required("main_ring"));
  t.bus_coupler = CouplerSpec{required("bus_coupler").number("amplitude_ratio")};
  if (has_aux(t.variant)) {
    t.aux_ring = detail::read_ring(required("aux_ring"));
    t.aux_coupler = CouplerSpec{required("aux_coupler").number("amplitude_ratio")};
  }
  if (is_ladder(t.variant)) {
    t.right_ring = detail::read_ring(required("right_ring"));
    t.inter_ring_coupler = CouplerSpec{required("inter_ring_coupler").number("amplitude_ratio")};
  }
  for (const char* name : {"aux_ring", "aux_coupler"})
    if (!has_aux(t.variant) && section(name).present())
      throw InvariantError(name, std::string("[") + name + "] is only valid for aux variants");
  for (const char* name : {"right_ring", "inter_ring_coupler", "right_modulation"})
    if (!is_ladder(t.variant) && section(name).present())
      throw InvariantError(name, std::string("[") + name + "] is only valid for ladder variants");
  const auto mod = section("modulation");
  if (mod.present()) t.modulation = detail::read_modulation(mod);
  // The right ring inherits every modulation setting it does not override.
  if (is_ladder(t.variant) && section("right_modulation").present())
    t.right_modulation = detail::read_modulation(section("right_modulation"), t.modulation);

  const auto drive = section("drive");
  c.drive.detuning = drive.frequency("detuning", 0.0);
  c.drive.input_site = drive.integer("input_site", has_aux(t.variant) ? t.aux_ratio() / 2 : 0);
  c.drive.amplitude = drive.number("amplitude", 1.0);

  if (const auto g = section("grid"); g.present()) {
    FrequencyGrid grid;
    grid.reference_frequency = g.frequency("reference_frequency", 0.0);
    grid.center_offset = g.frequency("center", 0.0);
    grid.span = g.required_frequency("span");
    grid.points = g.integer("points");
    c.grid = grid;
  }
  if (const auto s = section("sweep"); s.present()) {
    c.sweep.center = s.frequency("center", 0.0);
    c.sweep.span = s.frequency("span", 0.0);
    c.sweep.points = s.integer("points", 1);
  }
  const auto clock = section("clock");
  c.clock.samples_per_aux_roundtrip = clock.integer("samples_per_aux_roundtrip", c.clock.samples_per_aux_roundtrip);
  c.clock.n_max = clock.integer("n_max", c.clock.n_max);
  const auto run = section("run");
  c.run.settle_lifetimes = run.number("settle_lifetimes", c.run.settle_lifetimes);
  c.run.record_periods = run.integer("record_periods", c.run.record_periods);
  c.run.max_extensions = run.integer("max_extensions", c.run.max_extensions);
  c.run.settle_tolerance = run.number("settle_tolerance", c.run.settle_tolerance);
  const auto an = section("analysis");
  c.analysis.prominence = an.number("prominence", c.analysis.prominence);
  c.analysis.fit_n_min = an.integer("fit_n_min", c.analysis.fit_n_min);
  if (an.raw("fit_n_max")) c.analysis.fit_n_max = an.integer("fit_n_max");
  c.analysis.ridge_threshold = an.number("ridge_threshold", c.analysis.ridge_threshold);
  c.analysis.level_threshold = an.number("level_threshold", c.analysis.level_threshold);

  if (const auto l = section("lattice"); l.present()) {
    LatticeConfig lc;
    const auto kind = l.text("kind", "chain");
    if (kind == "chain") lc.kind = LatticeKind::Chain;
    else if (kind == "ladder") lc.kind = LatticeKind::Ladder;
    else throw ParseError("lattice.kind", "lattice.kind must be chain or ladder, got '" + kind + "'");
    lc.sites = l.integer("sites", lc.sites);
    lc.right_sites = l.integer("right_sites", lc.kind == LatticeKind::Ladder ? lc.sites : 0);
    lc.hopping = l.frequency("hopping");
    lc.rung_coupling = l.frequency("rung");
    lc.flux = l.number("flux_rad", 0.0);
    if (l.raw("site_loss_rate_per_s")) lc.site_loss_rate = l.number("site_loss_rate_per_s");
    const auto b = l.text("boundary", "open");
    if (b == "open") lc.boundary = Boundary::Open;
    else if (b == "periodic") lc.boundary = Boundary::Periodic;
    else throw ParseError("lattice.boundary", "lattice.boundary must be open or periodic, got '" + b + "'");
    lc.left_offset = l.integer("left_offset", -1);
    lc.k_points = l.integer("k_points", lc.k_points);
    lc.drive_site = l.integer("drive_site", -1);
    c.lattice = lc;
  }

  t.validate();
  c.drive.validate();
  if (c.grid) c.grid->validate();
  c.sweep.validate();
  if (c.run.record_periods < 2) throw InvariantError("run.record_periods", "run.record_periods must be >= 2");
  if (c.run.settle_lifetimes < 8.0) throw InvariantError("run.settle_lifetimes", "run.settle_lifetimes must be >= 8");
  if (c.clock.samples_per_aux_roundtrip < 4)
    throw InvariantError("clock.samples_per_aux_roundtrip", "clock.samples_per_aux_roundtrip must be >= 4");
  if (c.clock.n_max < 1) throw InvariantError("clock.n_max", "clock.n_max must be >= 1");
  if (!(c.analysis.prominence > 0.0)) throw InvariantError("analysis.prominence", "analysis.prominence must be > 0");
  if (c.lattice && c.lattice->k_points < 2) throw InvariantError("lattice.k_points", "lattice.k_points must be >= 2");
  return c;
}

inline Config load_config(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ParseError("", "cannot read config file '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

// ---------------------------------------------------------------------------
// Serialization

namespace detail {

inline std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class IniWriter {
 public:
  void section(const std::string& name) {
    if (!out_.str().empty()) out_ << '\n';
    out_ << '[' << name << "]\n";
  }
  void put(const std::string& k, const std::string& v) { out_ << k << " = " << v << '\n'; }
  void put(const std::string& k, double v) { put(k, num(v)); }
  void put(const std::string& k, int v) { put(k, std::to_string(v)); }
  void put(const std::string& k, bool v) { put(k, std::string(v ? "true" : "false")); }
  std::string str() const { return out_.str(); }

 private:
  std::ostringstream out_;
};

inline void write_ring(IniWriter& w, const std::string& name, const RingSpec& r) {
  w.section(name);
  w.put("length_m", r.length);
  w.put("group_velocity_m_s", r.group_velocity);
  w.put("roundtrip_power_loss", r.roundtrip_power_loss);
  if (!r.label.empty()) w.put("label", r.label);
}

inline void write_modulation(IniWriter& w, const std::string& name, const ModulationSpec& m) {
  w.section(name);
  w.put("enabled", m.enabled);
  if (m.frequency) w.put("frequency_rad_s", *m.frequency);
  else w.put("frequency_rad_s", std::string("auto"));
  w.put("phase_depth_rad", m.phase_depth);
  w.put("phase_offset_rad", m.phase_offset);
}

}  // namespace detail

inline std::string serialize(const Config& c) {
  detail::IniWriter w;
  const auto& t = c.topology;
  w.section("topology");
  w.put("variant", to_string(t.variant));
  detail::write_ring(w, "main_ring", t.main_ring);
  if (t.aux_ring) detail::write_ring(w, "aux_ring", *t.aux_ring);
  if (t.right_ring) detail::write_ring(w, "right_ring", *t.right_ring);
  w.section("bus_coupler");
  w.put("amplitude_ratio", t.bus_coupler.amplitude_ratio);
  if (t.aux_coupler) {
    w.section("aux_coupler");
    w.put("amplitude_ratio", t.aux_coupler->amplitude_ratio);
  }
  if (t.inter_ring_coupler) {
    w.section("inter_ring_coupler");
    w.put("amplitude_ratio", t.inter_ring_coupler->amplitude_ratio);
  }
  detail::write_modulation(w, "modulation", t.modulation);
  if (t.right_modulation) detail::write_modulation(w, "right_modulation", *t.right_modulation);

  w.section("drive");
  w.put("detuning_rad_s", c.drive.detuning);
  w.put("input_site", c.drive.input_site);
  w.put("amplitude", c.drive.amplitude);
  if (c.grid) {
    w.section("grid");
    w.put("reference_frequency_rad_s", c.grid->reference_frequency);
    w.put("center_rad_s", c.grid->center_offset);
    w.put("span_rad_s", c.grid->span);
    w.put("points", c.grid->points);
  }
  w.section("sweep");
  w.put("center_rad_s", c.sweep.center);
  w.put("span_rad_s", c.sweep.span);
  w.put("points", c.sweep.points);
  w.section("clock");
  w.put("samples_per_aux_roundtrip", c.clock.samples_per_aux_roundtrip);
  w.put("n_max", c.clock.n_max);
  w.section("run");
  w.put("settle_lifetimes", c.run.settle_lifetimes);
  w.put("record_periods", c.run.record_periods);
  w.put("max_extensions", c.run.max_extensions);
  w.put("settle_tolerance", c.run.settle_tolerance);
  w.section("analysis");
  w.put("prominence", c.analysis.prominence);
  w.put("fit_n_min", c.analysis.fit_n_min);
  if (c.analysis.fit_n_max) w.put("fit_n_max", *c.analysis.fit_n_max);
  w.put("ridge_threshold", c.analysis.ridge_threshold);
  w.put("level_threshold", c.analysis.level_threshold);
  if (c.lattice) {
    const auto& l = *c.lattice;
    w.section("lattice");
    w.put("kind", std::string(l.kind == LatticeKind::Chain ? "chain" : "ladder"));
    w.put("sites", l.sites);
    w.put("right_sites", l.right_sites);
    if (l.hopping) w.put("hopping_rad_s", *l.hopping);
    if (l.rung_coupling) w.put("rung_rad_s", *l.rung_coupling);
    w.put("flux_rad", l.flux);
    if (l.site_loss_rate) w.put("site_loss_rate_per_s", *l.site_loss_rate);
    w.put("boundary", std::string(l.boundary == Boundary::Open ? "open" : "periodic"));
    w.put("left_offset", l.left_offset);
    w.put("k_points", l.k_points);
    w.put("drive_site", l.drive_site);
  }
  return w.str();
}

// Tight-binding lattice for a config: explicit [lattice] values, with unset
// rates derived from the topology.
inline LatticeSpec resolve_lattice(const Config& c) {
  const LatticeConfig lc = c.lattice.value_or(LatticeConfig{});
  const auto& t = c.topology;
  LatticeSpec l;
  l.kind = lc.kind;
  l.sites = lc.sites;
  l.right_sites = lc.right_sites;
  l.hopping = lc.hopping.value_or(coupling_strength(t.modulation, t.main_ring));
  if (lc.rung_coupling) l.rung_coupling = *lc.rung_coupling;
  else if (t.inter_ring_coupler) l.rung_coupling = rung_coupling(*t.inter_ring_coupler, t.main_ring);
  l.flux = lc.flux;
  if (lc.site_loss_rate) l.site_loss_rate = *lc.site_loss_rate;
  else l.site_loss_rate = 1.0 / photon_lifetime(t.main_ring, {t.bus_coupler});
  l.boundary = lc.boundary;
  l.left_offset = lc.left_offset;
  l.validate();
  return l;
}

}  // namespace synthring
