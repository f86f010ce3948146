#pragma once

// The five subcommands. Each writes its CSV/JSON outputs into the output
// directory and finishes with manifest.json.

#include <spdlog/spdlog.h>

#include <chrono>
#include <filesystem>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "synthring/synthring.hpp"

namespace synthring::cli {

namespace fs = std::filesystem;

inline constexpr const char* kToolVersion = "1.0.0";

struct CommandOptions {
  fs::path config_path;
  fs::path out_dir;
  int jobs = 1;
  std::optional<double> flux;                // rad
  std::optional<double> detuning_span_hz;    // overrides sweep.span
};

class Outputs {
 public:
  explicit Outputs(fs::path dir) : dir_(std::move(dir)) {}
  fs::path add(const std::string& name) {
    names_.push_back(name);
    return dir_ / name;
  }
  const std::vector<std::string>& names() const { return names_; }
  const fs::path& dir() const { return dir_; }

 private:
  fs::path dir_;
  std::vector<std::string> names_;
};

inline json derived_constants(const TopologySpec& t) {
  json d;
  const double wr = fsr(t.main_ring);
  d["omega_r_rad_s"] = wr;
  d["fsr_hz"] = wr / kTwoPi;
  d["roundtrip_time_s"] = t.main_ring.roundtrip_time();
  d["tau_p_s"] = jnum(photon_lifetime(t.main_ring, {t.bus_coupler}));
  d["hopping_J_rad_s"] = coupling_strength(t.modulation, t.main_ring);
  d["J_over_omega_r"] = coupling_strength(t.modulation, t.main_ring) / wr;
  d["J_tau_p"] = coupling_strength(t.modulation, t.main_ring) * photon_lifetime(t.main_ring, {t.bus_coupler});
  d["aux_ratio_N"] = t.aux_ratio();
  if (t.aux_ring) d["aux_fsr_rad_s"] = fsr(*t.aux_ring);
  if (t.inter_ring_coupler) d["rung_K_rad_s"] = rung_coupling(*t.inter_ring_coupler, t.main_ring);
  if (t.right_ring) d["right_tau_p_s"] = photon_lifetime(*t.right_ring, {});
  return d;
}

inline json clock_json(const EngineSetup& s) {
  const auto& c = s.clock;
  return json{{"dt_s", c.dt},
              {"samples_per_aux_roundtrip", c.samples_per_aux_roundtrip},
              {"main_delay_samples", c.main_delay},
              {"aux_delay_samples", c.aux_delay},
              {"right_delay_samples", c.right_delay},
              {"modulation_period_samples", c.modulation_period},
              {"modulation_frequency_rad_s", c.modulation_frequency},
              {"requested_modulation_frequency_rad_s", s.requested_modulation_frequency},
              {"composite_fsr_rad_s", s.composite_fsr},
              {"n_max", c.n_max},
              {"settle_lifetime_s", s.settle_lifetime},
              {"right_bias_rad", s.right_bias},
              {"site_offsets_rad_s", s.site_offsets}};
}

inline json settle_json(const std::vector<SettleDiagnostics>& diags) {
  int max_ext = 0;
  double worst = 0.0;
  long long steps = 0;
  for (const auto& d : diags) {
    max_ext = std::max(max_ext, d.extensions);
    worst = std::max(worst, d.last_relative_change);
    steps = std::max(steps, d.settle_steps);
  }
  return json{{"points", diags.size()}, {"max_extensions", max_ext}, {"max_relative_change", worst}, {"max_settle_steps", steps}};
}

inline void write_sweep_csv(const fs::path& path, const SweepResult& r, int n_max) {
  std::vector<std::string> header{"detuning_rad_s"};
  for (int n = -n_max; n <= n_max; ++n) header.push_back("n=" + std::to_string(n));
  CsvWriter w(path, header);
  for (std::size_t i = 0; i < r.detunings.size(); ++i) {
    std::vector<double> row{r.detunings[i]};
    row.insert(row.end(), r.spectra[i].intensities.begin(), r.spectra[i].intensities.end());
    w.row(row);
  }
}

inline void check_finite(const std::vector<double>& v, const std::string& what) {
  for (double x : v)
    if (!std::isfinite(x)) throw NumericalError(what + " contains non-finite values");
}

// ---------------------------------------------------------------------------

inline json cmd_transmission(const Config& c, Outputs& out) {
  const auto& t = c.topology;
  FrequencyGrid grid;
  if (c.grid) {
    grid = *c.grid;
  } else {
    const int n = t.aux_ratio();
    const double wr = fsr(t.main_ring);
    grid.center_offset = has_aux(t.variant) ? 0.5 * n * wr : wr;
    grid.span = has_aux(t.variant) ? (n + 1.0) * wr : 3.0 * wr;
    grid.points = resolving_points(t, grid.span);
  }
  spdlog::info("transmission: {} points over {:.6g} rad/s", grid.points, grid.span);
  const auto spec = transmission_spectrum(t, grid);
  for (double p : spec.power)
    if (!(p <= 1.0 + 1e-9) || !(p >= 0.0)) throw NumericalError("passivity violated: T = " + format_number(p));
  {
    CsvWriter w(out.add("transmission.csv"), {"omega_rad_s", "T", "Re_field", "Im_field"});
    for (std::size_t i = 0; i < spec.omega.size(); ++i)
      w.row(grid.reference_frequency + spec.omega[i], spec.power[i], spec.field[i].real(), spec.field[i].imag());
  }
  const auto res = find_resonances(spec, c.analysis.prominence);
  {
    CsvWriter w(out.add("resonances.csv"), {"frequency_rad_s", "depth", "width_rad_s"});
    for (const auto& r : res) w.row(grid.reference_frequency + r.frequency, r.depth, r.width);
  }
  json results;
  results["resonance_count"] = res.size();
  {
    CsvWriter w(out.add("fsr_sequence.csv"), {"index", "spacing_rad_s", "spacing_over_fsr"});
    if (res.size() >= 2) {
      const auto seq = fsr_sequence(res);
      for (std::size_t i = 0; i < seq.size(); ++i) w.row(i, seq[i], seq[i] / fsr(t.main_ring));
      const auto [lo, hi] = std::minmax_element(seq.begin(), seq.end());
      results["spacing_min_rad_s"] = *lo;
      results["spacing_max_rad_s"] = *hi;
    } else {
      spdlog::warn("fewer than two resonances: fsr_sequence.csv is empty");
      results["warning"] = "fewer than two resonances";
    }
  }
  if (t.variant == Variant::RingWithAux) {
    const auto cm = composite_modes(t, c.analysis.prominence);
    results["composite_fsr_rad_s"] = cm.composite_fsr;
    results["composite_fsr_over_fsr"] = cm.composite_fsr / cm.bare_fsr;
    const double g = t.aux_coupler->amplitude_ratio;
    const auto sp = splitting_threshold_scan(t, std::vector<double>{g}, c.analysis.prominence);
    results["aligned_mode_dip_count"] = sp.front().dip_count;
    results["aligned_mode_splitting_rad_s"] = sp.front().separation;
  }
  return results;
}

inline json cmd_spectrum(const Config& c, const CommandOptions& o, Outputs& out, json& manifest) {
  const auto setup = prepare_engine(c.topology, c.clock);
  manifest["clock"] = clock_json(setup);
  const auto dets = c.sweep.detunings();
  spdlog::info("spectrum: {} detunings, {} job(s)", dets.size(), o.jobs);
  const auto sweep = detuning_sweep(setup, dets, c.drive.input_site, c.run, o.jobs);
  for (const auto& s : sweep.spectra) check_finite(s.intensities, "sweep");
  write_sweep_csv(out.add("sweep.csv"), sweep, setup.clock.n_max);

  // Metrics at the configured drive detuning.
  auto rec = run_steady_state(setup, c.drive, c.run);
  auto spec = sideband_spectrum(rec, setup.clock.n_max);
  spec.normalize();
  {
    CsvWriter w(out.add("spectrum.csv"), {"n", "Re_amplitude", "Im_amplitude", "intensity", "normalized_intensity"});
    for (std::size_t i = 0; i < spec.amplitudes.size(); ++i)
      w.row(spec.order(i), spec.amplitudes[i].real(), spec.amplitudes[i].imag(), std::norm(spec.amplitudes[i]),
            spec.intensities[i]);
  }
  json m;
  m["detuning_rad_s"] = c.drive.detuning;
  m["input_site"] = c.drive.input_site;
  m["directionality"] = directionality(spec);
  try {
    const auto f = fit_decay(spec, c.analysis.fit_n_min, c.analysis.fit_n_max);
    const double jt = setup.hopping * photon_lifetime(c.topology.main_ring, {c.topology.bus_coupler});
    m["decay_fit"] = {{"decay_constant_sites", jnum(f.decay_constant)},
                      {"n_min", f.n_min},
                      {"n_max", f.n_max},
                      {"r_squared", f.r_squared},
                      {"low_quality", f.low_quality},
                      {"expected_tau_p_J", jt}};
  } catch (const NumericalError& e) {
    m["decay_fit"] = {{"error", e.what()}};
  }
  if (has_aux(c.topology.variant)) {
    const auto b = setup.boundaries(c.drive.input_site);
    m["boundaries"] = {b.lower, b.upper};
    try {
      m["confinement_db"] = confinement_db(spec, b);
      const auto tm = transport_metrics(spec, b);
      m["visibility"] = tm.visibility;
      m["visibility_window"] = {tm.window_lo, tm.window_hi};
    } catch (const NumericalError& e) {
      m["confinement_error"] = e.what();
    }
  }
  m["settle"] = settle_json(sweep.settle);
  write_json(out.add("metrics.json"), m);
  return m;
}

inline json cmd_bands(const Config& c, const CommandOptions& o, Outputs& out, json& manifest) {
  const auto setup = prepare_engine(c.topology, c.clock);
  manifest["clock"] = clock_json(setup);
  const auto dets = c.sweep.detunings();
  spdlog::info("bands: {} detunings, {} job(s)", dets.size(), o.jobs);
  const auto map = band_structure_map(setup, dets, c.drive.input_site, c.run, o.jobs);
  {
    CsvWriter w(out.add("bandmap.csv"), {"detuning_rad_s", "k_rad", "intensity"});
    for (std::size_t i = 0; i < map.detuning_axis.size(); ++i) {
      check_finite(map.intensity[i], "band map");
      for (std::size_t j = 0; j < map.k_axis.size(); ++j) w.row(map.detuning_axis[i], map.k_axis[j], map.intensity[i][j]);
    }
  }
  const auto ridge = extract_band_ridge(map, c.analysis.ridge_threshold);
  {
    CsvWriter w(out.add("ridge.csv"), {"k_rad", "detuning_rad_s"});
    for (const auto& p : ridge) w.row(p.k, p.detuning);
  }
  const double wr = fsr(c.topology.main_ring);
  const double J = setup.hopping;
  json m;
  m["hopping_J_rad_s"] = J;
  m["ridge_points"] = ridge.size();
  if (!has_aux(c.topology.variant)) {
    CsvWriter w(out.add("model_overlay.csv"), {"k_rad", "energy_rad_s"});
    for (double k : map.k_axis) w.row(k, bloch_bands_chain(k, J));
    const double rms = ridge_rms(ridge, J);
    m["ridge_rms_rad_s"] = jnum(rms);
    m["ridge_rms_over_omega_r"] = jnum(rms / wr);
  } else {
    const auto levels = discrete_levels(map, c.analysis.level_threshold);
    {
      CsvWriter w(out.add("levels.csv"), {"index", "detuning_rad_s", "detuning_over_J"});
      for (std::size_t i = 0; i < levels.size(); ++i) w.row(i, levels[i], J > 0 ? levels[i] / J : 0.0);
    }
    m["observed_levels_rad_s"] = levels;
    int sites = c.lattice ? c.lattice->sites : 0;
    json report;
    if (!levels.empty() && J > 0) {
      if (!c.lattice) sites = calibrate_chain_size(levels, J).sites;
      const auto lm = match_levels(levels, open_chain_levels(sites, J));
      report = {{"sites", sites},
                {"calibrated", !c.lattice},
                {"rms_mismatch_rad_s", lm.rms_mismatch},
                {"rms_mismatch_over_omega_r", lm.rms_mismatch / wr},
                {"unpaired_observed", lm.unpaired_observed},
                {"unpaired_predicted", lm.unpaired_predicted}};
      json pairs = json::array();
      for (const auto& [a, b] : lm.pairs) pairs.push_back({a, b});
      report["pairs_observed_predicted"] = pairs;
    } else {
      sites = std::max(sites, 1);
      report = {{"sites", sites}, {"error", "no discrete levels observed"}};
    }
    m["level_match"] = report;
    LatticeSpec lat;
    lat.sites = sites;
    lat.hopping = J;
    const auto eig = eigenmodes(build_hamiltonian(lat));
    const int kp = c.lattice ? c.lattice->k_points : 128;
    CsvWriter w(out.add("model_overlay.csv"), {"level", "energy_rad_s", "k_rad", "weight"});
    for (int n = 0; n < sites; ++n) {
      const auto ks = eigenmode_k_spectrum(eig.eigenvectors.col(n), kp);
      for (int j = 0; j < kp; ++j)
        w.row(n, eig.eigenvalues[static_cast<std::size_t>(n)], kTwoPi * j / kp, ks[static_cast<std::size_t>(j)]);
    }
  }
  write_json(out.add("metrics.json"), m);
  return m;
}

inline std::string band_annotation(double dw, const OneWayRanges& r) {
  const bool up = dw > r.upper.lo && dw < r.upper.hi;
  const bool low = dw > r.lower.lo && dw < r.lower.hi;
  if (up) return "upper-only";
  if (low) return "lower-only";
  if (dw >= r.lower.hi && dw <= r.upper.lo) return "both";
  return "outside";
}

inline json cmd_ladder(const Config& c, const CommandOptions& o, Outputs& out, json& manifest) {
  const auto& t = c.topology;
  if (!is_ladder(t.variant)) throw InvariantError("topology.variant", "ladder needs TwoRingLadder or LadderWithAux");
  double phi = o.flux.value_or(t.right_modulation ? t.right_modulation->phase_offset : 0.0);
  if (!(phi >= 0.0 && phi < kTwoPi)) throw InvariantError("flux", "--flux must lie in [0, 2pi)");
  TopologySpec tt = t;
  ModulationSpec rm = tt.right_modulation.value_or(tt.modulation);
  rm.enabled = true;
  rm.frequency = tt.modulation.frequency;
  rm.phase_offset = phi;
  tt.right_modulation = rm;
  const auto setup = prepare_engine(tt, c.clock);
  manifest["clock"] = clock_json(setup);
  const auto dets = c.sweep.detunings();
  spdlog::info("ladder: phi = {:.6g}, {} detunings, {} job(s)", phi, dets.size(), o.jobs);
  const auto sweep = ladder_sweep(t, phi, dets, c.drive.input_site, c.clock, c.run, o.jobs);
  for (const auto& s : sweep.spectra) check_finite(s.intensities, "sweep");
  write_sweep_csv(out.add("sweep.csv"), sweep, setup.clock.n_max);

  const double J = setup.hopping;
  const double K = setup.rung;
  const double lattice_flux = ring_equivalent_flux(phi);
  {
    CsvWriter w(out.add("bands.csv"), {"k_rad", "E_lower_rad_s", "E_upper_rad_s", "nL_lower", "nL_upper"});
    const int kp = c.lattice ? c.lattice->k_points : 256;
    for (int j = 0; j < kp; ++j) {
      const auto b = bloch_bands_ladder(kTwoPi * j / kp, J, K, lattice_flux);
      w.row(b.k, b.energies[0], b.energies[1], b.left_leg_weight[0], b.left_leg_weight[1]);
    }
  }
  const auto ranges = ladder_one_way_ranges(J, K, lattice_flux);
  const int m0 = c.drive.input_site;
  const BoundaryPositions b =
      has_aux(t.variant) ? setup.boundaries(m0) : BoundaryPositions{-(setup.clock.n_max + 1), setup.clock.n_max + 1};
  json m;
  m["phase_offset_rad"] = phi;
  m["lattice_flux_rad"] = lattice_flux;
  m["hopping_J_rad_s"] = J;
  m["rung_K_rad_s"] = K;
  m["input_site"] = m0;
  m["boundaries"] = {b.lower, b.upper};
  m["one_way_upper_rad_s"] = {ranges.upper.lo, ranges.upper.hi};
  m["one_way_lower_rad_s"] = {ranges.lower.lo, ranges.lower.hi};
  json rows = json::array();
  for (std::size_t i = 0; i < sweep.detunings.size(); ++i) {
    auto s = sweep.spectra[i];
    s.normalize();
    const auto tm = transport_metrics(s, b, band_annotation(sweep.detunings[i], ranges));
    rows.push_back({{"detuning_rad_s", sweep.detunings[i]},
                    {"directionality", tm.directionality},
                    {"visibility", tm.visibility},
                    {"window", {tm.window_lo, tm.window_hi}},
                    {"band", tm.occupied_band}});
  }
  m["points"] = rows;
  m["settle"] = settle_json(sweep.settle);
  write_json(out.add("metrics.json"), m);
  return json{{"lattice_flux_rad", lattice_flux}, {"points", rows.size()}};
}

inline json cmd_eigen(const Config& c, const CommandOptions& o, Outputs& out) {
  Config cc = c;
  if (o.flux) {
    if (!cc.lattice) cc.lattice = LatticeConfig{};
    cc.lattice->flux = *o.flux;
  }
  const auto lat = resolve_lattice(cc);
  const LatticeConfig lc = cc.lattice.value_or(LatticeConfig{});
  const auto eig = eigenmodes(build_hamiltonian(lat));
  const double J = lat.hopping;
  {
    CsvWriter w(out.add("eigenvalues.csv"), {"index", "energy_rad_s", "energy_over_J"});
    for (std::size_t i = 0; i < eig.eigenvalues.size(); ++i) w.row(i, eig.eigenvalues[i], J > 0 ? eig.eigenvalues[i] / J : 0.0);
  }
  {
    CsvWriter w(out.add("eigenvectors.csv"), {"mode", "site", "Re", "Im"});
    for (Eigen::Index n = 0; n < eig.eigenvectors.cols(); ++n)
      for (Eigen::Index s = 0; s < eig.eigenvectors.rows(); ++s)
        w.row(static_cast<long long>(n), static_cast<long long>(s), eig.eigenvectors(s, n).real(),
              eig.eigenvectors(s, n).imag());
  }
  json m;
  m["sites"] = lat.size();
  m["hopping_J_rad_s"] = J;
  if (lat.kind == LatticeKind::Chain) {
    {
      CsvWriter w(out.add("kspectra.csv"), {"mode", "k_rad", "weight"});
      for (Eigen::Index n = 0; n < eig.eigenvectors.cols(); ++n) {
        const auto ks = eigenmode_k_spectrum(eig.eigenvectors.col(n), lc.k_points);
        for (int j = 0; j < lc.k_points; ++j) w.row(static_cast<long long>(n), kTwoPi * j / lc.k_points, ks[static_cast<std::size_t>(j)]);
      }
    }
    CsvWriter w(out.add("bands.csv"), {"k_rad", "energy_rad_s"});
    for (int j = 0; j < lc.k_points; ++j) w.row(kTwoPi * j / lc.k_points, bloch_bands_chain(kTwoPi * j / lc.k_points, J));
    const auto analytic = open_chain_levels(lat.sites, J);
    if (lat.boundary == Boundary::Open) {
      double worst = 0.0;
      for (std::size_t i = 0; i < analytic.size(); ++i) worst = std::max(worst, std::abs(analytic[i] - eig.eigenvalues[i]));
      m["max_deviation_from_open_chain_law_rad_s"] = worst;
    }
  } else {
    m["rung_K_rad_s"] = lat.rung_coupling;
    m["flux_rad"] = lat.flux;
    CsvWriter w(out.add("bands.csv"), {"k_rad", "E_lower_rad_s", "E_upper_rad_s", "nL_lower", "nL_upper"});
    for (int j = 0; j < lc.k_points; ++j) {
      const auto b = bloch_bands_ladder(kTwoPi * j / lc.k_points, J, lat.rung_coupling, lat.flux);
      w.row(b.k, b.energies[0], b.energies[1], b.left_leg_weight[0], b.left_leg_weight[1]);
    }
    const auto r = ladder_one_way_ranges(J, lat.rung_coupling, lat.flux);
    m["one_way_upper_rad_s"] = {r.upper.lo, r.upper.hi};
    m["one_way_lower_rad_s"] = {r.lower.lo, r.lower.hi};
  }
  if (c.sweep.points > 1) {
    const int drive = lc.drive_site >= 0 ? lc.drive_site : lat.sites / 2;
    const auto dets = c.sweep.detunings();
    const auto rm = response_map(lat, dets, drive);
    std::vector<std::string> header{"detuning_rad_s"};
    for (int s = 0; s < lat.size(); ++s) header.push_back("site=" + std::to_string(s));
    CsvWriter w(out.add("response.csv"), header);
    for (std::size_t i = 0; i < rm.detunings.size(); ++i) {
      std::vector<double> row{rm.detunings[i]};
      row.insert(row.end(), rm.intensities[i].begin(), rm.intensities[i].end());
      w.row(row);
    }
    m["response_drive_site"] = drive;
  }
  write_json(out.add("metrics.json"), m);
  return m;
}

// Runs one command end to end. Throws ConfigError / NumericalError / Error.
inline void run_command(const std::string& command, const CommandOptions& o) {
  const auto start = std::chrono::steady_clock::now();
  Config c = load_config(o.config_path.string());
  if (o.detuning_span_hz) {
    if (!(*o.detuning_span_hz > 0.0)) throw InvariantError("detuning-span", "--detuning-span must be > 0");
    c.sweep.span = kTwoPi * *o.detuning_span_hz;
    if (c.sweep.points < 2) c.sweep.points = 101;
  }
  if (o.jobs < 1) throw InvariantError("jobs", "--jobs must be >= 1");
  std::error_code ec;
  fs::create_directories(o.out_dir, ec);
  if (ec) throw Error("cannot create output directory " + o.out_dir.string() + ": " + ec.message());

  const std::string canonical = serialize(c);
  json manifest;
  manifest["command"] = command;
  manifest["tool_version"] = kToolVersion;
  manifest["engine_versions"] = {{"floquet", kFloquetEngineVersion}, {"static", "scattering/1"}, {"tight_binding", "eigen/1"}};
  manifest["config_path"] = o.config_path.string();
  manifest["config_hash_fnv1a64"] = hex64(fnv1a64(canonical));
  manifest["units"] = "config frequencies in Hz are converted to rad/s (x 2 pi) at load; all outputs use rad/s and seconds";
  manifest["jobs"] = o.jobs;
  manifest["derived"] = derived_constants(c.topology);
  if (o.flux) manifest["flux_override_rad"] = *o.flux;
  if (o.detuning_span_hz) manifest["detuning_span_override_hz"] = *o.detuning_span_hz;

  Outputs out(o.out_dir);
  json results;
  if (command == "transmission") results = cmd_transmission(c, out);
  else if (command == "spectrum") results = cmd_spectrum(c, o, out, manifest);
  else if (command == "bands") results = cmd_bands(c, o, out, manifest);
  else if (command == "ladder") results = cmd_ladder(c, o, out, manifest);
  else if (command == "eigen") results = cmd_eigen(c, o, out);
  else throw InvariantError("command", "unknown command '" + command + "'");

  manifest["results"] = results;
  manifest["outputs"] = out.names();
  manifest["wall_time_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_json(out.dir() / "manifest.json", manifest);
  spdlog::info("{}: wrote {} files to {}", command, out.names().size() + 1, o.out_dir.string());
}

}  // namespace synthring::cli
