#pragma once

// Time-domain roundtrip engine for the modulated topologies. Each ring is a
// delay line sampled at a common clock; couplers act in place on the sample
// passing their position, the modulator multiplies the sample passing it by a
// per-pass phase, and roundtrip loss is lumped at the modulator position.
//
// Fields live in the frame rotating at an aligned mode (resonant in every
// ring), so only frequency offsets ever enter a phase.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "synthring/observables.hpp"
#include "synthring/parallel.hpp"
#include "synthring/static_scattering.hpp"

namespace synthring {

inline constexpr const char* kFloquetEngineVersion = "delay-line/1";

struct ClockOptions {
  int samples_per_aux_roundtrip = 64;  // M_s; samples per main roundtrip without an aux ring
  int n_max = 24;                      // highest sideband order to be resolved

  bool operator==(const ClockOptions&) const = default;
};

struct SimulationClock {
  double dt = 0.0;
  int samples_per_aux_roundtrip = 0;
  int main_delay = 0;   // N * M_s (or M_s)
  int aux_delay = 0;    // M_s, 0 without aux
  int right_delay = 0;  // 0 without a right ring
  int modulation_period = 0;         // S, samples per modulation period
  double modulation_frequency = 0.0;  // realised Omega_M = 2 pi / (S dt)
  int n_max = 0;
};

// Everything the engine needs that is derived once per topology.
struct EngineSetup {
  TopologySpec topology;
  SimulationClock clock;
  double composite_fsr = 0.0;      // mode spacing of the driven ring (with aux if present)
  double requested_modulation_frequency = 0.0;
  std::vector<double> site_offsets;  // resonance offset of site m, m = 0 .. size-1
  int right_aligned_site = 0;        // left-leg site whose resonance the right ring shares
  double right_bias = 0.0;           // extra right-ring roundtrip phase, rad
  double hopping = 0.0;              // J of the driven ring, rad/s
  double rung = 0.0;                 // K, rad/s (ladders)
  double settle_lifetime = 0.0;      // s

  // Boundary (aligned-mode) orders relative to drive site m0; aux variants only.
  BoundaryPositions boundaries(int m0) const { return {-m0, topology.aux_ratio() - m0}; }

  double site_offset(int m0) const {
    if (m0 < 0 || m0 >= static_cast<int>(site_offsets.size()))
      throw InvariantError("drive.input_site", "drive.input_site " + std::to_string(m0) + " is outside 0.." +
                                                   std::to_string(site_offsets.size() - 1));
    return site_offsets[static_cast<std::size_t>(m0)];
  }
};

inline EngineSetup prepare_engine(const TopologySpec& topo, const ClockOptions& opts = {}) {
  topo.validate();
  if (opts.samples_per_aux_roundtrip < 4)
    throw InvariantError("clock.samples_per_aux_roundtrip", "clock.samples_per_aux_roundtrip must be >= 4");
  if (opts.n_max < 1) throw InvariantError("clock.n_max", "clock.n_max must be >= 1");

  EngineSetup e;
  e.topology = topo;
  auto& c = e.clock;
  c.samples_per_aux_roundtrip = opts.samples_per_aux_roundtrip;
  c.n_max = opts.n_max;
  const int n_aux = topo.aux_ratio();
  const double t_main = topo.main_ring.roundtrip_time();
  if (has_aux(topo.variant)) {
    c.dt = topo.aux_ring->roundtrip_time() / opts.samples_per_aux_roundtrip;
    c.aux_delay = opts.samples_per_aux_roundtrip;
    c.main_delay = n_aux * opts.samples_per_aux_roundtrip;
    const auto cm = composite_modes(topo);
    e.composite_fsr = cm.composite_fsr;
    e.site_offsets.push_back(0.0);
    e.site_offsets.insert(e.site_offsets.end(), cm.sites.begin(), cm.sites.end());
  } else {
    c.dt = t_main / opts.samples_per_aux_roundtrip;
    c.main_delay = opts.samples_per_aux_roundtrip;
    e.composite_fsr = fsr(topo.main_ring);
    e.site_offsets.push_back(0.0);
  }

  e.requested_modulation_frequency = topo.modulation.frequency.value_or(e.composite_fsr);
  if (!(e.requested_modulation_frequency > 0.0))
    throw InvariantError("modulation.frequency", "modulation.frequency must be > 0");
  const double period = kTwoPi / (e.requested_modulation_frequency * c.dt);
  c.modulation_period = static_cast<int>(std::lround(period));
  if (c.modulation_period < 2 * opts.n_max)
    throw InvariantError("clock.samples_per_aux_roundtrip",
                         "clock too coarse: " + std::to_string(c.modulation_period) +
                             " samples per modulation period cannot resolve n_max = " + std::to_string(opts.n_max));
  c.modulation_frequency = kTwoPi / (c.modulation_period * c.dt);

  if (is_ladder(topo.variant)) {
    if (topo.variant == Variant::LadderWithAux) {
      // Right ring FSR is matched to the composite FSR of the left ring.
      c.right_delay = static_cast<int>(std::lround(kTwoPi / (e.composite_fsr * c.dt)));
      e.right_aligned_site = n_aux / 2;
    } else {
      c.right_delay = static_cast<int>(std::lround(topo.right_ring->roundtrip_time() / c.dt));
      e.right_aligned_site = 0;
    }
    if (c.right_delay <= c.main_delay / 4)
      throw InvariantError("right_ring.length_m", "right ring is too short for the port layout");
    const double target = e.site_offsets[static_cast<std::size_t>(e.right_aligned_site)];
    e.right_bias = std::remainder(-target * c.right_delay * c.dt, kTwoPi);
    e.rung = rung_coupling(*topo.inter_ring_coupler, topo.main_ring);
  }
  e.hopping = coupling_strength(topo.modulation, topo.main_ring);
  e.settle_lifetime = settling_lifetime(topo);
  return e;
}

// ---------------------------------------------------------------------------
// Delay-line network

// Port layout along each ring, in samples downstream of the ring's origin:
//   main ring: bus coupler 0, aux coupler D/4, inter-ring coupler D/2, modulator + loss 3D/4
//   aux ring: coupler 0, loss M_s/2
//   right ring: inter-ring coupler 0, modulator + loss + bias at D_main/4 (the same delay
//   after the rung as on the left, so both legs see the same modulation timing)
class DelayLineNetwork {
 public:
  explicit DelayLineNetwork(const EngineSetup& setup) {
    const auto& topo = setup.topology;
    const auto& c = setup.clock;
    main_.assign(static_cast<std::size_t>(c.main_delay), cplx{});
    p_aux_ = c.main_delay / 4;
    p_rung_ = c.main_delay / 2;
    p_mod_ = 3 * c.main_delay / 4;
    t0_ = topo.bus_coupler.through();
    g0_ = topo.bus_coupler.amplitude_ratio;
    a0_ = topo.main_ring.roundtrip_amplitude();
    period_ = c.modulation_period;
    main_mod_ = modulation_table(topo.modulation, a0_, 0.0);
    if (has_aux(topo.variant)) {
      aux_.assign(static_cast<std::size_t>(c.aux_delay), cplx{});
      ta_ = topo.aux_coupler->through();
      ga_ = topo.aux_coupler->amplitude_ratio;
      aa_ = topo.aux_ring->roundtrip_amplitude();
    }
    if (is_ladder(topo.variant)) {
      right_.assign(static_cast<std::size_t>(c.right_delay), cplx{});
      tk_ = topo.inter_ring_coupler->through();
      gk_ = topo.inter_ring_coupler->amplitude_ratio;
      p_right_mod_ = c.main_delay / 4;
      ModulationSpec rm = topo.right_modulation.value_or(topo.modulation);
      right_mod_ = modulation_table(rm, topo.right_ring->roundtrip_amplitude(), setup.right_bias);
    }
  }

  // Samples from the modulator to the bus coupler (for k-folding).
  int modulator_to_bus() const { return static_cast<int>(main_.size()) - p_mod_; }

  long long step_index() const { return k_; }

  // Advances one clock tick with bus input `in`. Returns the through-port
  // output; `intracavity` receives the main-ring field just after the bus.
  cplx step(cplx in, cplx* intracavity = nullptr) {
    const auto jm = static_cast<std::size_t>(k_ % period_);
    cplx& cb = cell(main_, om_, 0);
    const cplx out = t0_ * in + cplx(0.0, g0_) * cb;
    cb = cplx(0.0, g0_) * in + t0_ * cb;
    if (intracavity) *intracavity = cb;
    if (!aux_.empty()) couple(cell(main_, om_, p_aux_), cell(aux_, oa_, 0), ta_, ga_);
    if (!right_.empty()) {
      couple(cell(main_, om_, p_rung_), cell(right_, or_, 0), tk_, gk_);
      cell(right_, or_, p_right_mod_) *= right_mod_[jm];
    }
    cell(main_, om_, p_mod_) *= main_mod_[jm];
    if (!aux_.empty()) cell(aux_, oa_, static_cast<int>(aux_.size()) / 2) *= aa_;
    advance(om_, main_.size());
    if (!aux_.empty()) advance(oa_, aux_.size());
    if (!right_.empty()) advance(or_, right_.size());
    ++k_;
    return out;
  }

  double stored_energy() const {
    double e = 0.0;
    for (const auto* buf : {&main_, &aux_, &right_})
      for (const auto& v : *buf) e += std::norm(v);
    return e;
  }

  // Direct buffer access for tests that seed an initial state.
  std::vector<cplx>& main_buffer() { return main_; }
  std::vector<cplx>& aux_buffer() { return aux_; }
  std::vector<cplx>& right_buffer() { return right_; }

 private:
  std::vector<cplx> modulation_table(const ModulationSpec& mod, double amplitude, double bias) const {
    std::vector<cplx> t(static_cast<std::size_t>(period_));
    const double depth = mod.enabled ? mod.phase_depth : 0.0;
    for (int j = 0; j < period_; ++j)
      t[static_cast<std::size_t>(j)] =
          std::polar(amplitude, depth * std::cos(kTwoPi * j / period_ + mod.phase_offset) + bias);
    return t;
  }

  static cplx& cell(std::vector<cplx>& buf, std::size_t origin, int pos) {
    std::size_t i = origin + static_cast<std::size_t>(pos);
    if (i >= buf.size()) i -= buf.size();
    return buf[i];
  }

  static void couple(cplx& a, cplx& b, double t, double g) {
    const cplx na = t * a + cplx(0.0, g) * b;
    b = cplx(0.0, g) * a + t * b;
    a = na;
  }

  static void advance(std::size_t& origin, std::size_t size) { origin = origin == 0 ? size - 1 : origin - 1; }

  std::vector<cplx> main_, aux_, right_;
  std::size_t om_ = 0, oa_ = 0, or_ = 0;
  int p_aux_ = 0, p_rung_ = 0, p_mod_ = 0, p_right_mod_ = 0;
  double t0_ = 1.0, g0_ = 0.0, a0_ = 1.0;
  double ta_ = 1.0, ga_ = 0.0, aa_ = 1.0;
  double tk_ = 1.0, gk_ = 0.0;
  int period_ = 1;
  std::vector<cplx> main_mod_, right_mod_;
  long long k_ = 0;
};

// ---------------------------------------------------------------------------
// Steady-state runs

struct RunOptions {
  double settle_lifetimes = 10.0;
  int record_periods = 4;
  int max_extensions = 3;
  double settle_tolerance = 1e-6;  // per-period output energy change / input energy
  double input_scale = 1.0;        // drive amplitude (linearity checks only)

  bool operator==(const RunOptions&) const = default;
};

struct SettleDiagnostics {
  long long settle_steps = 0;
  int extensions = 0;
  double last_relative_change = 0.0;
  bool converged = false;
};

struct OutputRecord {
  double dt = 0.0;
  int period = 0;              // samples per modulation period
  double modulation_frequency = 0.0;
  double drive_frequency = 0.0;  // offset of the drive from the frame, rad/s
  long long start_step = 0;
  int modulator_to_bus = 0;
  std::vector<cplx> output;       // through port
  std::vector<cplx> intracavity;  // main ring just after the bus coupler
  SettleDiagnostics settle;
};

inline constexpr double kRunawayEnergy = 1e12;

inline OutputRecord run_steady_state(const EngineSetup& setup, const DriveSpec& drive, const RunOptions& opts = {}) {
  drive.validate();
  if (opts.settle_lifetimes < 8.0) throw InvariantError("run.settle_lifetimes", "run.settle_lifetimes must be >= 8");
  if (opts.record_periods < 2) throw InvariantError("run.record_periods", "run.record_periods must be >= 2");
  const auto& c = setup.clock;
  DelayLineNetwork net(setup);
  const double w = setup.site_offset(drive.input_site) + drive.detuning;
  const double wdt = w * c.dt;
  const cplx scale = opts.input_scale * drive.amplitude;
  auto input = [&](long long k) { return scale * std::polar(1.0, -wdt * static_cast<double>(k)); };

  const long long period = c.modulation_period;
  const long long chunk = static_cast<long long>(std::ceil(opts.settle_lifetimes * setup.settle_lifetime / c.dt));
  const long long extension = std::max(period, chunk / 2);
  const double input_energy = std::norm(scale) * static_cast<double>(period);

  auto check = [&](double e) {
    if (!std::isfinite(e) || e > kRunawayEnergy * std::max(1.0, std::norm(scale)))
      throw NumericalError("unstable energy growth at step " + std::to_string(net.step_index()) +
                           " (stored energy " + std::to_string(e) + "): net gain in the loop");
  };
  auto run = [&](long long steps) {
    for (long long i = 0; i < steps; ++i) {
      net.step(input(net.step_index()));
      if ((net.step_index() & 0xFFFF) == 0) check(net.stored_energy());
    }
  };

  OutputRecord rec;
  rec.dt = c.dt;
  rec.period = c.modulation_period;
  rec.modulation_frequency = c.modulation_frequency;
  rec.drive_frequency = w;
  rec.modulator_to_bus = net.modulator_to_bus();
  run(chunk);
  // Align the record to a period boundary of the global clock.
  run((period - net.step_index() % period) % period);

  const auto n_rec = static_cast<std::size_t>(period * opts.record_periods);
  for (int attempt = 0;; ++attempt) {
    rec.start_step = net.step_index();
    rec.output.assign(n_rec, cplx{});
    rec.intracavity.assign(n_rec, cplx{});
    for (std::size_t i = 0; i < n_rec; ++i) rec.output[i] = net.step(input(net.step_index()), &rec.intracavity[i]);
    check(net.stored_energy());
    double e_prev = 0.0, e_last = 0.0;
    for (std::size_t i = n_rec - 2 * period; i < n_rec - period; ++i) e_prev += std::norm(rec.output[i]);
    for (std::size_t i = n_rec - period; i < n_rec; ++i) e_last += std::norm(rec.output[i]);
    rec.settle.last_relative_change = std::abs(e_last - e_prev) / input_energy;
    rec.settle.extensions = attempt;
    rec.settle.settle_steps = rec.start_step;
    if (rec.settle.last_relative_change < opts.settle_tolerance) {
      rec.settle.converged = true;
      break;
    }
    if (attempt == opts.max_extensions)
      throw NumericalError("output did not settle: per-period energy change " +
                           std::to_string(rec.settle.last_relative_change) + " after " +
                           std::to_string(opts.max_extensions) + " extensions");
    run(extension - extension % period);
  }
  return rec;
}

// Exact projection of the through-port output onto drive + n Omega_M.
inline SidebandSpectrum sideband_spectrum(const OutputRecord& rec, int n_max) {
  if (rec.period <= 0 || rec.output.empty() || rec.output.size() % static_cast<std::size_t>(rec.period) != 0)
    throw NumericalError("sideband_spectrum: record is not an integer number of modulation periods");
  if (2 * n_max >= rec.period) throw NumericalError("sideband_spectrum: n_max exceeds the sampling limit");
  const auto period = static_cast<std::size_t>(rec.period);
  // Fold the demodulated output onto one period, then take its DFT.
  std::vector<cplx> fold(period, cplx{});
  const double wdt = rec.drive_frequency * rec.dt;
  for (std::size_t i = 0; i < rec.output.size(); ++i) {
    const long long k = rec.start_step + static_cast<long long>(i);
    fold[static_cast<std::size_t>(k % rec.period)] += rec.output[i] * std::polar(1.0, wdt * static_cast<double>(k));
  }
  SidebandSpectrum s;
  s.n_max = n_max;
  const double norm = 1.0 / static_cast<double>(rec.output.size());
  for (int n = -n_max; n <= n_max; ++n) {
    cplx acc = 0.0;
    for (std::size_t j = 0; j < period; ++j) {
      const long long e = (static_cast<long long>(n) * static_cast<long long>(j)) % rec.period;
      acc += fold[j] * std::polar(1.0, kTwoPi * static_cast<double>(e) / rec.period);
    }
    s.amplitudes.push_back(acc * norm);
    s.intensities.push_back(std::norm(acc * norm));
  }
  return s;
}

// Intracavity power folded onto quasimomentum k = Omega_M (t - t_mod->bus) + phi + pi.
struct FoldedPower {
  std::vector<double> k;      // ascending in [0, 2 pi)
  std::vector<double> power;  // mean over recorded periods
};

inline FoldedPower fold_intracavity(const OutputRecord& rec, double phase_offset) {
  const auto period = static_cast<std::size_t>(rec.period);
  std::vector<double> acc(period, 0.0);
  for (std::size_t i = 0; i < rec.intracavity.size(); ++i) {
    const long long k = rec.start_step + static_cast<long long>(i) - rec.modulator_to_bus;
    const long long j = ((k % rec.period) + rec.period) % rec.period;
    acc[static_cast<std::size_t>(j)] += std::norm(rec.intracavity[i]);
  }
  const double periods = static_cast<double>(rec.intracavity.size()) / static_cast<double>(period);
  std::vector<std::pair<double, double>> pts(period);
  for (std::size_t j = 0; j < period; ++j) {
    double kv = std::fmod(kTwoPi * static_cast<double>(j) / rec.period + phase_offset + std::numbers::pi, kTwoPi);
    if (kv < 0.0) kv += kTwoPi;
    if (kv >= kTwoPi) kv = 0.0;
    pts[j] = {kv, acc[j] / periods};
  }
  std::sort(pts.begin(), pts.end());
  FoldedPower f;
  for (const auto& [kv, p] : pts) {
    f.k.push_back(kv);
    f.power.push_back(p);
  }
  return f;
}

// ---------------------------------------------------------------------------
// Sweeps

struct SweepResult {
  std::vector<double> detunings;
  std::vector<SidebandSpectrum> spectra;
  std::vector<SettleDiagnostics> settle;
};

namespace detail {

template <class F>
auto annotated(double detuning, F&& f) {
  try {
    return f();
  } catch (const NumericalError& e) {
    throw NumericalError("at detuning " + std::to_string(detuning) + " rad/s: " + e.what());
  }
}

}  // namespace detail

inline SweepResult detuning_sweep(const EngineSetup& setup, std::span<const double> detunings, int input_site,
                                  const RunOptions& opts = {}, int jobs = 1) {
  struct Point {
    SidebandSpectrum spectrum;
    SettleDiagnostics settle;
  };
  auto pts = parallel_map<Point>(detunings.size(), jobs, [&](std::size_t i) {
    return detail::annotated(detunings[i], [&] {
      DriveSpec d{detunings[i], input_site, 1.0};
      const auto rec = run_steady_state(setup, d, opts);
      return Point{sideband_spectrum(rec, setup.clock.n_max), rec.settle};
    });
  });
  SweepResult r;
  r.detunings.assign(detunings.begin(), detunings.end());
  for (auto& p : pts) {
    r.spectra.push_back(std::move(p.spectrum));
    r.settle.push_back(p.settle);
  }
  return r;
}

inline BandMap band_structure_map(const EngineSetup& setup, std::span<const double> detunings, int input_site,
                                  const RunOptions& opts = {}, int jobs = 1) {
  auto rows = parallel_map<FoldedPower>(detunings.size(), jobs, [&](std::size_t i) {
    return detail::annotated(detunings[i], [&] {
      DriveSpec d{detunings[i], input_site, 1.0};
      return fold_intracavity(run_steady_state(setup, d, opts), setup.topology.modulation.phase_offset);
    });
  });
  BandMap m;
  m.detuning_axis.assign(detunings.begin(), detunings.end());
  if (!rows.empty()) m.k_axis = rows.front().k;
  for (auto& r : rows) m.intensity.push_back(std::move(r.power));
  return m;
}

// Ladder sweep with the right ring's modulation phase offset set to `phase_offset`.
inline SweepResult ladder_sweep(const TopologySpec& topo, double phase_offset, std::span<const double> detunings,
                                int input_site, const ClockOptions& clock = {}, const RunOptions& opts = {},
                                int jobs = 1) {
  if (!is_ladder(topo.variant))
    throw InvariantError("topology.variant", "ladder sweep needs TwoRingLadder or LadderWithAux");
  if (!topo.modulation.enabled) throw InvariantError("modulation.enabled", "ladder sweep needs the left ring modulated");
  TopologySpec t = topo;
  ModulationSpec rm = t.right_modulation.value_or(t.modulation);
  rm.enabled = true;
  rm.frequency = t.modulation.frequency;
  rm.phase_offset = phase_offset;
  t.right_modulation = rm;
  const auto setup = prepare_engine(t, clock);
  return detuning_sweep(setup, detunings, input_site, opts, jobs);
}

}  // namespace synthring
