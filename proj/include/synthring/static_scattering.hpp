#pragma once

// Frequency-domain response of the unmodulated resonators: all-pass and
// nested (main + auxiliary) ring fields, sampled spectra, resonance finding,
// FSR sequences and the aux-induced splitting scan.
//
// Frequencies passed to the field functions are offsets from a reference
// mode that is resonant in every ring (an "aligned" mode), so the roundtrip
// phase is simply omega * T.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "synthring/model.hpp"

namespace synthring {

inline cplx allpass_field(double through, double roundtrip_amplitude, double phase) {
  const cplx e = std::polar(roundtrip_amplitude, phase);
  return (through - e) / (1.0 - through * e);
}

// (t0 - a e^{i theta}) / (1 - t0 a e^{i theta}), theta = omega L / v_g.
inline cplx allpass_field(const RingSpec& ring, const CouplerSpec& bus, double omega) {
  return allpass_field(bus.through(), ring.roundtrip_amplitude(), omega * ring.roundtrip_time());
}

// Main ring whose roundtrip additionally passes once through the aux
// coupler; the aux ring's own all-pass response multiplies the roundtrip
// factor.
inline cplx nested_field(const RingSpec& main, const RingSpec& aux, const CouplerSpec& bus,
                         const CouplerSpec& aux_coupler, double omega) {
  const cplx r_aux = allpass_field(aux_coupler.through(), aux.roundtrip_amplitude(), omega * aux.roundtrip_time());
  const cplx e = std::polar(main.roundtrip_amplitude(), omega * main.roundtrip_time()) * r_aux;
  const double t0 = bus.through();
  return (t0 - e) / (1.0 - t0 * e);
}

inline cplx static_field(const TopologySpec& topo, double omega) {
  switch (topo.variant) {
    case Variant::SingleRing: return allpass_field(topo.main_ring, topo.bus_coupler, omega);
    case Variant::RingWithAux:
      return nested_field(topo.main_ring, *topo.aux_ring, topo.bus_coupler, *topo.aux_coupler, omega);
    default: throw InvariantError("topology.variant", "static response is defined for SingleRing and RingWithAux only");
  }
}

struct TransmissionSpectrum {
  FrequencyGrid grid;
  std::vector<double> omega;  // offsets from grid.reference_frequency
  std::vector<double> power;
  std::vector<cplx> field;
};

inline TransmissionSpectrum transmission_spectrum(const TopologySpec& topo, const FrequencyGrid& grid) {
  if (topo.modulation.enabled)
    throw InvariantError("modulation.enabled", "the static scattering engine requires modulation to be disabled");
  if (topo.variant != Variant::SingleRing && topo.variant != Variant::RingWithAux)
    throw InvariantError("topology.variant", "static transmission is defined for SingleRing and RingWithAux only");
  grid.validate();
  TransmissionSpectrum s;
  s.grid = grid;
  s.omega = grid.offsets();
  s.field.resize(s.omega.size());
  s.power.resize(s.omega.size());
  for (std::size_t i = 0; i < s.omega.size(); ++i) {
    s.field[i] = static_field(topo, s.omega[i]);
    s.power[i] = std::norm(s.field[i]);
  }
  return s;
}

struct Resonance {
  double frequency;  // rad/s, same frame as the spectrum's omega
  double depth;      // 1 - T_min
  double width;      // FWHM at half prominence, rad/s
};

using ResonanceList = std::vector<Resonance>;

inline constexpr double kDefaultProminence = 0.02;

namespace detail {

// Vertex of the parabola through (-1, y0), (0, y1), (1, y2), in units of the
// sample spacing.
inline double parabolic_offset(double y0, double y1, double y2) {
  const double d = y0 - 2.0 * y1 + y2;
  if (d == 0.0) return 0.0;
  return std::clamp(0.5 * (y0 - y2) / d, -0.5, 0.5);
}

inline double crossing(double x0, double y0, double x1, double y1, double level) {
  if (y1 == y0) return x0;
  return x0 + (level - y0) * (x1 - x0) / (y1 - y0);
}

}  // namespace detail

// Local minima of T whose topographic prominence (height of the lower of the
// two bounding maxima above the minimum) reaches `prominence`.
inline ResonanceList find_resonances(std::span<const double> omega, std::span<const double> power,
                                     double prominence = kDefaultProminence) {
  ResonanceList out;
  const std::size_t n = power.size();
  if (n < 3) return out;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (!(power[i] < power[i - 1] && power[i] <= power[i + 1])) continue;
    // Walk outwards until a lower point, tracking the highest sample.
    std::size_t l = i;
    double left_max = power[i];
    while (l > 0 && power[l - 1] >= power[i]) {
      --l;
      left_max = std::max(left_max, power[l]);
    }
    std::size_t r = i;
    double right_max = power[i];
    while (r + 1 < n && power[r + 1] >= power[i]) {
      ++r;
      right_max = std::max(right_max, power[r]);
    }
    const double base = std::min(left_max, right_max);
    if (base - power[i] < prominence) continue;

    const double step = omega[i + 1] - omega[i];
    const double off = detail::parabolic_offset(power[i - 1], power[i], power[i + 1]);
    Resonance res;
    res.frequency = omega[i] + off * step;
    const double tmin = std::max(0.0, power[i] - 0.25 * (power[i - 1] - power[i + 1]) * off);
    res.depth = std::clamp(1.0 - tmin, 0.0, 1.0);
    const double half = 0.5 * (tmin + base);
    std::size_t a = i;
    while (a > l && power[a - 1] < half) --a;
    std::size_t b = i;
    while (b < r && power[b + 1] < half) ++b;
    const double lo = a > 0 ? detail::crossing(omega[a - 1], power[a - 1], omega[a], power[a], half) : omega[a];
    const double hi = b + 1 < n ? detail::crossing(omega[b], power[b], omega[b + 1], power[b + 1], half) : omega[b];
    res.width = hi - lo;
    if (res.depth > 0.0) out.push_back(res);
  }
  return out;
}

inline ResonanceList find_resonances(const TransmissionSpectrum& s, double prominence = kDefaultProminence) {
  return find_resonances(s.omega, s.power, prominence);
}

inline std::vector<double> fsr_sequence(const ResonanceList& res) {
  if (res.size() < 2) throw NumericalError("fsr_sequence needs at least two resonances");
  std::vector<double> out;
  out.reserve(res.size() - 1);
  for (std::size_t i = 1; i < res.size(); ++i) out.push_back(res[i].frequency - res[i - 1].frequency);
  return out;
}

// Grid points needed to put `per_linewidth` samples across the narrowest
// main-ring resonance within `span`.
inline int resolving_points(const TopologySpec& topo, double span, int per_linewidth = 50) {
  double p_tot = topo.main_ring.roundtrip_power_loss + topo.bus_coupler.power_ratio();
  p_tot = std::max(p_tot, 1e-4);
  const double linewidth = p_tot / topo.main_ring.roundtrip_time();  // FWHM, rad/s
  const double pts = per_linewidth * span / linewidth;
  return static_cast<int>(std::clamp(pts, 1001.0, 4.0e6));
}

// ---------------------------------------------------------------------------
// Composite (main + aux) mode structure

struct CompositeModes {
  int aux_ratio = 1;
  double bare_fsr = 0.0;       // rad/s
  double composite_fsr = 0.0;  // mean far-from-aligned spacing, rad/s
  // sites[j] = resonance nearest j * bare_fsr for j = 1 .. N-1, as an offset
  // from the aligned mode at j = 0.
  std::vector<double> sites;
  ResonanceList resonances;  // everything found over one aux FSR
};

// Resonances over one aux FSR, [-FSR/2, (N + 1/2) FSR]. Resonances more than
// FSR/2 away from every aligned mode are the "far" set; their mean spacing is
// the FSR of the coupled system.
inline CompositeModes composite_modes(const TopologySpec& topo, double prominence = kDefaultProminence) {
  if (topo.variant != Variant::RingWithAux && topo.variant != Variant::LadderWithAux)
    throw InvariantError("topology.variant", "composite modes need an auxiliary ring");
  TopologySpec stat = topo;
  stat.variant = Variant::RingWithAux;
  stat.modulation.enabled = false;
  CompositeModes cm;
  cm.aux_ratio = topo.aux_ratio();
  cm.bare_fsr = fsr(topo.main_ring);
  const int n_aux = cm.aux_ratio;
  FrequencyGrid grid;
  grid.center_offset = 0.5 * n_aux * cm.bare_fsr;
  grid.span = (n_aux + 1.0) * cm.bare_fsr;
  grid.points = resolving_points(stat, grid.span);
  const auto spec = transmission_spectrum(stat, grid);
  cm.resonances = find_resonances(spec, prominence);

  std::vector<double> far;
  for (const auto& r : cm.resonances) {
    const double d0 = std::abs(r.frequency);
    const double d1 = std::abs(r.frequency - n_aux * cm.bare_fsr);
    if (std::min(d0, d1) > 0.5 * cm.bare_fsr) far.push_back(r.frequency);
  }
  if (far.size() < 2) throw NumericalError("composite spectrum has fewer than two resonances away from aligned modes");
  cm.composite_fsr = (far.back() - far.front()) / static_cast<double>(far.size() - 1);

  cm.sites.assign(static_cast<std::size_t>(n_aux - 1), 0.0);
  for (int j = 1; j < n_aux; ++j) {
    const double target = j * cm.bare_fsr;
    double best = far.front();
    for (double f : far)
      if (std::abs(f - target) < std::abs(best - target)) best = f;
    cm.sites[static_cast<std::size_t>(j - 1)] = best;
  }
  return cm;
}

// ---------------------------------------------------------------------------
// Splitting scan

struct SplittingPoint {
  double aux_amplitude;
  int dip_count;
  double separation;  // rad/s between outermost dips; 0 for a single dip
};

// For each gamma_a, counts resolved dips within +-FSR/2 of the aligned mode
// at `aligned_index` * N (0 by default).
inline std::vector<SplittingPoint> splitting_threshold_scan(const TopologySpec& topo, std::span<const double> gammas,
                                                            double prominence = kDefaultProminence,
                                                            int aligned_index = 0) {
  if (topo.variant != Variant::RingWithAux)
    throw InvariantError("topology.variant", "splitting scan needs a RingWithAux topology");
  const double omega_r = fsr(topo.main_ring);
  FrequencyGrid grid;
  grid.center_offset = static_cast<double>(aligned_index) * topo.aux_ratio() * omega_r;
  grid.span = omega_r;
  grid.points = resolving_points(topo, grid.span, 200);
  std::vector<SplittingPoint> out;
  for (double g : gammas) {
    TopologySpec t = topo;
    t.aux_coupler = CouplerSpec{g};
    t.modulation.enabled = false;
    const auto res = find_resonances(transmission_spectrum(t, grid), prominence);
    SplittingPoint p{g, static_cast<int>(res.size()), 0.0};
    if (res.size() >= 2) p.separation = res.back().frequency - res.front().frequency;
    out.push_back(p);
  }
  return out;
}

}  // namespace synthring
