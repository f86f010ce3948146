#pragma once

// Physical specifications shared by every engine: rings, couplers, modulation,
// topology wiring, drive and frequency grids, plus the derived quantities
// (free-spectral range, photon lifetime, modulation-induced hopping).

#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace synthring {

using cplx = std::complex<double>;

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// ---------------------------------------------------------------------------
// Errors

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Base for everything a user can fix by editing the configuration.
class ConfigError : public Error {
 public:
  ConfigError(std::string key, const std::string& what)
      : Error(what), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

class ParseError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class MissingKeyError : public ConfigError {
 public:
  explicit MissingKeyError(const std::string& key)
      : ConfigError(key, "missing " + key) {}
};

class InvariantError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

// Failures of the numerics themselves (instability, singular systems, ...).
class NumericalError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Specifications

struct RingSpec {
  double length = 1.0;                // m
  double group_velocity = 1.0;        // m/s
  double roundtrip_power_loss = 0.0;  // 1 - exp(-alpha L)
  std::string label;

  double roundtrip_time() const { return length / group_velocity; }
  // Field amplitude surviving one roundtrip.
  double roundtrip_amplitude() const { return std::sqrt(1.0 - roundtrip_power_loss); }

  void validate(const std::string& key) const {
    if (!(length > 0.0)) throw InvariantError(key + ".length_m", key + ".length_m must be > 0");
    if (!(group_velocity > 0.0))
      throw InvariantError(key + ".group_velocity_m_s", key + ".group_velocity_m_s must be > 0");
    if (!(roundtrip_power_loss >= 0.0 && roundtrip_power_loss < 1.0))
      throw InvariantError(key + ".roundtrip_power_loss",
                           key + ".roundtrip_power_loss must lie in [0, 1)");
  }

  bool operator==(const RingSpec&) const = default;
};

// Symmetric directional coupler [[t, i g], [i g, t]] with t = sqrt(1 - g^2).
// g = 0 is accepted and means the coupler is open.
struct CouplerSpec {
  double amplitude_ratio = 0.0;

  double through() const { return std::sqrt(1.0 - amplitude_ratio * amplitude_ratio); }
  double power_ratio() const { return amplitude_ratio * amplitude_ratio; }

  void validate(const std::string& key) const {
    if (!(amplitude_ratio >= 0.0 && amplitude_ratio < 1.0))
      throw InvariantError(key + ".amplitude_ratio", key + ".amplitude_ratio must lie in [0, 1)");
  }

  bool operator==(const CouplerSpec&) const = default;
};

// Per-pass phase modulation phase_depth * cos(frequency * t + phase_offset).
// An empty frequency means "track the mode spacing of the driven ring".
struct ModulationSpec {
  std::optional<double> frequency;  // rad/s
  double phase_depth = 0.0;         // rad per pass
  double phase_offset = 0.0;        // rad
  bool enabled = false;

  void validate(const std::string& key) const {
    if (frequency && !(*frequency >= 0.0))
      throw InvariantError(key + ".frequency", key + ".frequency must be >= 0");
    if (!(phase_depth >= 0.0))
      throw InvariantError(key + ".phase_depth_rad", key + ".phase_depth_rad must be >= 0");
    if (!(phase_offset >= 0.0 && phase_offset < kTwoPi))
      throw InvariantError(key + ".phase_offset_rad", key + ".phase_offset_rad must lie in [0, 2pi)");
  }

  bool operator==(const ModulationSpec&) const = default;
};

enum class Variant { SingleRing, RingWithAux, TwoRingLadder, LadderWithAux };

inline std::string to_string(Variant v) {
  switch (v) {
    case Variant::SingleRing: return "SingleRing";
    case Variant::RingWithAux: return "RingWithAux";
    case Variant::TwoRingLadder: return "TwoRingLadder";
    case Variant::LadderWithAux: return "LadderWithAux";
  }
  return "?";
}

inline std::optional<Variant> parse_variant(const std::string& s) {
  if (s == "SingleRing") return Variant::SingleRing;
  if (s == "RingWithAux") return Variant::RingWithAux;
  if (s == "TwoRingLadder") return Variant::TwoRingLadder;
  if (s == "LadderWithAux") return Variant::LadderWithAux;
  return std::nullopt;
}

inline bool has_aux(Variant v) { return v == Variant::RingWithAux || v == Variant::LadderWithAux; }
inline bool is_ladder(Variant v) { return v == Variant::TwoRingLadder || v == Variant::LadderWithAux; }

// Relative tolerance on L_main / L_aux being an integer.
inline constexpr double kCommensurabilityTolerance = 1e-6;

struct TopologySpec {
  Variant variant = Variant::SingleRing;
  RingSpec main_ring;                 // the bus-coupled (left) ring
  std::optional<RingSpec> aux_ring;
  std::optional<RingSpec> right_ring;  // ladder variants
  CouplerSpec bus_coupler;
  std::optional<CouplerSpec> aux_coupler;
  std::optional<CouplerSpec> inter_ring_coupler;
  ModulationSpec modulation;                     // main / left ring
  std::optional<ModulationSpec> right_modulation;  // ladder variants

  // N = L_main / L_aux; 1 for variants without an auxiliary ring.
  int aux_ratio() const {
    if (!has_aux(variant) || !aux_ring) return 1;
    return static_cast<int>(std::lround(main_ring.length / aux_ring->length));
  }

  void validate() const {
    main_ring.validate("main_ring");
    bus_coupler.validate("bus_coupler");
    modulation.validate("modulation");
    if (has_aux(variant)) {
      if (!aux_ring) throw MissingKeyError("aux_ring");
      if (!aux_coupler) throw MissingKeyError("aux_coupler");
      aux_ring->validate("aux_ring");
      aux_coupler->validate("aux_coupler");
      if (aux_ring->group_velocity != main_ring.group_velocity)
        throw InvariantError("aux_ring.group_velocity_m_s",
                             "aux_ring.group_velocity_m_s must equal main_ring.group_velocity_m_s");
      const double ratio = main_ring.length / aux_ring->length;
      const double n = std::round(ratio);
      if (n < 1.0 || std::abs(ratio - n) > kCommensurabilityTolerance * ratio)
        throw InvariantError("aux_ring.length_m",
                             "aux_ring.length_m: main/aux length ratio " + std::to_string(ratio) +
                                 " is not commensurate (must be a positive integer)");
      if (n < 2.0)
        throw InvariantError("aux_ring.length_m", "aux_ring.length_m must be shorter than the main ring");
    }
    if (is_ladder(variant)) {
      if (!right_ring) throw MissingKeyError("right_ring");
      if (!inter_ring_coupler) throw MissingKeyError("inter_ring_coupler");
      right_ring->validate("right_ring");
      inter_ring_coupler->validate("inter_ring_coupler");
      if (!(right_ring->roundtrip_power_loss > 0.0))
        throw InvariantError("right_ring.roundtrip_power_loss",
                             "right_ring.roundtrip_power_loss must be > 0 (no external coupler bounds its lifetime)");
      if (right_modulation) right_modulation->validate("right_modulation");
    }
  }

  bool operator==(const TopologySpec&) const = default;
};

struct DriveSpec {
  double detuning = 0.0;  // rad/s from the reference resonance of site input_site
  int input_site = 0;     // m0
  double amplitude = 1.0;

  void validate() const {
    if (amplitude != 1.0) throw InvariantError("drive.amplitude", "drive.amplitude is fixed at 1.0");
  }

  bool operator==(const DriveSpec&) const = default;
};

// Uniform grid of `points` frequencies spanning `span`, centred at
// reference_frequency + center_offset. reference_frequency labels the m = 0
// mode; field evaluations only ever see the offset from it.
struct FrequencyGrid {
  double reference_frequency = 0.0;  // rad/s
  double center_offset = 0.0;        // rad/s
  double span = 1.0;                 // rad/s
  int points = 2;

  void validate(const std::string& key = "grid") const {
    if (points < 2) throw InvariantError(key + ".points", key + ".points must be >= 2");
    if (!(span > 0.0)) throw InvariantError(key + ".span", key + ".span must be > 0");
  }

  // Offset from reference_frequency of point i.
  double offset(int i) const {
    return center_offset - 0.5 * span + span * static_cast<double>(i) / static_cast<double>(points - 1);
  }

  std::vector<double> offsets() const {
    std::vector<double> out(static_cast<std::size_t>(points));
    for (int i = 0; i < points; ++i) out[static_cast<std::size_t>(i)] = offset(i);
    return out;
  }

  bool operator==(const FrequencyGrid&) const = default;
};

// ---------------------------------------------------------------------------
// Derived quantities

// Free-spectral range 2 pi v_g / L in rad/s.
inline double fsr(const RingSpec& ring) { return kTwoPi * ring.group_velocity / ring.length; }

// Field (amplitude) decay time of a ring, tau_p = 2 T_R / p_tot, where p_tot
// is the roundtrip power loss plus the power leaving through every external
// coupler. With this definition the resonance FWHM is 2 / tau_p, the
// lattice loss term is i / tau_p, and sideband intensities fall off as
// exp(-|n| / (tau_p J)).
inline double photon_lifetime(const RingSpec& ring, const std::vector<CouplerSpec>& external_couplers) {
  double p_tot = ring.roundtrip_power_loss;
  for (const auto& c : external_couplers) p_tot += c.power_ratio();
  if (p_tot >= 1.0) throw InvariantError("roundtrip_power_loss", "total roundtrip power loss >= 1: outside the model's validity");
  if (p_tot <= 0.0) throw InvariantError("roundtrip_power_loss", "lossless, uncoupled ring has an infinite lifetime");
  return 2.0 * ring.roundtrip_time() / p_tot;
}

// Hopping rate J = delta / (2 T_R) of a per-pass phase modulation.
inline double coupling_strength(const ModulationSpec& mod, const RingSpec& ring) {
  if (!mod.enabled) return 0.0;
  return mod.phase_depth / (2.0 * ring.roundtrip_time());
}

// Phase depth that realises hopping J.
inline double phase_depth_for_hopping(double hopping, const RingSpec& ring) {
  return 2.0 * ring.roundtrip_time() * hopping;
}

// Rung coupling of two equal-FSR rings joined by a lumped coupler: the
// coupler is the rotation exp(i asin(g) sigma_x) once per roundtrip.
inline double rung_coupling(const CouplerSpec& coupler, const RingSpec& ring) {
  return std::asin(coupler.amplitude_ratio) / ring.roundtrip_time();
}

// Lattice flux realised by a right-ring modulation phase offset. The ring
// produces hops -J exp(-i phi) on b_{m+1}^dag b_m; after gauging away the
// signs this is the two-leg Hamiltonian with flux -phi.
inline double ring_equivalent_flux(double modulation_phase_offset) {
  double f = std::fmod(kTwoPi - modulation_phase_offset, kTwoPi);
  if (f < 0.0) f += kTwoPi;
  return f;
}

// Lifetime of the ring that bounds how long the coupled system takes to settle.
inline double settling_lifetime(const TopologySpec& topo) {
  double tau = photon_lifetime(topo.main_ring, {topo.bus_coupler});
  if (is_ladder(topo.variant) && topo.right_ring) tau = std::max(tau, photon_lifetime(*topo.right_ring, {}));
  if (has_aux(topo.variant) && topo.aux_ring && topo.aux_coupler) {
    // Off main-ring resonance the aux ring drains into the main ring, which
    // passes the light straight to the bus.
    const double p = topo.aux_ring->roundtrip_power_loss + topo.aux_coupler->power_ratio();
    if (p > 0.0) tau = std::max(tau, 2.0 * topo.aux_ring->roundtrip_time() / p);
  }
  return tau;
}

}  // namespace synthring
