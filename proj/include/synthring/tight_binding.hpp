#pragma once

// Lattice models of the synthetic frequency dimension: the nearest-neighbour
// chain and the two-leg ladder with flux per plaquette. Serves as the
// independent oracle for the time-domain ring engine.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "synthring/model.hpp"

namespace synthring {

enum class LatticeKind { Chain, Ladder };
enum class Boundary { Open, Periodic };

struct LatticeSpec {
  LatticeKind kind = LatticeKind::Chain;
  int sites = 1;        // chain sites, or left-leg sites N_L for a ladder
  int right_sites = 0;  // N_R (ladder only)
  double hopping = 0.0;        // J, rad/s
  double rung_coupling = 0.0;  // K, rad/s (ladder only)
  double flux = 0.0;           // phi, rad (ladder only)
  double site_loss_rate = 0.0;  // 1 / tau_p
  Boundary boundary = Boundary::Open;
  // Right-leg index of left-leg site 0; negative means centred.
  int left_offset = -1;

  int size() const { return kind == LatticeKind::Chain ? sites : sites + right_sites; }
  int offset() const { return left_offset >= 0 ? left_offset : (right_sites - sites) / 2; }

  void validate() const {
    if (sites < 1) throw InvariantError("lattice.sites", "lattice.sites must be >= 1");
    if (hopping < 0.0) throw InvariantError("lattice.hopping", "lattice.hopping must be >= 0");
    if (kind == LatticeKind::Ladder) {
      if (rung_coupling < 0.0) throw InvariantError("lattice.rung", "lattice.rung must be >= 0");
      if (right_sites < sites) throw InvariantError("lattice.right_sites", "ladder needs N_L <= N_R");
      if (offset() + sites > right_sites)
        throw InvariantError("lattice.left_offset", "left leg does not fit against the right leg");
      if (!(flux >= 0.0 && flux < kTwoPi)) throw InvariantError("lattice.flux", "lattice.flux must lie in [0, 2pi)");
      if (boundary == Boundary::Periodic && sites != right_sites)
        throw InvariantError("lattice.boundary", "periodic ladder needs equal legs");
    }
  }
};

using HermitianMatrix = Eigen::MatrixXcd;

// Chain: J on both off-diagonals. Ladder: left sites first, then right;
// left hops J, right hops J e^{-i phi} on b_m^dag b_{m+1}, rungs K between
// left site i and right site i + offset.
inline HermitianMatrix build_hamiltonian(const LatticeSpec& lat) {
  lat.validate();
  const int n = lat.size();
  HermitianMatrix h = HermitianMatrix::Zero(n, n);
  auto hop = [&](int a, int b, cplx v) {
    h(a, b) += v;
    h(b, a) += std::conj(v);
  };
  if (lat.kind == LatticeKind::Chain) {
    for (int m = 0; m + 1 < n; ++m) hop(m, m + 1, lat.hopping);
    if (lat.boundary == Boundary::Periodic && n >= 3) hop(n - 1, 0, lat.hopping);
    return h;
  }
  const int nl = lat.sites;
  const int nr = lat.right_sites;
  const cplx right_hop = std::polar(lat.hopping, -lat.flux);
  for (int m = 0; m + 1 < nl; ++m) hop(m, m + 1, lat.hopping);
  for (int m = 0; m + 1 < nr; ++m) hop(nl + m, nl + m + 1, right_hop);
  if (lat.boundary == Boundary::Periodic && nl >= 3) {
    hop(nl - 1, 0, lat.hopping);
    hop(nl + nr - 1, nl, right_hop);
  }
  const int off = lat.offset();
  for (int i = 0; i < nl; ++i) hop(i, nl + off + i, lat.rung_coupling);
  return h;
}

struct EigenSolution {
  std::vector<double> eigenvalues;  // ascending
  Eigen::MatrixXcd eigenvectors;    // columns, unit norm, first non-zero component real positive
};

inline constexpr double kHermitianTolerance = 1e-12;

inline EigenSolution eigenmodes(const HermitianMatrix& h) {
  if (h.rows() != h.cols()) throw NumericalError("eigenmodes: matrix is not square");
  const double scale = std::max(1.0, h.cwiseAbs().maxCoeff());
  if ((h - h.adjoint()).cwiseAbs().maxCoeff() > kHermitianTolerance * scale)
    throw NumericalError("eigenmodes: matrix is not Hermitian");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(h);
  if (solver.info() != Eigen::Success) throw NumericalError("eigenmodes: decomposition did not converge");
  EigenSolution out;
  const auto& vals = solver.eigenvalues();
  out.eigenvalues.assign(vals.data(), vals.data() + vals.size());
  out.eigenvectors = solver.eigenvectors();
  for (Eigen::Index c = 0; c < out.eigenvectors.cols(); ++c) {
    auto col = out.eigenvectors.col(c);
    col.normalize();
    for (Eigen::Index r = 0; r < col.size(); ++r) {
      if (std::abs(col(r)) > 1e-12) {
        col *= std::conj(col(r)) / std::abs(col(r));
        col(r) = std::abs(col(r));
        break;
      }
    }
  }
  return out;
}

// |sum_m v_m e^{-i k m}|^2 on k_j = 2 pi j / points.
inline std::vector<double> eigenmode_k_spectrum(const Eigen::VectorXcd& v, int points = 128) {
  std::vector<double> out(static_cast<std::size_t>(points));
  for (int j = 0; j < points; ++j) {
    const double k = kTwoPi * j / points;
    cplx acc = 0.0;
    for (Eigen::Index m = 0; m < v.size(); ++m) acc += v(m) * std::polar(1.0, -k * static_cast<double>(m));
    out[static_cast<std::size_t>(j)] = std::norm(acc);
  }
  return out;
}

// Analytic open-chain levels 2J cos(n pi / (N + 1)), n = 1..N, ascending.
inline std::vector<double> open_chain_levels(int sites, double hopping) {
  std::vector<double> out;
  for (int n = sites; n >= 1; --n) out.push_back(2.0 * hopping * std::cos(n * std::numbers::pi / (sites + 1)));
  return out;
}

inline double bloch_bands_chain(double k, double hopping) { return 2.0 * hopping * std::cos(k); }

struct BlochBand {
  double k = 0.0;
  double energies[2] = {0.0, 0.0};       // lower, upper
  double left_leg_weight[2] = {0.0, 0.0};  // n_L per band
};

// Bloch Hamiltonian [[2J cos k, K], [K, 2J cos(k - phi)]].
inline BlochBand bloch_bands_ladder(double k, double hopping, double rung, double flux) {
  const double a = 2.0 * hopping * std::cos(k);
  const double b = 2.0 * hopping * std::cos(k - flux);
  const double mean = 0.5 * (a + b);
  const double half = 0.5 * (a - b);
  const double root = std::sqrt(half * half + rung * rung);
  BlochBand band;
  band.k = k;
  band.energies[0] = mean - root;
  band.energies[1] = mean + root;
  for (int s = 0; s < 2; ++s) {
    if (rung == 0.0) {
      // Uncoupled legs: each band lives on one leg (even split if degenerate).
      if (a == b) band.left_leg_weight[s] = 0.5;
      else band.left_leg_weight[s] = (s == 0) == (a < b) ? 1.0 : 0.0;
      continue;
    }
    // Eigenvector (K, E - a).
    const double d = band.energies[s] - a;
    band.left_leg_weight[s] = rung * rung / (rung * rung + d * d);
  }
  return band;
}

struct EnergyRange {
  double lo = 0.0;
  double hi = 0.0;
  bool empty() const { return !(hi > lo); }
  double center() const { return 0.5 * (lo + hi); }
};

struct OneWayRanges {
  EnergyRange upper;  // only the upper band exists here
  EnergyRange lower;  // only the lower band exists here
};

// Energies where only one ladder band is present.
inline OneWayRanges ladder_one_way_ranges(double hopping, double rung, double flux, int samples = 4096) {
  double lower_min = std::numeric_limits<double>::infinity(), lower_max = -lower_min;
  double upper_min = lower_min, upper_max = -lower_min;
  for (int j = 0; j < samples; ++j) {
    const auto b = bloch_bands_ladder(kTwoPi * j / samples, hopping, rung, flux);
    lower_min = std::min(lower_min, b.energies[0]);
    lower_max = std::max(lower_max, b.energies[0]);
    upper_min = std::min(upper_min, b.energies[1]);
    upper_max = std::max(upper_max, b.energies[1]);
  }
  return {{lower_max, upper_max}, {lower_min, upper_min}};
}

struct SteadyState {
  Eigen::VectorXcd amplitudes;
  std::vector<double> intensities;  // normalized to unit sum
};

// Solves [(dw) I - H + (i / tau_p) I] a = i kappa e_{drive}.
inline SteadyState steady_state_response(const LatticeSpec& lat, double detuning, int drive_site, double kappa = 1.0) {
  if (!(lat.site_loss_rate > 0.0))
    throw InvariantError("lattice.site_loss_rate", "steady state needs site_loss_rate > 0");
  const int n = lat.size();
  if (drive_site < 0 || drive_site >= n) throw InvariantError("drive.input_site", "drive site outside lattice");
  Eigen::MatrixXcd a = -build_hamiltonian(lat);
  a.diagonal().array() += cplx(detuning, lat.site_loss_rate);
  Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(n);
  rhs(drive_site) = cplx(0.0, kappa);
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu(a);
  if (!(std::abs(lu.determinant()) > 0.0)) throw NumericalError("steady_state_response: singular system");
  SteadyState s;
  s.amplitudes = lu.solve(rhs);
  s.intensities.resize(static_cast<std::size_t>(n));
  double total = 0.0;
  for (int i = 0; i < n; ++i) total += std::norm(s.amplitudes(i));
  for (int i = 0; i < n; ++i) s.intensities[static_cast<std::size_t>(i)] = std::norm(s.amplitudes(i)) / total;
  return s;
}

struct ResponseMap {
  std::vector<double> detunings;
  std::vector<std::vector<double>> intensities;  // [detuning][site], unnormalized |a|^2
};

inline ResponseMap response_map(const LatticeSpec& lat, std::span<const double> detunings, int drive_site,
                                double kappa = 1.0) {
  ResponseMap map;
  map.detunings.assign(detunings.begin(), detunings.end());
  for (double dw : detunings) {
    const auto s = steady_state_response(lat, dw, drive_site, kappa);
    std::vector<double> row(static_cast<std::size_t>(s.amplitudes.size()));
    for (Eigen::Index i = 0; i < s.amplitudes.size(); ++i) row[static_cast<std::size_t>(i)] = std::norm(s.amplitudes(i));
    map.intensities.push_back(std::move(row));
  }
  return map;
}

}  // namespace synthring
