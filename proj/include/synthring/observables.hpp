#pragma once

#include <numeric>
#include <vector>

#include "synthring/model.hpp"

namespace synthring {

// Complex amplitudes on the frequency lattice, indexed by sideband order
// n = m - m0 in [-n_max, n_max].
struct SidebandSpectrum {
  int n_max = 0;
  std::vector<cplx> amplitudes;     // index n + n_max
  std::vector<double> intensities;  // |amplitude|^2, optionally normalized
  bool normalized = false;

  int order(std::size_t index) const { return static_cast<int>(index) - n_max; }
  double intensity(int n) const { return intensities.at(static_cast<std::size_t>(n + n_max)); }

  void normalize() {
    const double total = std::accumulate(intensities.begin(), intensities.end(), 0.0);
    if (total > 0.0)
      for (auto& v : intensities) v /= total;
    normalized = true;
  }
};

inline SidebandSpectrum make_spectrum(int n_max, std::vector<double> intensities) {
  SidebandSpectrum s;
  s.n_max = n_max;
  s.amplitudes.resize(intensities.size());
  for (std::size_t i = 0; i < intensities.size(); ++i) s.amplitudes[i] = std::sqrt(intensities[i]);
  s.intensities = std::move(intensities);
  return s;
}

// Boundary sites as sideband orders relative to the drive (lower < 0 < upper).
struct BoundaryPositions {
  int lower = 0;
  int upper = 0;
};

// Time-resolved intensity folded onto quasimomentum, stacked over detuning.
struct BandMap {
  std::vector<double> k_axis;          // ascending, covers [0, 2 pi) once
  std::vector<double> detuning_axis;   // rad/s
  std::vector<std::vector<double>> intensity;  // [detuning][k]
};

}  // namespace synthring
