#pragma once

// Measurements that turn engine output into numbers: sideband decay length,
// transport directionality and fringe visibility, band ridges and discrete
// level matching.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "synthring/observables.hpp"
#include "synthring/tight_binding.hpp"

namespace synthring {

struct DecayFit {
  double decay_constant = 0.0;  // sites, l in exp(-|n| / l)
  int n_min = 0;
  int n_max = 0;
  double r_squared = 0.0;
  bool low_quality = false;  // r^2 < 0.9 or a tail that does not decay
};

namespace detail {

struct LineFit {
  double slope = 0.0;
  double r_squared = 0.0;
};

inline LineFit fit_line(std::span<const double> x, std::span<const double> y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  LineFit f;
  f.slope = sxx > 0 ? sxy / sxx : 0.0;
  f.r_squared = syy > 0 ? (sxy * sxy) / (sxx * syy) : 0.0;
  return f;
}

}  // namespace detail

// Least-squares fit of ln I against |n| on each tail, n in [n_min, n_max]
// (n_max defaults to the spectrum's n_max). l = -1/slope averaged over the
// two tails; r^2 is the worse of the two.
inline DecayFit fit_decay(const SidebandSpectrum& s, int n_min = 3, std::optional<int> n_max = std::nullopt) {
  const int hi = std::min(n_max.value_or(s.n_max), s.n_max);
  if (hi - n_min + 1 < 4) throw NumericalError("fit_decay: fewer than 4 points per tail");
  DecayFit out;
  out.n_min = n_min;
  out.n_max = hi;
  double ell_sum = 0.0;
  double r2 = 1.0;
  for (int sign : {-1, 1}) {
    std::vector<double> x, y;
    for (int n = n_min; n <= hi; ++n) {
      const double v = s.intensity(sign * n);
      if (!(v > 0.0)) throw NumericalError("fit_decay: non-positive intensity in fit range");
      x.push_back(n);
      y.push_back(std::log(v));
    }
    const auto f = detail::fit_line(x, y);
    if (!(f.slope < 0.0)) {
      out.low_quality = true;
      ell_sum += std::numeric_limits<double>::infinity();
    } else {
      ell_sum += -1.0 / f.slope;
    }
    r2 = std::min(r2, f.r_squared);
  }
  out.decay_constant = 0.5 * ell_sum;
  out.r_squared = r2;
  if (r2 < 0.9) out.low_quality = true;
  return out;
}

struct TransportMetrics {
  double directionality = 0.0;  // D
  double visibility = 0.0;      // V
  int window_lo = 0;            // interior window, inclusive orders
  int window_hi = 0;
  std::string occupied_band;
};

// D = (sum_{n>0} I - sum_{n<0} I) / sum_{n!=0} I over the whole spectrum.
inline double directionality(const SidebandSpectrum& s) {
  double pos = 0, neg = 0;
  for (int n = 1; n <= s.n_max; ++n) {
    pos += s.intensity(n);
    neg += s.intensity(-n);
  }
  if (pos + neg <= 0.0) return 0.0;
  return (pos - neg) / (pos + neg);
}

inline double visibility(const SidebandSpectrum& s, int lo, int hi) {
  double mx = -std::numeric_limits<double>::infinity(), mn = std::numeric_limits<double>::infinity();
  for (int n = lo; n <= hi; ++n) {
    mx = std::max(mx, s.intensity(n));
    mn = std::min(mn, s.intensity(n));
  }
  if (mx + mn <= 0.0) return 0.0;
  return (mx - mn) / (mx + mn);
}

// V is taken between the drive and the nearest boundary, both excluded; on a
// tie the lower side is used.
inline TransportMetrics transport_metrics(const SidebandSpectrum& s, BoundaryPositions b, std::string occupied_band = {}) {
  if (!(b.lower < 0 && b.upper > 0)) throw NumericalError("transport_metrics: boundaries must straddle the drive");
  TransportMetrics m;
  m.occupied_band = std::move(occupied_band);
  m.directionality = directionality(s);
  if (-b.lower <= b.upper) {
    m.window_lo = std::max(b.lower + 1, -s.n_max);
    m.window_hi = -1;
  } else {
    m.window_lo = 1;
    m.window_hi = std::min(b.upper - 1, s.n_max);
  }
  if (m.window_hi < m.window_lo) throw NumericalError("transport_metrics: empty interior window");
  m.visibility = visibility(s, m.window_lo, m.window_hi);
  return m;
}

// Mean intensity strictly beyond the boundaries over mean interior intensity
// (drive site included), in dB. Negative means suppressed.
inline double confinement_db(const SidebandSpectrum& s, BoundaryPositions b) {
  double in = 0, out = 0;
  int n_in = 0, n_out = 0;
  for (int n = -s.n_max; n <= s.n_max; ++n) {
    if (n > b.lower && n < b.upper) {
      in += s.intensity(n);
      ++n_in;
    } else if (n < b.lower || n > b.upper) {
      out += s.intensity(n);
      ++n_out;
    }
  }
  if (n_in == 0 || n_out == 0) throw NumericalError("confinement_db: empty interior or exterior");
  return 10.0 * std::log10((out / n_out) / (in / n_in));
}

// ---------------------------------------------------------------------------
// Band ridges and discrete levels

struct RidgePoint {
  double k;
  double detuning;
};

namespace detail {

// Local maxima of y above threshold * max(y), refined parabolically.
inline std::vector<double> peak_positions(std::span<const double> x, std::span<const double> y, double rel_threshold) {
  std::vector<double> out;
  if (y.size() < 3) return out;
  const double top = *std::max_element(y.begin(), y.end());
  if (!(top > 0.0)) return out;
  for (std::size_t i = 1; i + 1 < y.size(); ++i) {
    if (!(y[i] > y[i - 1] && y[i] >= y[i + 1])) continue;
    if (y[i] < rel_threshold * top) continue;
    const double d = y[i - 1] - 2.0 * y[i] + y[i + 1];
    double off = d != 0.0 ? 0.5 * (y[i - 1] - y[i + 1]) / d : 0.0;
    off = std::clamp(off, -0.5, 0.5);
    const double step = off >= 0 ? x[i + 1] - x[i] : x[i] - x[i - 1];
    out.push_back(x[i] + off * step);
  }
  return out;
}

}  // namespace detail

// Per k column: detunings of local intensity maxima above rel_threshold of
// that column's maximum.
inline std::vector<RidgePoint> extract_band_ridge(const BandMap& map, double rel_threshold = 0.3) {
  std::vector<RidgePoint> out;
  const std::size_t nk = map.k_axis.size();
  std::vector<double> column(map.detuning_axis.size());
  for (std::size_t j = 0; j < nk; ++j) {
    for (std::size_t i = 0; i < column.size(); ++i) column[i] = map.intensity[i][j];
    for (double d : detail::peak_positions(map.detuning_axis, column, rel_threshold)) out.push_back({map.k_axis[j], d});
  }
  return out;
}

// RMS of ridge detuning minus 2J cos k.
inline double ridge_rms(std::span<const RidgePoint> ridge, double hopping) {
  if (ridge.empty()) return std::numeric_limits<double>::infinity();
  double acc = 0.0;
  for (const auto& p : ridge) {
    const double d = p.detuning - bloch_bands_chain(p.k, hopping);
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(ridge.size()));
}

// Peaks of the k-integrated intensity: the discrete levels of a finite lattice.
inline std::vector<double> discrete_levels(const BandMap& map, double rel_threshold = 0.05) {
  std::vector<double> total(map.detuning_axis.size(), 0.0);
  for (std::size_t i = 0; i < total.size(); ++i)
    for (double v : map.intensity[i]) total[i] += v;
  return detail::peak_positions(map.detuning_axis, total, rel_threshold);
}

struct LevelMatch {
  double rms_mismatch = std::numeric_limits<double>::infinity();
  std::vector<std::pair<double, double>> pairs;  // (observed, predicted)
  std::vector<double> unpaired_observed;
  std::vector<double> unpaired_predicted;
};

// Pairs the two sorted lists in order. With unequal counts the shorter list is
// slid along the longer and the offset with the lowest RMS wins.
inline LevelMatch match_levels(std::span<const double> observed, std::span<const double> predicted) {
  if (observed.empty() || predicted.empty()) throw NumericalError("match_levels: empty level list");
  std::vector<double> a(observed.begin(), observed.end()), b(predicted.begin(), predicted.end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const bool a_short = a.size() <= b.size();
  const auto& s = a_short ? a : b;
  const auto& l = a_short ? b : a;
  LevelMatch best;
  std::size_t best_off = 0;
  for (std::size_t off = 0; off + s.size() <= l.size(); ++off) {
    double acc = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) acc += (s[i] - l[i + off]) * (s[i] - l[i + off]);
    const double rms = std::sqrt(acc / static_cast<double>(s.size()));
    if (rms < best.rms_mismatch) {
      best.rms_mismatch = rms;
      best_off = off;
    }
  }
  for (std::size_t i = 0; i < l.size(); ++i) {
    const bool paired = i >= best_off && i < best_off + s.size();
    if (paired) {
      const double sv = s[i - best_off];
      best.pairs.push_back(a_short ? std::make_pair(sv, l[i]) : std::make_pair(l[i], sv));
    } else {
      (a_short ? best.unpaired_predicted : best.unpaired_observed).push_back(l[i]);
    }
  }
  return best;
}

struct ChainCalibration {
  int sites = 0;
  LevelMatch match;
};

// Open-chain size whose analytic levels best match the observed ones. Sizes
// smaller than the number of observed levels are not considered.
inline ChainCalibration calibrate_chain_size(std::span<const double> observed, double hopping, int max_sites = 64) {
  ChainCalibration best;
  const int min_sites = std::max<int>(1, static_cast<int>(observed.size()));
  for (int n = min_sites; n <= max_sites; ++n) {
    const auto levels = open_chain_levels(n, hopping);
    auto m = match_levels(observed, levels);
    if (m.rms_mismatch < best.match.rms_mismatch - 1e-15) {
      best.sites = n;
      best.match = std::move(m);
    }
  }
  return best;
}

}  // namespace synthring
