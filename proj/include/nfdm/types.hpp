#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace nfdm {

using cplx = std::complex<double>;

constexpr double kSpeedOfLight = 2.99792458e8;   // m/s
constexpr double kPlanck = 6.62607015e-34;       // J s

/// Whether a signal lives on the dimensionless (t, z, q) axes or on
/// physical axes (seconds, meters, sqrt-watt amplitudes).
enum class Units : std::uint8_t { normalized, physical };

/// Uniform sampling grid for one time window.
struct TimeGrid {
  std::size_t n_samples = 0;
  double dt = 0.0;  // sample spacing; seconds when physical, dimensionless otherwise
  double t0 = 0.0;  // time of the first sample

  double t(std::size_t i) const { return t0 + dt * static_cast<double>(i); }
  double t_last() const { return t(n_samples - 1); }

  bool operator==(const TimeGrid&) const = default;
};

/// Throws std::invalid_argument unless n_samples >= 2 and dt > 0.
void validate(const TimeGrid& grid);

/// Symmetric grid of n samples with t=0 halfway: sample i sits at (i - n/2)*dt.
TimeGrid centered_grid(std::size_t n_samples, double half_width);

/// Pair of complex field envelopes sampled on a shared grid.
struct DualPolSignal {
  TimeGrid grid;
  Units units = Units::normalized;
  std::vector<cplx> q1;
  std::vector<cplx> q2;
};

DualPolSignal zero_signal(const TimeGrid& grid, Units units);

/// Throws unless q1/q2 both have grid.n_samples entries.
void validate(const DualPolSignal& s);

/// Trapezoidal quadrature of |q1|^2 + |q2|^2 over the grid.
double energy(const DualPolSignal& s);

/// Mean of |q1|^2 + |q2|^2 (trapezoid energy divided by window span).
double average_power(const DualPolSignal& s);

/// Largest |q| over both polarizations.
double peak_amplitude(const DualPolSignal& s);

/// Largest |q| over the first and last sample of both polarizations,
/// relative to the overall peak. Gauges how well the window contains
/// the signal; compare against an amplitude truncation floor.
double edge_to_peak_ratio(const DualPolSignal& s);

/// Default amplitude floor required at the window edges (-40 dB).
constexpr double kTruncationFloor = 1e-2;

/// One discrete eigenvalue with its pair of spectral amplitudes.
struct SpectrumEntry {
  cplx lambda;  // upper half plane
  cplx b1;
  cplx b2;
};

/// Ordered list of discrete-spectrum entries.
struct DiscreteSpectrum {
  std::vector<SpectrumEntry> entries;
};

/// Enforces Im(lambda) > 0, pairwise eigenvalue separation >= min_separation,
/// and (b1,b2) != (0,0) for every entry.
void validate(const DiscreteSpectrum& spectrum, double min_separation = 1e-6);

}  // namespace nfdm
