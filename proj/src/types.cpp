#include "nfdm/types.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace nfdm {

void validate(const TimeGrid& grid) {
  if (grid.n_samples < 2) throw std::invalid_argument("TimeGrid: need at least 2 samples");
  if (!(grid.dt > 0.0)) throw std::invalid_argument("TimeGrid: dt must be positive");
  if (!std::isfinite(grid.dt) || !std::isfinite(grid.t0))
    throw std::invalid_argument("TimeGrid: non-finite axis");
}

TimeGrid centered_grid(std::size_t n_samples, double half_width) {
  if (n_samples < 2) throw std::invalid_argument("centered_grid: need at least 2 samples");
  if (!(half_width > 0.0)) throw std::invalid_argument("centered_grid: half_width must be positive");
  const double dt = 2.0 * half_width / static_cast<double>(n_samples);
  return TimeGrid{n_samples, dt, -dt * static_cast<double>(n_samples / 2)};
}

DualPolSignal zero_signal(const TimeGrid& grid, Units units) {
  validate(grid);
  return DualPolSignal{grid, units, std::vector<cplx>(grid.n_samples), std::vector<cplx>(grid.n_samples)};
}

void validate(const DualPolSignal& s) {
  validate(s.grid);
  if (s.q1.size() != s.grid.n_samples || s.q2.size() != s.grid.n_samples)
    throw std::invalid_argument("DualPolSignal: component length does not match grid");
  for (std::size_t i = 0; i < s.grid.n_samples; ++i) {
    if (!std::isfinite(s.q1[i].real()) || !std::isfinite(s.q1[i].imag()) ||
        !std::isfinite(s.q2[i].real()) || !std::isfinite(s.q2[i].imag()))
      throw std::invalid_argument("DualPolSignal: non-finite sample at index " +
                                  std::to_string(i));
  }
}

double energy(const DualPolSignal& s) {
  const std::size_t n = s.grid.n_samples;
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double p = std::norm(s.q1[i]) + std::norm(s.q2[i]);
    acc += (i == 0 || i == n - 1) ? 0.5 * p : p;
  }
  return acc * s.grid.dt;
}

double average_power(const DualPolSignal& s) {
  return energy(s) / (s.grid.dt * static_cast<double>(s.grid.n_samples - 1));
}

double peak_amplitude(const DualPolSignal& s) {
  double peak = 0.0;
  for (std::size_t i = 0; i < s.grid.n_samples; ++i)
    peak = std::max(peak, std::max(std::abs(s.q1[i]), std::abs(s.q2[i])));
  return peak;
}

double edge_to_peak_ratio(const DualPolSignal& s) {
  const double peak = peak_amplitude(s);
  if (peak == 0.0) return 0.0;
  const std::size_t last = s.grid.n_samples - 1;
  const double edge = std::max(std::max(std::abs(s.q1[0]), std::abs(s.q2[0])),
                               std::max(std::abs(s.q1[last]), std::abs(s.q2[last])));
  return edge / peak;
}

void validate(const DiscreteSpectrum& spectrum, double min_separation) {
  for (std::size_t i = 0; i < spectrum.entries.size(); ++i) {
    const auto& e = spectrum.entries[i];
    if (!(e.lambda.imag() > 0.0))
      throw std::invalid_argument("DiscreteSpectrum: eigenvalue " + std::to_string(i) +
                                  " not in the upper half plane");
    if (e.b1 == cplx{} && e.b2 == cplx{})
      throw std::invalid_argument("DiscreteSpectrum: entry " + std::to_string(i) +
                                  " has a zero b-vector");
    for (std::size_t j = i + 1; j < spectrum.entries.size(); ++j) {
      if (std::abs(e.lambda - spectrum.entries[j].lambda) < min_separation)
        throw std::invalid_argument("DiscreteSpectrum: eigenvalues " + std::to_string(i) + " and " +
                                    std::to_string(j) + " closer than the minimum separation");
    }
  }
}

}  // namespace nfdm
