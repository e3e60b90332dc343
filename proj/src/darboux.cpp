#include "nfdm/darboux.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace nfdm {

namespace {

// Rescales one 3-vector to unit Euclidean norm in place. The grouping of
// the pairwise sums is chosen so that swapping components 2 and 3 produces
// bitwise-identical arithmetic (polarization swap symmetry).
inline void renormalize(cplx& a1, cplx& a2, cplx& a3, std::size_t idx) {
  const double n2 = std::norm(a1) + (std::norm(a2) + std::norm(a3));
  if (!(n2 > 0.0) || !std::isfinite(n2)) {
    throw std::runtime_error("darboux: degenerate auxiliary vector at grid index " +
                             std::to_string(idx));
  }
  const double inv = 1.0 / std::sqrt(n2);
  a1 *= inv;
  a2 *= inv;
  a3 *= inv;
}

}  // namespace

AuxiliarySolution seed_solution(cplx lambda, cplx b1, cplx b2, const TimeGrid& grid) {
  validate(grid);
  if (!(lambda.imag() > 0.0)) {
    throw std::invalid_argument("seed_solution: eigenvalue must lie in the upper half plane");
  }
  const cplx c1 = -b1;
  const cplx c2 = -b2;
  if (std::abs(c1) == 0.0 && std::abs(c2) == 0.0) {
    throw std::invalid_argument("seed_solution: spectral amplitudes must not both vanish");
  }

  AuxiliarySolution aux;
  aux.lambda = lambda;
  aux.psi1.resize(grid.n_samples);
  aux.psi2.resize(grid.n_samples);
  aux.psi3.resize(grid.n_samples);

  const double sigma = lambda.real();
  const double nu = lambda.imag();
  // Log magnitudes of the raw components are nu*t and -nu*t + log|c|;
  // the largest is subtracted before exponentiating so the vector is
  // representable on any window where the signal itself is.
  const double lc1 = std::abs(c1) > 0.0 ? std::log(std::abs(c1)) : -1e300;
  const double lc2 = std::abs(c2) > 0.0 ? std::log(std::abs(c2)) : -1e300;
  const double a1 = std::arg(c1);
  const double a2 = std::arg(c2);

  for (std::size_t i = 0; i < grid.n_samples; ++i) {
    const double t = grid.t(i);
    const double r1 = nu * t;
    const double r2 = lc1 - nu * t;
    const double r3 = lc2 - nu * t;
    const double m = std::max(r1, std::max(r2, r3));
    cplx p1 = std::polar(std::exp(r1 - m), -sigma * t);
    cplx p2 = std::polar(std::exp(r2 - m), sigma * t + a1);
    cplx p3 = std::polar(std::exp(r3 - m), sigma * t + a2);
    renormalize(p1, p2, p3, i);
    if (std::abs(p1) < kAuxFloor) {
      throw std::runtime_error(
          "seed_solution: first auxiliary component underflows at grid index " +
          std::to_string(i) + " (t = " + std::to_string(t) + ")");
    }
    aux.psi1[i] = p1;
    aux.psi2[i] = p2;
    aux.psi3[i] = p3;
  }
  return aux;
}

void darboux_step(std::vector<cplx>& q1, std::vector<cplx>& q2,
                  const AuxiliarySolution& aux_new,
                  std::span<AuxiliarySolution> aux_rest) {
  const std::size_t n = q1.size();
  if (q2.size() != n || aux_new.psi1.size() != n || aux_new.psi2.size() != n ||
      aux_new.psi3.size() != n) {
    throw std::invalid_argument("darboux_step: array length mismatch");
  }
  for (const auto& r : aux_rest) {
    if (r.psi1.size() != n || r.psi2.size() != n || r.psi3.size() != n) {
      throw std::invalid_argument("darboux_step: auxiliary array length mismatch");
    }
  }

  const cplx l0 = aux_new.lambda;
  const cplx gain = 2.0 * cplx(0.0, 1.0) * (std::conj(l0) - l0);
  const cplx shift = l0 - std::conj(l0);

  for (std::size_t i = 0; i < n; ++i) {
    const cplx p1 = aux_new.psi1[i];
    const cplx p2 = aux_new.psi2[i];
    const cplx p3 = aux_new.psi3[i];
    const double n2 = std::norm(p1) + (std::norm(p2) + std::norm(p3));

    q1[i] += gain * p1 * std::conj(p2) / n2;
    q2[i] += gain * p1 * std::conj(p3) / n2;

    for (auto& r : aux_rest) {
      const cplx scale = r.lambda - std::conj(l0);
      const cplx inner =
          std::conj(p1) * r.psi1[i] + (std::conj(p2) * r.psi2[i] + std::conj(p3) * r.psi3[i]);
      const cplx proj = shift * inner / n2;
      cplx a1 = scale * r.psi1[i] - proj * p1;
      cplx a2 = scale * r.psi2[i] - proj * p2;
      cplx a3 = scale * r.psi3[i] - proj * p3;
      renormalize(a1, a2, a3, i);
      r.psi1[i] = a1;
      r.psi2[i] = a2;
      r.psi3[i] = a3;
    }
  }
}

DualPolSignal synthesize(const DiscreteSpectrum& spectrum, const TimeGrid& grid,
                         double truncation_floor) {
  validate(grid);
  validate(spectrum);

  std::vector<std::size_t> order(spectrum.entries.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const cplx& la = spectrum.entries[a].lambda;
    const cplx& lb = spectrum.entries[b].lambda;
    if (la.imag() != lb.imag()) return la.imag() < lb.imag();
    return la.real() < lb.real();
  });

  std::vector<AuxiliarySolution> aux;
  aux.reserve(order.size());
  for (std::size_t idx : order) {
    const auto& e = spectrum.entries[idx];
    aux.push_back(seed_solution(e.lambda, e.b1, e.b2, grid));
  }

  DualPolSignal out = zero_signal(grid, Units::normalized);
  for (std::size_t k = 0; k < aux.size(); ++k) {
    darboux_step(out.q1, out.q2, aux[k], std::span(aux).subspan(k + 1));
  }

  const double ratio = edge_to_peak_ratio(out);
  if (ratio > truncation_floor) {
    throw std::runtime_error("synthesize: signal is not contained by the window (edge/peak = " +
                             std::to_string(ratio) + ")");
  }
  return out;
}

}  // namespace nfdm
