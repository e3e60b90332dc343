#pragma once

#include <span>

#include "nfdm/types.hpp"

namespace nfdm {

/// Solution of the scattering problem at one eigenvalue, sampled on the
/// grid. Components are rebalanced to unit Euclidean norm at every grid
/// point; the synthesis recursion only ever uses the direction of the
/// vector, so per-point scale factors are dropped outright instead of
/// being carried in log space.
struct AuxiliarySolution {
  cplx lambda;
  std::vector<cplx> psi1;
  std::vector<cplx> psi2;
  std::vector<cplx> psi3;
};

/// Floor on |psi1| after rebalancing. Below this the auxiliary matrix is
/// numerically rank deficient and the grid is unusable for this eigenvalue.
constexpr double kAuxFloor = 1e-30;

/// Null-field solution (e^{-i lambda t}, c1 e^{i lambda t}, c2 e^{i lambda t})
/// with the seed constants (c1, c2) = (-b1, -b2). The sign convention is
/// fixed by the round-trip calibration test against the forward transform:
/// a single synthesis step with these constants produces a signal whose
/// measured spectral amplitudes equal (b1, b2) exactly.
AuxiliarySolution seed_solution(cplx lambda, cplx b1, cplx b2, const TimeGrid& grid);

/// One Darboux step: adds aux_new.lambda to the discrete spectrum of
/// (q1, q2) in place and transforms every remaining auxiliary solution to
/// the new system. aux_new is consumed conceptually (it maps to zero).
///
/// The signal update is evaluated in the division-free form
///   q_j += 2i (conj(l0) - l0) psi1 conj(psi_{j+1}) / |psi|^2,
/// and the auxiliary update as the rank-one form of (lambda I - G0):
///   psi_k' = (lambda_k - conj(l0)) psi_k
///            - (l0 - conj(l0)) psi <psi, psi_k> / |psi|^2.
void darboux_step(std::vector<cplx>& q1, std::vector<cplx>& q2,
                  const AuxiliarySolution& aux_new,
                  std::span<AuxiliarySolution> aux_rest);

/// Builds the waveform carrying the requested discrete spectrum from the
/// null field, one Darboux step per entry in order of increasing Im(lambda).
/// Output is in normalized units. Throws if the synthesized signal is not
/// contained by the window to the truncation floor.
DualPolSignal synthesize(const DiscreteSpectrum& spectrum, const TimeGrid& grid,
                         double truncation_floor = kTruncationFloor);

}  // namespace nfdm
