#pragma once

#include <span>
#include <utility>

#include "nfdm/types.hpp"

namespace nfdm {

/// Scattering data of a signal at one spectral point: the transfer
/// coefficient a, its derivative da/dlambda, and the reflection
/// amplitudes (b1, b2) of the two polarizations.
struct ScatteringResult {
  cplx lambda;
  cplx a;
  cplx a_prime;
  cplx b1;
  cplx b2;
};

/// Integrates the scattering problem across the window with the
/// forward-backward trapezoidal scheme: the left solution is marched from
/// the first sample, the three right solutions from the last sample, and
/// the coefficients are read off by matching at the sample of peak
/// instantaneous power. The derivative is propagated alongside through the
/// differentiated recursion, so a and a_prime are consistent to rounding.
///
/// The a coefficient is the exponentially small part of the left solution
/// at the matching point, so it drops under the rounding floor once
/// Im(lambda) times the half window exceeds roughly 17 nepers. Signaling
/// eigenvalues sit far below that limit; root searches started way above
/// it can report spurious zeros.
ScatteringResult scatter(const DualPolSignal& s, cplx lambda);

struct EigenvalueSearch {
  std::vector<cplx> roots;
  int dropped = 0;  // guesses that diverged or left the upper half plane
};

/// Newton search for zeros of a(lambda), one run per starting guess.
/// Converged roots closer than 10*tol to an earlier root are merged.
EigenvalueSearch find_eigenvalues(const DualPolSignal& s, std::span<const cplx> guesses,
                                  double tol = 1e-9, int max_iter = 50);

/// Reflection amplitudes at the given spectral point.
std::pair<cplx, cplx> compute_b(const DualPolSignal& s, cplx lambda);

}  // namespace nfdm
