#pragma once

#include <array>
#include <cstdint>

#include "nfdm/exec.hpp"
#include "nfdm/physics.hpp"
#include "nfdm/types.hpp"

namespace nfdm {

/// 2x2 Jones matrix acting on the polarization pair.
using Jones = std::array<std::array<cplx, 2>, 2>;

/// Split-step propagation of the dimensionless system
///   dq/dz = i q_tt + 2 i (|q1|^2 + |q2|^2) q
/// over distance z with the symmetric scheme. Lossless, so the output
/// energy is checked against the input and a drift above 1% throws.
DualPolSignal propagate_normalized(const DualPolSignal& s, double z, int n_steps,
                                   Exec exec = Exec::openmp);

/// Split-step propagation in physical units over the given distance,
/// including attenuation and the 8/9 polarization-averaged nonlinearity.
/// No amplification happens inside; the energy budget against e^{-alpha L}
/// is checked to 1%.
DualPolSignal ssfm_manakov(const DualPolSignal& s, const FiberLink& link, double distance_m,
                           int n_steps, Exec exec = Exec::openmp);

/// Lumped amplifier: multiplies the field by sqrt(gain) and adds white
/// complex Gaussian noise of spectral density (F G - 1) h nu / 2 per
/// polarization over the simulation bandwidth (clamped at zero, so a
/// noiseless amplifier is expressible with noise_figure_db = -inf).
/// The realization is a pure function of the seed.
DualPolSignal edfa(const DualPolSignal& s, double gain_db, double noise_figure_db,
                   double wavelength_nm, std::uint64_t seed);

/// Adds white noise calibrated so the optical signal-to-noise ratio in the
/// reference bandwidth equals target_osnr_db, with both polarizations'
/// noise counted against the total signal power. Infinite target returns
/// the signal unchanged.
DualPolSignal noise_loading(const DualPolSignal& s, double target_osnr_db,
                            double ref_bandwidth_hz, std::uint64_t seed);

/// Full amplified line: n_spans repetitions of one span of fiber followed
/// by an amplifier that exactly compensates the span loss. Span k consumes
/// seed + k for its noise realization.
DualPolSignal transmit_link(const DualPolSignal& s, const FiberLink& link, int steps_per_span,
                            std::uint64_t seed, Exec exec = Exec::openmp);

/// Applies a unitary Jones matrix pointwise (and its inverse). A matrix
/// that is not unitary to 1e-10 is rejected.
DualPolSignal polarization_rotate(const DualPolSignal& s, const Jones& u);
DualPolSignal polarization_derotate(const DualPolSignal& s, const Jones& u);

/// Unitary from three angles: mixing angle theta and two differential
/// phases. Every 2x2 unitary is of this form up to a global phase.
Jones jones_from_angles(double theta, double phi1, double phi2);

}  // namespace nfdm
