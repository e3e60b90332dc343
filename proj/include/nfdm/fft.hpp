#pragma once

#include <cstddef>
#include <vector>

#include "nfdm/types.hpp"

namespace nfdm {

/// In-place complex FFT backed by FFTW. Plans are cached per transform size
/// and shared; planning is serialized internally so callers may transform
/// concurrently from different threads.
void fft_inplace(std::vector<cplx>& data);

/// Unnormalized inverse transform followed by the 1/n scaling, so
/// ifft(fft(x)) == x up to rounding.
void ifft_inplace(std::vector<cplx>& data);

/// Angular frequency of FFT bin k for an n-point transform with sample
/// spacing dt (standard wrap-around ordering, negative half in the upper bins).
double fft_omega(std::size_t k, std::size_t n, double dt);

}  // namespace nfdm
