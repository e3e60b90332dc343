#pragma once

#include <cstddef>

namespace nfdm {

/// Execution policy for the data-parallel kernels. Serial is the reference
/// path; OpenMP distributes loop iterations over threads. Results are
/// required to be bitwise identical between the two (iterations are
/// independent and touch disjoint output ranges).
enum class Exec { serial, openmp };

/// Maps fn over [0, n). Exec::serial runs a plain loop; Exec::openmp a
/// parallel for. Inside an enclosing parallel region OpenMP falls back to
/// one thread, so nested use degrades to the serial path.
template <typename Fn>
void parallel_for(std::size_t n, Exec exec, Fn&& fn) {
  if (exec == Exec::openmp) {
#pragma omp parallel for schedule(dynamic, 8)
    for (long long i = 0; i < static_cast<long long>(n); ++i)
      fn(static_cast<std::size_t>(i));
  } else {
    for (std::size_t i = 0; i < n; ++i) fn(i);
  }
}

}  // namespace nfdm
