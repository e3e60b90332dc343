#include "nfdm/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <numbers>
#include <stdexcept>

namespace nfdm {

namespace {

// Plans are created with FFTW_UNALIGNED so they can execute on any buffer of
// the right size via fftw_execute_dft. Creation is guarded; new-array
// execution of an existing plan is thread-safe.
class PlanCache {
 public:
  fftw_plan get(std::size_t n, int sign) {
    std::lock_guard<std::mutex> lock(mutex_);
    auto key = std::make_pair(n, sign);
    auto it = plans_.find(key);
    if (it != plans_.end()) return it->second;
    std::vector<cplx> scratch(n);
    auto* buf = reinterpret_cast<fftw_complex*>(scratch.data());
    fftw_plan plan = fftw_plan_dft_1d(static_cast<int>(n), buf, buf, sign,
                                      FFTW_ESTIMATE | FFTW_UNALIGNED);
    if (!plan) throw std::runtime_error("fftw_plan_dft_1d failed");
    plans_.emplace(key, plan);
    return plan;
  }

 private:
  std::mutex mutex_;
  std::map<std::pair<std::size_t, int>, fftw_plan> plans_;
};

PlanCache& cache() {
  static PlanCache c;
  return c;
}

void run(std::vector<cplx>& data, int sign) {
  if (data.empty()) throw std::invalid_argument("fft: empty buffer");
  fftw_plan plan = cache().get(data.size(), sign);
  auto* buf = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(plan, buf, buf);
}

}  // namespace

void fft_inplace(std::vector<cplx>& data) { run(data, FFTW_FORWARD); }

void ifft_inplace(std::vector<cplx>& data) {
  run(data, FFTW_BACKWARD);
  const double inv = 1.0 / static_cast<double>(data.size());
  for (auto& v : data) v *= inv;
}

double fft_omega(std::size_t k, std::size_t n, double dt) {
  const auto kk = static_cast<long long>(k);
  const auto nn = static_cast<long long>(n);
  const long long folded = (kk <= nn / 2) ? kk : kk - nn;
  return 2.0 * std::numbers::pi * static_cast<double>(folded) /
         (dt * static_cast<double>(n));
}

}  // namespace nfdm
