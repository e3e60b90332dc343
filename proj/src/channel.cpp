#include "nfdm/channel.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

#include "nfdm/fft.hpp"

namespace nfdm {

namespace {

// Platform-independent standard normal pair from one 64-bit generator
// draw each, so noise realizations are identical across library
// implementations.
std::pair<double, double> gaussian_pair(std::mt19937_64& rng) {
  const double u1 = (static_cast<double>(rng() >> 11) + 1.0) * 0x1.0p-53;  // (0, 1]
  const double u2 = static_cast<double>(rng() >> 11) * 0x1.0p-53;         // [0, 1)
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double w = 2.0 * std::numbers::pi * u2;
  return {r * std::cos(w), r * std::sin(w)};
}

// Adds circular complex Gaussian noise of the given per-sample variance
// (total over real and imaginary parts) to both polarizations. Serial on
// purpose: the draw order defines the realization.
void add_white_noise(DualPolSignal& s, double variance, std::uint64_t seed) {
  if (variance == 0.0) return;
  std::mt19937_64 rng(seed);
  const double sigma = std::sqrt(0.5 * variance);
  for (std::size_t i = 0; i < s.grid.n_samples; ++i) {
    const auto [g1, g2] = gaussian_pair(rng);
    const auto [g3, g4] = gaussian_pair(rng);
    s.q1[i] += cplx(sigma * g1, sigma * g2);
    s.q2[i] += cplx(sigma * g3, sigma * g4);
  }
}

// Symmetric split-step integrator for
//   dq/dz = i c2 q_tt + i c3 (|q1|^2 + |q2|^2) q - (loss/2) q,
// shared by the dimensionless and the physical frontends. The linear
// factor (dispersion and loss) acts in the frequency domain; the
// nonlinear phase rotation acts pointwise and carries the Exec policy.
void split_step(DualPolSignal& s, double c2, double c3, double loss, double length, int n_steps,
                Exec exec) {
  if (n_steps < 1) throw std::invalid_argument("split_step: need at least one step");
  if (!(length > 0.0)) throw std::invalid_argument("split_step: length must be positive");
  const std::size_t n = s.grid.n_samples;
  const double h = length / n_steps;

  std::vector<cplx> lin_half(n);
  std::vector<cplx> lin_full(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double w = fft_omega(k, n, s.grid.dt);
    const cplx rate = cplx(-0.5 * loss, -c2 * w * w);
    lin_half[k] = std::exp(rate * (0.5 * h));
    lin_full[k] = lin_half[k] * lin_half[k];
  }

  auto linear = [&](const std::vector<cplx>& factor) {
    fft_inplace(s.q1);
    fft_inplace(s.q2);
    for (std::size_t k = 0; k < n; ++k) {
      s.q1[k] *= factor[k];
      s.q2[k] *= factor[k];
    }
    ifft_inplace(s.q1);
    ifft_inplace(s.q2);
  };

  auto nonlinear = [&] {
    parallel_for(n, exec, [&](std::size_t i) {
      const double p = std::norm(s.q1[i]) + std::norm(s.q2[i]);
      const cplx phase = std::polar(1.0, c3 * p * h);
      s.q1[i] *= phase;
      s.q2[i] *= phase;
    });
  };

  linear(lin_half);
  for (int step = 0; step < n_steps; ++step) {
    nonlinear();
    linear(step + 1 == n_steps ? lin_half : lin_full);
  }
}

// The split scheme conserves energy exactly up to the loss factor; any
// larger drift means the step resolution cannot hold the field.
void check_energy_budget(double e_in, double e_out, double loss, double length) {
  const double expected = e_in * std::exp(-loss * length);
  if (expected == 0.0) return;
  const double drift = std::abs(e_out / expected - 1.0);
  if (!(drift < 0.01)) {
    throw std::runtime_error("split_step: energy drifted by " + std::to_string(drift * 100.0) +
                             "% over one run; increase the step count");
  }
}

void check_unitary(const Jones& u) {
  // Rows of a unitary matrix are orthonormal.
  const double r1 = std::norm(u[0][0]) + std::norm(u[0][1]);
  const double r2 = std::norm(u[1][0]) + std::norm(u[1][1]);
  const cplx cross = u[0][0] * std::conj(u[1][0]) + u[0][1] * std::conj(u[1][1]);
  if (std::abs(r1 - 1.0) > 1e-10 || std::abs(r2 - 1.0) > 1e-10 || std::abs(cross) > 1e-10) {
    throw std::invalid_argument("polarization_rotate: matrix is not unitary");
  }
}

}  // namespace

DualPolSignal propagate_normalized(const DualPolSignal& s, double z, int n_steps, Exec exec) {
  validate(s);
  if (s.units != Units::normalized)
    throw std::invalid_argument("propagate_normalized: signal must be in normalized units");
  DualPolSignal out = s;
  const double e_in = energy(out);
  split_step(out, 1.0, 2.0, 0.0, z, n_steps, exec);
  check_energy_budget(e_in, energy(out), 0.0, z);
  return out;
}

DualPolSignal ssfm_manakov(const DualPolSignal& s, const FiberLink& link, double distance_m,
                           int n_steps, Exec exec) {
  validate(s);
  validate(link);
  if (s.units != Units::physical)
    throw std::invalid_argument("ssfm_manakov: signal must be in physical units");
  DualPolSignal out = s;
  const double e_in = energy(out);
  const double c2 = -0.5 * link.beta2();  // positive in the anomalous regime
  const double c3 = (8.0 / 9.0) * link.gamma_w_km * 1e-3;
  const double loss = link.alpha_per_m();
  split_step(out, c2, c3, loss, distance_m, n_steps, exec);
  check_energy_budget(e_in, energy(out), loss, distance_m);
  return out;
}

DualPolSignal edfa(const DualPolSignal& s, double gain_db, double noise_figure_db,
                   double wavelength_nm, std::uint64_t seed) {
  validate(s);
  if (s.units != Units::physical)
    throw std::invalid_argument("edfa: signal must be in physical units");
  const double gain = std::pow(10.0, gain_db / 10.0);
  const double amp = std::sqrt(gain);

  DualPolSignal out = s;
  for (std::size_t i = 0; i < out.grid.n_samples; ++i) {
    out.q1[i] *= amp;
    out.q2[i] *= amp;
  }

  const double f_lin = std::pow(10.0, noise_figure_db / 10.0);
  const double h_nu = kPlanck * kSpeedOfLight / (wavelength_nm * 1e-9);
  const double psd = std::max(0.0, f_lin * gain - 1.0) * h_nu / 2.0;  // W/Hz per polarization
  const double bandwidth = 1.0 / out.grid.dt;
  add_white_noise(out, psd * bandwidth, seed);
  return out;
}

DualPolSignal noise_loading(const DualPolSignal& s, double target_osnr_db,
                            double ref_bandwidth_hz, std::uint64_t seed) {
  validate(s);
  if (s.units != Units::physical)
    throw std::invalid_argument("noise_loading: signal must be in physical units");
  if (!(ref_bandwidth_hz > 0.0))
    throw std::invalid_argument("noise_loading: reference bandwidth must be positive");
  DualPolSignal out = s;
  if (std::isinf(target_osnr_db) && target_osnr_db > 0.0) return out;

  const double p_sig = average_power(out);
  if (!(p_sig > 0.0)) throw std::invalid_argument("noise_loading: signal has no power");
  const double osnr = std::pow(10.0, target_osnr_db / 10.0);
  // Both polarizations carry noise, so the density per polarization is the
  // total noise power over twice the reference bandwidth.
  const double psd = p_sig / (2.0 * ref_bandwidth_hz * osnr);
  add_white_noise(out, psd / out.grid.dt, seed);
  return out;
}

DualPolSignal transmit_link(const DualPolSignal& s, const FiberLink& link, int steps_per_span,
                            std::uint64_t seed, Exec exec) {
  validate(link);
  if (link.n_spans < 1) throw std::invalid_argument("transmit_link: need at least one span");
  if (steps_per_span < 100)
    throw std::invalid_argument("transmit_link: fewer than 100 steps per span");
  DualPolSignal out = s;
  for (int span = 0; span < link.n_spans; ++span) {
    out = ssfm_manakov(out, link, link.span_km * 1e3, steps_per_span, exec);
    out = edfa(out, link.span_loss_db(), link.noise_figure_db, link.center_wavelength_nm,
               seed + static_cast<std::uint64_t>(span));
  }
  return out;
}

DualPolSignal polarization_rotate(const DualPolSignal& s, const Jones& u) {
  validate(s);
  check_unitary(u);
  DualPolSignal out = s;
  for (std::size_t i = 0; i < out.grid.n_samples; ++i) {
    const cplx a = s.q1[i];
    const cplx b = s.q2[i];
    out.q1[i] = u[0][0] * a + u[0][1] * b;
    out.q2[i] = u[1][0] * a + u[1][1] * b;
  }
  return out;
}

DualPolSignal polarization_derotate(const DualPolSignal& s, const Jones& u) {
  check_unitary(u);
  // The inverse of a unitary is its conjugate transpose.
  const Jones inv{{{std::conj(u[0][0]), std::conj(u[1][0])},
                   {std::conj(u[0][1]), std::conj(u[1][1])}}};
  return polarization_rotate(s, inv);
}

Jones jones_from_angles(double theta, double phi1, double phi2) {
  const double c = std::cos(theta);
  const double sn = std::sin(theta);
  return Jones{{{c * std::polar(1.0, phi1), sn * std::polar(1.0, phi2)},
                {-sn * std::polar(1.0, -phi2), c * std::polar(1.0, -phi1)}}};
}

}  // namespace nfdm
