#include <doctest.h>

#include <cmath>
#include <complex>

#include "nfdm/physics.hpp"
#include "nfdm/types.hpp"

using namespace nfdm;

TEST_CASE("dispersion parameter converts to the frozen beta2 value") {
  // -D lambda^2 / (2 pi c) at 17.5 ps/nm/km and 1550 nm, evaluated
  // independently: -2.232034e-26 s^2/m.
  const double b2 = dispersion_to_beta2(17.5, 1550.0);
  CHECK(b2 == doctest::Approx(-2.232034349116239e-26).epsilon(1e-9));
  CHECK(b2 < 0.0);

  // Non-positive inputs are rejected.
  CHECK_THROWS_AS((void)dispersion_to_beta2(0.0, 1550.0), std::invalid_argument);
  CHECK_THROWS_AS((void)dispersion_to_beta2(17.5, -1.0), std::invalid_argument);
}

TEST_CASE("path average factor matches closed form and limits") {
  // (1 - e^{-aL}) / (aL) with aL = 0.195 dB/km * 41.5 km in nepers.
  CHECK(path_average_factor(0.195, 41.5) == doctest::Approx(0.4534000237133309).epsilon(1e-12));
  CHECK(path_average_factor(0.195, 83.0) == doctest::Approx(0.2618723745448985).epsilon(1e-12));

  // Lossless limit is exactly one.
  CHECK(path_average_factor(0.0, 50.0) == 1.0);

  // Small-loss series 1 - x/2 + x^2/6 for x = aL. Attenuation of
  // 10/ln(10) dB/km is exactly 1 neper/km, so the span length is x.
  const double x = 1e-4;
  const double alpha_db = 10.0 / std::log(10.0);
  const double series = 1.0 - x / 2.0 + x * x / 6.0;
  CHECK(path_average_factor(alpha_db, x) == doctest::Approx(series).epsilon(1e-10));
}

TEST_CASE("span loss and gain follow from the attenuation setting") {
  FiberLink link;
  CHECK(link.span_loss_db() == doctest::Approx(8.0925).epsilon(1e-12));
  CHECK(link.span_gain_linear() == doctest::Approx(6.445401859014389).epsilon(1e-12));

  link.span_km = 83.0;
  CHECK(link.span_loss_db() == doctest::Approx(16.185).epsilon(1e-12));
  CHECK(link.span_gain_linear() == doctest::Approx(41.543205124186144).epsilon(1e-12));
}

TEST_CASE("normalization map carries the frozen scales") {
  FiberLink link;
  const double t0 = 31.25e-12;  // 1 ns slot over 32 normalized units
  const NormalizationMap map = make_normalization(link, t0);

  CHECK(map.t_scale_s == t0);
  CHECK(map.length_scale_m == doctest::Approx(87504.25372142364).epsilon(1e-9));
  CHECK(map.power_scale_w == doctest::Approx(0.04536927103131609).epsilon(1e-9));
  CHECK(41500.0 / map.length_scale_m == doctest::Approx(0.47426265850021837).epsilon(1e-9));

  link.span_km = 83.0;
  const NormalizationMap map83 = make_normalization(link, t0);
  CHECK(map83.power_scale_w == doctest::Approx(0.07855135005058893).epsilon(1e-9));
  CHECK(map83.length_scale_m == doctest::Approx(map.length_scale_m).epsilon(1e-12));
}

TEST_CASE("normalize and denormalize are mutual inverses") {
  FiberLink link;
  const NormalizationMap map = make_normalization(link, 31.25e-12);

  TimeGrid grid = centered_grid(64, 16.0);
  DualPolSignal s = zero_signal(grid, Units::normalized);
  for (std::size_t i = 0; i < grid.n_samples; ++i) {
    const double t = grid.t(i);
    s.q1[i] = cplx(std::exp(-t * t / 40.0), 0.12 * t);
    s.q2[i] = cplx(0.3 * std::sin(0.2 * t), -0.5 * std::exp(-std::abs(t) / 9.0));
  }

  const DualPolSignal phys = denormalize(s, map);
  CHECK(phys.units == Units::physical);
  CHECK(phys.grid.dt == doctest::Approx(grid.dt * 31.25e-12).epsilon(1e-15));

  const DualPolSignal back = normalize(phys, map);
  CHECK(back.units == Units::normalized);
  REQUIRE(back.grid.n_samples == grid.n_samples);
  CHECK(back.grid.dt == doctest::Approx(grid.dt).epsilon(1e-12));
  for (std::size_t i = 0; i < grid.n_samples; ++i) {
    CHECK(std::abs(back.q1[i] - s.q1[i]) <= 1e-12 * std::abs(s.q1[i]) + 1e-300);
    CHECK(std::abs(back.q2[i] - s.q2[i]) <= 1e-12 * std::abs(s.q2[i]) + 1e-300);
  }

  // Power rescaling is the square of the amplitude rescaling.
  CHECK(average_power(phys) ==
        doctest::Approx(average_power(s) * map.power_scale_w).epsilon(1e-12));
}

TEST_CASE("normalization rejects wrong-direction input") {
  FiberLink link;
  const NormalizationMap map = make_normalization(link, 31.25e-12);
  DualPolSignal s = zero_signal(centered_grid(8, 4.0), Units::physical);
  CHECK_THROWS_AS((void)denormalize(s, map), std::invalid_argument);
  s.units = Units::normalized;
  CHECK_THROWS_AS((void)normalize(s, map), std::invalid_argument);
}

TEST_CASE("grid and signal validation reject malformed input") {
  TimeGrid bad{16, -0.5, 0.0};
  CHECK_THROWS_AS(validate(bad), std::invalid_argument);
  CHECK_THROWS_AS(validate(TimeGrid{0, 0.1, 0.0}), std::invalid_argument);

  DualPolSignal s = zero_signal(centered_grid(16, 4.0), Units::normalized);
  s.q2[5] = cplx(std::nan(""), 0.0);
  CHECK_THROWS_AS(validate(s), std::invalid_argument);

  FiberLink link;
  link.gamma_w_km = -1.0;
  CHECK_THROWS_AS(validate(link), std::invalid_argument);
}

TEST_CASE("centered grid is symmetric with t = 0 on a sample") {
  const TimeGrid g = centered_grid(64, 16.0);
  CHECK(g.n_samples == 64);
  CHECK(g.t(32) == doctest::Approx(0.0));
  CHECK(g.t(0) == doctest::Approx(-16.0));
  CHECK(g.dt == doctest::Approx(0.5));
}

TEST_CASE("energy uses the trapezoid rule") {
  // Rectangle pulse of amplitude 2 over the whole window: interior samples
  // weight 1, edges 1/2, so 9 unit-spaced samples integrate to 4 * 8.
  TimeGrid g{9, 1.0, -4.0};
  DualPolSignal s = zero_signal(g, Units::normalized);
  for (auto& v : s.q1) v = 2.0;
  CHECK(energy(s) == doctest::Approx(32.0).epsilon(1e-12));

  // Splitting power across polarizations leaves the total unchanged.
  DualPolSignal split = zero_signal(g, Units::normalized);
  for (auto& v : split.q1) v = cplx(2.0, 0.0) / std::sqrt(2.0);
  for (auto& v : split.q2) v = cplx(0.0, 2.0) / std::sqrt(2.0);
  CHECK(energy(split) == doctest::Approx(energy(s)).epsilon(1e-12));
}
