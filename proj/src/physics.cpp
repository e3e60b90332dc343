#include "nfdm/physics.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace nfdm {

double FiberLink::beta2() const {
  return dispersion_to_beta2(dispersion_ps_nm_km, center_wavelength_nm);
}

double FiberLink::alpha_per_m() const {
  return alpha_db_km * std::numbers::ln10 / 10.0 / 1000.0;
}

double FiberLink::span_gain_linear() const {
  return std::pow(10.0, span_loss_db() / 10.0);
}

void validate(const FiberLink& link) {
  if (!(link.dispersion_ps_nm_km > 0.0))
    throw std::invalid_argument("FiberLink: anomalous dispersion (D > 0) required");
  if (!(link.gamma_w_km > 0.0)) throw std::invalid_argument("FiberLink: gamma must be positive");
  if (link.alpha_db_km < 0.0) throw std::invalid_argument("FiberLink: alpha must be non-negative");
  if (!(link.span_km > 0.0)) throw std::invalid_argument("FiberLink: span length must be positive");
  if (link.n_spans < 0) throw std::invalid_argument("FiberLink: span count must be non-negative");
  if (!(link.center_wavelength_nm > 0.0))
    throw std::invalid_argument("FiberLink: wavelength must be positive");
}

double dispersion_to_beta2(double dispersion_ps_nm_km, double wavelength_nm) {
  if (!(dispersion_ps_nm_km > 0.0) || !(wavelength_nm > 0.0))
    throw std::invalid_argument("dispersion_to_beta2: inputs must be positive");
  const double d_si = dispersion_ps_nm_km * 1e-6;  // ps/(nm km) -> s/m^2
  const double lambda_m = wavelength_nm * 1e-9;
  return -d_si * lambda_m * lambda_m / (2.0 * std::numbers::pi * kSpeedOfLight);
}

double path_average_factor(double alpha_db_km, double span_km) {
  const double a = alpha_db_km * std::numbers::ln10 / 10.0 * span_km;  // power loss in nepers
  if (a == 0.0) return 1.0;
  return -std::expm1(-a) / a;
}

NormalizationMap make_normalization(const FiberLink& link, double t_scale_s,
                                    bool lossless_path_average) {
  validate(link);
  if (!(t_scale_s > 0.0)) throw std::invalid_argument("make_normalization: T0 must be positive");
  const double beta2 = link.beta2();
  if (beta2 == 0.0) throw std::invalid_argument("make_normalization: zero dispersion");

  const double eta = lossless_path_average ? path_average_factor(link.alpha_db_km, link.span_km) : 1.0;
  NormalizationMap map;
  map.t_scale_s = t_scale_s;
  map.beta2 = beta2;
  map.gamma_eff_w_m = (8.0 / 9.0) * link.gamma_w_km * 1e-3 * eta;
  map.length_scale_m = 2.0 * t_scale_s * t_scale_s / std::abs(beta2);
  map.power_scale_w = 2.0 / (map.gamma_eff_w_m * map.length_scale_m);
  return map;
}

namespace {

DualPolSignal rescale(const DualPolSignal& s, const NormalizationMap& map, Units from, Units to) {
  validate(s);
  if (s.units != from) throw std::invalid_argument("unit mismatch for normalization direction");
  const double amp = (to == Units::normalized) ? 1.0 / std::sqrt(map.power_scale_w)
                                               : std::sqrt(map.power_scale_w);
  const double ts = (to == Units::normalized) ? 1.0 / map.t_scale_s : map.t_scale_s;
  DualPolSignal out;
  out.grid = TimeGrid{s.grid.n_samples, s.grid.dt * ts, s.grid.t0 * ts};
  out.units = to;
  out.q1.resize(s.q1.size());
  out.q2.resize(s.q2.size());
  for (std::size_t i = 0; i < s.q1.size(); ++i) {
    out.q1[i] = s.q1[i] * amp;
    out.q2[i] = s.q2[i] * amp;
  }
  return out;
}

}  // namespace

DualPolSignal normalize(const DualPolSignal& s, const NormalizationMap& map) {
  return rescale(s, map, Units::physical, Units::normalized);
}

DualPolSignal denormalize(const DualPolSignal& s, const NormalizationMap& map) {
  return rescale(s, map, Units::normalized, Units::physical);
}

}  // namespace nfdm
