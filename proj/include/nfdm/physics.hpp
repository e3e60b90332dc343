#pragma once

#include "nfdm/types.hpp"

namespace nfdm {

/// Physical description of one amplified fiber span type.
struct FiberLink {
  double dispersion_ps_nm_km = 17.5;  // D > 0 (anomalous)
  double gamma_w_km = 1.25;           // nonlinear coefficient, 1/(W km)
  double alpha_db_km = 0.195;         // attenuation
  double span_km = 41.5;
  int n_spans = 0;
  double noise_figure_db = 5.0;
  double center_wavelength_nm = 1550.0;

  double beta2() const;          // s^2/m, negative
  double alpha_per_m() const;    // field/power loss rate in 1/m (power)
  double span_loss_db() const { return alpha_db_km * span_km; }
  double span_gain_linear() const;
};

void validate(const FiberLink& link);

/// beta2 = -D lambda^2 / (2 pi c). D in ps/(nm km), wavelength in nm,
/// result in s^2/m. Rejects non-positive inputs.
double dispersion_to_beta2(double dispersion_ps_nm_km, double wavelength_nm);

/// Bidirectional scaling between physical fiber units and the dimensionless
/// Manakov axes: tau = T0 t, ell = L0 z, A_j = sqrt(P0) q_j.
struct NormalizationMap {
  double t_scale_s = 0.0;        // T0
  double power_scale_w = 0.0;    // P0 = 2 / (gamma_eff L0)
  double length_scale_m = 0.0;   // L0 = 2 T0^2 / |beta2|
  double beta2 = 0.0;            // s^2/m
  double gamma_eff_w_m = 0.0;    // (8/9) gamma, path-averaged when requested
};

/// Path-average factor (1 - e^{-aL}) / (aL) for one span; exactly 1 at a = 0.
double path_average_factor(double alpha_db_km, double span_km);

/// Builds the scaling map for a link. The 8/9 Manakov polarization average is
/// always applied; the per-span lossless path average only when requested.
NormalizationMap make_normalization(const FiberLink& link, double t_scale_s,
                                    bool lossless_path_average = true);

/// Physical -> normalized. Rejects a signal that is not in physical units.
DualPolSignal normalize(const DualPolSignal& s, const NormalizationMap& map);

/// Normalized -> physical. Inverse of normalize to machine precision.
DualPolSignal denormalize(const DualPolSignal& s, const NormalizationMap& map);

}  // namespace nfdm
