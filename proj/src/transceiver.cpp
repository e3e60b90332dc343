#include "nfdm/transceiver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "nfdm/darboux.hpp"
#include "nfdm/fft.hpp"
#include "nfdm/nft.hpp"

namespace nfdm {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kQuarterTurn = kPi / 2.0;

// Wraps to (-pi, pi].
double wrap_pi(double x) { return x - 2.0 * kPi * std::round(x / (2.0 * kPi)); }

// Wraps to [-pi/4, pi/4]: distance to the nearest constellation point of a
// quadrature set is insensitive to quarter-turn rotations.
double wrap_quarter(double x) { return x - kQuarterTurn * std::round(x / kQuarterTurn); }

}  // namespace

Prbs11::Prbs11(std::uint16_t state) : state_(static_cast<std::uint16_t>(state & 0x7FF)) {
  if (state_ == 0) throw std::invalid_argument("prbs seed must be nonzero");
}

int Prbs11::next() {
  const int out = (state_ >> 10) & 1;
  const int feedback = out ^ ((state_ >> 8) & 1);
  state_ = static_cast<std::uint16_t>(((state_ << 1) | feedback) & 0x7FF);
  return out;
}

std::vector<std::uint8_t> Prbs11::block(std::size_t n_bits) {
  std::vector<std::uint8_t> bits(n_bits);
  for (auto& b : bits) b = static_cast<std::uint8_t>(next());
  return bits;
}

void validate(const SignalingPlan& plan) {
  if (!(plan.baud > 0.0)) throw std::invalid_argument("baud must be positive");
  if (!(plan.slot_half_width > 0.0))
    throw std::invalid_argument("slot half width must be positive");
  if (plan.samples_per_slot < 8 || plan.samples_per_slot % 2 != 0)
    throw std::invalid_argument("samples per slot must be even and at least 8");
  for (const cplx& lam : plan.eigenvalues)
    if (!(lam.imag() > 0.0))
      throw std::invalid_argument("signaling eigenvalues must lie in the upper half plane");
  if (!(plan.eigenvalues[0].imag() < plan.eigenvalues[1].imag()))
    throw std::invalid_argument("eigenvalues must be ordered by increasing imaginary part");
  const double delta = plan.base_phase[1] - plan.base_phase[0];
  if (std::abs(std::abs(wrap_quarter(delta)) - kPi / 4.0) > 1e-9)
    throw std::invalid_argument("second constellation must be the first rotated by pi/4");
  for (double m : plan.b_modulus)
    if (!(m > 0.0) || !std::isfinite(m))
      throw std::invalid_argument("amplitude modulus must be positive and finite");
}

int gray_index(int first_bit, int second_bit) {
  if ((first_bit & ~1) != 0 || (second_bit & ~1) != 0)
    throw std::invalid_argument("bits must be 0 or 1");
  // 00, 01, 11, 10 around the circle: neighbours differ in a single bit.
  static constexpr int table[4] = {0, 1, 3, 2};
  return table[first_bit * 2 + second_bit];
}

std::array<std::uint8_t, 2> gray_bits(int index) {
  static constexpr std::array<std::array<std::uint8_t, 2>, 4> table{
      {{0, 0}, {0, 1}, {1, 1}, {1, 0}}};
  return table[static_cast<std::size_t>(((index % 4) + 4) % 4)];
}

std::array<double, 4> symbol_phases(std::span<const std::uint8_t> bits,
                                    const SignalingPlan& plan) {
  if (bits.size() != 8) throw std::invalid_argument("a symbol consumes exactly 8 bits");
  std::array<double, 4> phase{};
  for (int j = 0; j < 4; ++j) {
    const int idx = gray_index(bits[2 * j], bits[2 * j + 1]);
    phase[static_cast<std::size_t>(j)] =
        plan.base_phase[static_cast<std::size_t>(j / 2)] + kQuarterTurn * idx;
  }
  return phase;
}

DiscreteSpectrum map_bits(std::span<const std::uint8_t> bits, const SignalingPlan& plan) {
  const auto phase = symbol_phases(bits, plan);
  DiscreteSpectrum spectrum;
  for (std::size_t e = 0; e < 2; ++e)
    spectrum.entries.push_back({plan.eigenvalues[e],
                                std::polar(plan.b_modulus[e], phase[2 * e]),
                                std::polar(plan.b_modulus[e], phase[2 * e + 1])});
  return spectrum;
}

TxFrame modulate(std::span<const std::uint8_t> bits, const SignalingPlan& plan, Exec exec) {
  validate(plan);
  if (bits.empty() || bits.size() % 8 != 0)
    throw std::invalid_argument("bit count must be a positive multiple of 8");
  const std::size_t n_sym = bits.size() / 8;
  const TimeGrid slot = plan.slot_grid();
  const std::size_t stride = slot.n_samples;

  TxFrame frame;
  frame.n_symbols = n_sym;
  frame.bits.assign(bits.begin(), bits.end());
  frame.tx_phase.resize(4 * n_sym);
  frame.signal.grid = TimeGrid{n_sym * stride, slot.dt, slot.t0};
  frame.signal.units = Units::normalized;
  frame.signal.q1.assign(n_sym * stride, cplx(0.0));
  frame.signal.q2.assign(n_sym * stride, cplx(0.0));

  std::vector<std::string> errors(n_sym);
  parallel_for(n_sym, exec, [&](std::size_t k) {
    try {
      const auto sym = bits.subspan(8 * k, 8);
      const auto phases = symbol_phases(sym, plan);
      std::copy(phases.begin(), phases.end(), frame.tx_phase.begin() + 4 * k);
      const DualPolSignal pulse = synthesize(map_bits(sym, plan), slot);
      std::copy(pulse.q1.begin(), pulse.q1.end(), frame.signal.q1.begin() + k * stride);
      std::copy(pulse.q2.begin(), pulse.q2.end(), frame.signal.q2.begin() + k * stride);
    } catch (const std::exception& e) {
      errors[k] = e.what();
    }
  });
  for (std::size_t k = 0; k < n_sym; ++k)
    if (!errors[k].empty())
      throw std::runtime_error("slot " + std::to_string(k) + ": " + errors[k]);
  return frame;
}

DualPolSignal rx_rescale(const DualPolSignal& s, double target_power) {
  validate(s);
  if (!(target_power > 0.0)) throw std::invalid_argument("target power must be positive");
  const double current = average_power(s);
  if (!(current > 0.0)) throw std::invalid_argument("cannot rescale an all-zero signal");
  const double gain = std::sqrt(target_power / current);
  DualPolSignal out = s;
  for (auto& v : out.q1) v *= gain;
  for (auto& v : out.q2) v *= gain;
  return out;
}

DualPolSignal lowpass(const DualPolSignal& s, double cutoff) {
  validate(s);
  if (!(cutoff > 0.0)) throw std::invalid_argument("cutoff must be positive");
  if (cutoff >= 0.5 / s.grid.dt) return s;
  const std::size_t n = s.grid.n_samples;
  DualPolSignal out = s;
  for (auto* q : {&out.q1, &out.q2}) {
    fft_inplace(*q);
    for (std::size_t k = 0; k < n; ++k)
      if (std::abs(fft_omega(k, n, s.grid.dt)) > 2.0 * kPi * cutoff) (*q)[k] = cplx(0.0);
    ifft_inplace(*q);
  }
  return out;
}

DualPolSignal slot_power_template(const DualPolSignal& frame, const SignalingPlan& plan) {
  validate(frame);
  validate(plan);
  const std::size_t stride = plan.samples_per_slot;
  const std::size_t n = frame.grid.n_samples;
  if (n == 0 || n % stride != 0)
    throw std::invalid_argument("frame length must be a multiple of the slot length");
  DualPolSignal tmpl = zero_signal(plan.slot_grid(), frame.units);
  const double scale = static_cast<double>(stride) / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double p = std::norm(frame.q1[i]) + std::norm(frame.q2[i]);
    tmpl.q1[i % stride] += p * scale;
  }
  for (auto& v : tmpl.q1) v = std::sqrt(v.real());
  return tmpl;
}

ClockResult clock_recover(const DualPolSignal& frame, const DualPolSignal& tmpl) {
  validate(frame);
  validate(tmpl);
  const std::size_t stride = tmpl.grid.n_samples;
  const std::size_t n = frame.grid.n_samples;
  if (n == 0 || stride == 0 || n % stride != 0)
    throw std::invalid_argument("frame length must be a multiple of the template length");

  // Received power folded onto one slot period, template power profile.
  std::vector<cplx> folded(stride, cplx(0.0));
  for (std::size_t i = 0; i < n; ++i)
    folded[i % stride] += std::norm(frame.q1[i]) + std::norm(frame.q2[i]);
  std::vector<cplx> profile(stride);
  for (std::size_t j = 0; j < stride; ++j)
    profile[j] = std::norm(tmpl.q1[j]) + std::norm(tmpl.q2[j]);

  // Circular cross-correlation via the convolution theorem; a frame
  // delayed by d correlates best at lag d.
  fft_inplace(folded);
  fft_inplace(profile);
  for (std::size_t k = 0; k < stride; ++k) folded[k] *= std::conj(profile[k]);
  ifft_inplace(folded);

  std::size_t best = 0;
  for (std::size_t l = 1; l < stride; ++l)
    if (folded[l].real() > folded[best].real()) best = l;

  // A rival peak beyond the main lobe within 1% makes the alignment a guess.
  bool ambiguous = false;
  for (std::size_t l = 0; l < stride; ++l) {
    const std::size_t d = (l + stride - best) % stride;
    if (std::min(d, stride - d) > 2 && folded[l].real() >= 0.99 * folded[best].real())
      ambiguous = true;
  }

  long delay = static_cast<long>(best);
  if (delay > static_cast<long>(stride / 2)) delay -= static_cast<long>(stride);

  ClockResult out{frame, -delay, ambiguous};
  const std::size_t rot = static_cast<std::size_t>(
      ((delay % static_cast<long>(n)) + static_cast<long>(n)) % static_cast<long>(n));
  std::rotate(out.signal.q1.begin(), out.signal.q1.begin() + rot, out.signal.q1.end());
  std::rotate(out.signal.q2.begin(), out.signal.q2.begin() + rot, out.signal.q2.end());
  return out;
}

std::vector<SlotDetection> detect_frame(const DualPolSignal& frame, const SignalingPlan& plan,
                                        double accept_radius, Exec exec) {
  validate(frame);
  validate(plan);
  if (frame.units != Units::normalized)
    throw std::invalid_argument("detection expects normalized units");
  if (!(accept_radius > 0.0)) throw std::invalid_argument("acceptance radius must be positive");
  const std::size_t stride = plan.samples_per_slot;
  if (frame.grid.n_samples == 0 || frame.grid.n_samples % stride != 0)
    throw std::invalid_argument("frame length must be a multiple of the slot length");
  const std::size_t n_sym = frame.grid.n_samples / stride;
  const TimeGrid slot = plan.slot_grid();

  std::vector<SlotDetection> out(n_sym);
  std::vector<std::string> errors(n_sym);
  parallel_for(n_sym, exec, [&](std::size_t k) {
    try {
      DualPolSignal s{slot, Units::normalized, {}, {}};
      s.q1.assign(frame.q1.begin() + static_cast<long>(k * stride),
                  frame.q1.begin() + static_cast<long>((k + 1) * stride));
      s.q2.assign(frame.q2.begin() + static_cast<long>(k * stride),
                  frame.q2.begin() + static_cast<long>((k + 1) * stride));
      SlotDetection det;
      for (int e = 0; e < 2; ++e) {
        const cplx guess = plan.eigenvalues[static_cast<std::size_t>(e)];
        const auto search = find_eigenvalues(s, std::span<const cplx>(&guess, 1));
        if (search.roots.size() != 1 || std::abs(search.roots[0] - guess) > accept_radius)
          continue;
        det.found[static_cast<std::size_t>(e)] = 1;
        det.lambda[static_cast<std::size_t>(e)] = search.roots[0];
        const auto [b1, b2] = compute_b(s, search.roots[0]);
        det.b[static_cast<std::size_t>(2 * e)] = b1;
        det.b[static_cast<std::size_t>(2 * e + 1)] = b2;
      }
      out[k] = det;
    } catch (const std::exception& e) {
      errors[k] = e.what();
    }
  });
  for (std::size_t k = 0; k < n_sym; ++k)
    if (!errors[k].empty())
      throw std::runtime_error("slot " + std::to_string(k) + ": " + errors[k]);
  return out;
}

BpsResult bps(std::span<const cplx> points, std::span<const std::uint8_t> valid,
              double base_phase, std::span<const double> pilot_phase, const BpsConfig& cfg) {
  if (valid.size() != points.size())
    throw std::invalid_argument("points and validity flags must align");
  if (cfg.n_test_phases < 8 || cfg.window < 1 || cfg.n_pilots < 0)
    throw std::invalid_argument("bad phase-search configuration");

  const std::size_t n = points.size();
  BpsResult res;
  res.corrected.assign(n, cplx(0.0));
  res.offset.assign(n, 0.0);
  if (n == 0) return res;

  std::vector<double> arg_p(n, 0.0);
  for (std::size_t k = 0; k < n; ++k)
    if (valid[k]) arg_p[k] = std::arg(points[k]);

  // Prefix sums of the per-symbol scores, one row per candidate rotation;
  // invalid symbols contribute nothing to any window.
  const std::size_t nt = static_cast<std::size_t>(cfg.n_test_phases);
  std::vector<double> pref(nt * (n + 1), 0.0);
  for (std::size_t i = 0; i < nt; ++i) {
    const double theta = kQuarterTurn * static_cast<double>(i) / static_cast<double>(nt);
    double* row = pref.data() + i * (n + 1);
    for (std::size_t k = 0; k < n; ++k) {
      double e = 0.0;
      if (valid[k]) {
        const double d = wrap_quarter(arg_p[k] + theta - base_phase);
        e = d * d;
      }
      row[k + 1] = row[k] + e;
    }
  }
  std::vector<std::size_t> vcount(n + 1, 0);
  for (std::size_t k = 0; k < n; ++k) vcount[k + 1] = vcount[k] + (valid[k] ? 1u : 0u);

  // Windowed winner per symbol, unwrapped along the stream so the estimate
  // never jumps by a quarter turn between neighbours. Symbols whose window
  // holds no valid points carry the previous estimate.
  std::vector<double> unwrapped(n, 0.0);
  const std::size_t w = static_cast<std::size_t>(cfg.window);
  double prev = 0.0;
  bool have_prev = false;
  long first_scored = -1;
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t lo = k > w ? k - w : 0;
    const std::size_t hi = std::min(n, k + w + 1);
    if (vcount[hi] == vcount[lo]) {
      unwrapped[k] = prev;
      continue;
    }
    std::size_t best = 0;
    double best_e = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < nt; ++i) {
      const double e = pref[i * (n + 1) + hi] - pref[i * (n + 1) + lo];
      if (e < best_e) {
        best_e = e;
        best = i;
      }
    }
    // Parabolic refinement through the winning phase and its neighbours
    // (circular: the score is quarter-turn periodic). The score of a static
    // offset is exactly quadratic near its minimum, so the refined estimate
    // is exact there instead of quantized to the test grid.
    const double e_minus =
        pref[((best + nt - 1) % nt) * (n + 1) + hi] - pref[((best + nt - 1) % nt) * (n + 1) + lo];
    const double e_plus =
        pref[((best + 1) % nt) * (n + 1) + hi] - pref[((best + 1) % nt) * (n + 1) + lo];
    const double curvature = e_minus - 2.0 * best_e + e_plus;
    double frac = 0.0;
    // A zero score is already the global minimum of a nonnegative metric;
    // refining it would only chase rounding asymmetry in the neighbours.
    if (curvature > 0.0 && best_e > 0.0)
      frac = std::clamp(0.5 * (e_minus - e_plus) / curvature, -0.5, 0.5);
    double estimate =
        kQuarterTurn * (static_cast<double>(best) + frac) / static_cast<double>(nt);
    if (have_prev) estimate += kQuarterTurn * std::round((prev - estimate) / kQuarterTurn);
    unwrapped[k] = estimate;
    prev = estimate;
    if (!have_prev) first_scored = static_cast<long>(k);
    have_prev = true;
  }
  for (long k = 0; k < first_scored; ++k) unwrapped[static_cast<std::size_t>(k)] = unwrapped[static_cast<std::size_t>(first_scored)];

  // The constellation is blind to quarter turns; the pilot prefix votes on
  // the remaining fourfold ambiguity.
  const std::size_t np = std::min({pilot_phase.size(), static_cast<std::size_t>(cfg.n_pilots), n});
  int quadrant = 0;
  double q_err = std::numeric_limits<double>::infinity();
  for (int g = 0; g < 4; ++g) {
    double err = 0.0;
    for (std::size_t k = 0; k < np; ++k) {
      if (!valid[k]) continue;
      const double d = wrap_pi(arg_p[k] + unwrapped[k] + kQuarterTurn * g - pilot_phase[k]);
      err += d * d;
    }
    if (err < q_err) {
      q_err = err;
      quadrant = g;
    }
  }

  res.quadrant = quadrant;
  for (std::size_t k = 0; k < n; ++k) {
    const double rot = unwrapped[k] + kQuarterTurn * quadrant;
    res.offset[k] = rot;
    if (valid[k]) res.corrected[k] = points[k] * std::polar(1.0, rot);
  }
  return res;
}

double BerReport::ber(int stream) const {
  const auto j = static_cast<std::size_t>(stream);
  return bits_counted[j] == 0
             ? 0.0
             : static_cast<double>(bit_errors[j]) / static_cast<double>(bits_counted[j]);
}

double BerReport::ber_avg() const {
  std::uint64_t errs = 0;
  std::uint64_t bits = 0;
  for (std::size_t j = 0; j < 4; ++j) {
    errs += bit_errors[j];
    bits += bits_counted[j];
  }
  return bits == 0 ? 0.0 : static_cast<double>(errs) / static_cast<double>(bits);
}

std::uint64_t BerReport::total_bits() const {
  std::uint64_t bits = 0;
  for (std::size_t j = 0; j < 4; ++j) bits += bits_counted[j];
  return bits;
}

Demodulation demodulate_frame(const std::vector<SlotDetection>& slots,
                              const SignalingPlan& plan, const TxFrame& reference,
                              const BpsConfig& cfg) {
  validate(plan);
  const std::size_t n = slots.size();
  if (n != reference.n_symbols || reference.bits.size() != 8 * n ||
      reference.tx_phase.size() != 4 * n)
    throw std::invalid_argument("detection and transmit reference must cover the same symbols");
  if (cfg.n_pilots < 0 || static_cast<std::size_t>(cfg.n_pilots) >= n)
    throw std::invalid_argument("pilot prefix must leave data symbols");

  Demodulation demo;
  for (std::size_t j = 0; j < 4; ++j) {
    const std::size_t e = j / 2;
    std::vector<cplx> pts(n);
    std::vector<std::uint8_t> ok(n);
    for (std::size_t k = 0; k < n; ++k) {
      pts[k] = slots[k].b[j];
      ok[k] = slots[k].found[e];
    }
    std::vector<double> pilots(static_cast<std::size_t>(cfg.n_pilots));
    for (std::size_t k = 0; k < pilots.size(); ++k)
      pilots[k] = reference.tx_phase[4 * k + j];
    demo.streams[j] = bps(pts, ok, plan.base_phase[e], pilots, cfg);

    auto& rep = demo.report;
    for (std::size_t k = static_cast<std::size_t>(cfg.n_pilots); k < n; ++k) {
      rep.bits_counted[j] += 2;
      if (!ok[k]) {
        rep.erasures += 1;
        rep.bit_errors[j] += 2;
        continue;
      }
      const double phi = std::arg(demo.streams[j].corrected[k]);
      const long idx = std::lround((phi - plan.base_phase[e]) / kQuarterTurn);
      const auto rx = gray_bits(static_cast<int>(idx));
      rep.bit_errors[j] += static_cast<std::uint64_t>(rx[0] != reference.bits[8 * k + 2 * j]) +
                           static_cast<std::uint64_t>(rx[1] != reference.bits[8 * k + 2 * j + 1]);
    }
  }
  return demo;
}

}  // namespace nfdm
