#pragma once

#include <array>
#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

#include "nfdm/exec.hpp"
#include "nfdm/types.hpp"

namespace nfdm {

/// Self-synchronizing pattern generator for x^11 + x^9 + 1, period 2047.
class Prbs11 {
 public:
  explicit Prbs11(std::uint16_t state = 0x7FF);
  int next();
  std::vector<std::uint8_t> block(std::size_t n_bits);

 private:
  std::uint16_t state_;
};

/// Everything both ends agree on: symbol rate, the two signaling
/// eigenvalues, the quadrature constellations on the spectral amplitudes,
/// and the slot geometry. One slot spans 2 * slot_half_width dimensionless
/// time units, which fixes the time scale to 1 / (baud * slot width).
struct SignalingPlan {
  double baud = 1e9;
  std::array<cplx, 2> eigenvalues{cplx(0.0, 0.3), cplx(0.0, 0.6)};
  // Phase of the 00 point per eigenvalue; the remaining points sit a
  // quarter turn apart. The second constellation is the first rotated by
  // pi/4 so the composite symbol set stays maximally spaced.
  std::array<double, 2> base_phase{std::numbers::pi / 4.0, std::numbers::pi / 2.0};
  // Modulus of every spectral amplitude, per eigenvalue. Data lives in the
  // phases only; a modulus other than one displaces the pulse in time by
  // ln|b| / (2 Im lambda).
  std::array<double, 2> b_modulus{1.0, 1.0};
  double slot_half_width = 16.0;
  std::size_t samples_per_slot = 128;

  static constexpr int bits_per_symbol = 8;

  double t_scale_s() const { return 1.0 / (baud * 2.0 * slot_half_width); }
  TimeGrid slot_grid() const { return centered_grid(samples_per_slot, slot_half_width); }
};

void validate(const SignalingPlan& plan);

/// Gray order around the circle: 00, 01, 11, 10.
int gray_index(int first_bit, int second_bit);
std::array<std::uint8_t, 2> gray_bits(int index);

/// Phases of the four spectral amplitudes for one 8-bit symbol, coefficient
/// order (b1 at lambda1, b2 at lambda1, b1 at lambda2, b2 at lambda2); bits
/// are consumed two per coefficient, first bit high.
std::array<double, 4> symbol_phases(std::span<const std::uint8_t> bits,
                                    const SignalingPlan& plan);

/// One symbol's discrete spectrum with unit-modulus amplitudes.
DiscreteSpectrum map_bits(std::span<const std::uint8_t> bits, const SignalingPlan& plan);

/// Modulated burst: one synthesized slot per symbol, concatenated.
struct TxFrame {
  DualPolSignal signal;  // normalized units, n_symbols * samples_per_slot
  std::size_t n_symbols = 0;
  std::vector<std::uint8_t> bits;  // as consumed, n_symbols * 8
  std::vector<double> tx_phase;    // n_symbols * 4, coefficient order
};

TxFrame modulate(std::span<const std::uint8_t> bits, const SignalingPlan& plan,
                 Exec exec = Exec::openmp);

/// Scales both polarizations so the average power equals the target.
DualPolSignal rx_rescale(const DualPolSignal& s, double target_power);

/// Zero-phase rectangular filter: erases every spectral bin strictly above
/// the cutoff (in cycles per unit of the grid spacing). A cutoff at or
/// above Nyquist returns the input unchanged.
DualPolSignal lowpass(const DualPolSignal& s, double cutoff);

/// One-slot signal carrying the frame's slot-averaged power profile (as an
/// amplitude in the first polarization). The transmitter derives it from
/// its own clean frame and hands it to clock_recover as the reference.
DualPolSignal slot_power_template(const DualPolSignal& frame, const SignalingPlan& plan);

/// Slot alignment: circular cross-correlation of the folded received power
/// against the template profile, computed in the frequency domain; the
/// frame is shifted back by the argmax lag. The delay is identified modulo
/// one slot, so the true misalignment must stay under half a slot. shift
/// is the circular correction that was applied; ambiguous reports a rival
/// correlation peak within 1% of the best beyond the main lobe, in which
/// case the alignment is a coin toss.
struct ClockResult {
  DualPolSignal signal;
  long shift = 0;
  bool ambiguous = false;
};

ClockResult clock_recover(const DualPolSignal& frame, const DualPolSignal& tmpl);

/// Per-slot detection outcome. found[e] reports whether the search from
/// nominal eigenvalue e converged inside the acceptance radius; the
/// amplitudes of a lost eigenvalue are zero and must be treated as
/// erasures.
struct SlotDetection {
  std::array<std::uint8_t, 2> found{};
  std::array<cplx, 2> lambda{};
  std::array<cplx, 4> b{};  // coefficient order as in symbol_phases
};

std::vector<SlotDetection> detect_frame(const DualPolSignal& frame, const SignalingPlan& plan,
                                        double accept_radius = 0.15, Exec exec = Exec::openmp);

/// Blind carrier-phase recovery over one coefficient stream: n_test
/// candidate rotations over a quarter turn scored by windowed distance to
/// the constellation, the winner refined by parabolic interpolation of the
/// score (exact for a static offset) and unwrapped along the stream, and
/// the leftover quarter-turn ambiguity resolved against the pilot phases
/// at the head of the burst. Points flagged invalid are skipped and
/// returned as zero. At least 8 test phases and a window of at least 1.
struct BpsConfig {
  int n_test_phases = 32;
  int window = 16;  // one-sided, in symbols
  int n_pilots = 32;
};

struct BpsResult {
  std::vector<cplx> corrected;
  std::vector<double> offset;  // applied rotation per symbol
  int quadrant = 0;            // pilot-chosen quarter turns
};

BpsResult bps(std::span<const cplx> points, std::span<const std::uint8_t> valid,
              double base_phase, std::span<const double> pilot_phase,
              const BpsConfig& cfg = {});

/// Error accounting per coefficient stream, with erased coefficients
/// counted as two bit errors each and tallied separately.
struct BerReport {
  std::array<std::uint64_t, 4> bit_errors{};
  std::array<std::uint64_t, 4> bits_counted{};
  std::uint64_t erasures = 0;

  double ber(int stream) const;
  double ber_avg() const;
  std::uint64_t total_bits() const;
};

/// Full receiver back end for one detected frame: phase recovery per
/// stream, demapping, and error counting against the transmitted bits.
/// The first n_pilots symbols train the quadrant decision and are excluded
/// from the error tallies.
struct Demodulation {
  BerReport report;
  std::array<BpsResult, 4> streams;
};

Demodulation demodulate_frame(const std::vector<SlotDetection>& slots,
                              const SignalingPlan& plan, const TxFrame& reference,
                              const BpsConfig& cfg = {});

}  // namespace nfdm
