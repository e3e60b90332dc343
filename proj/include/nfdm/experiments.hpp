#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "nfdm/channel.hpp"
#include "nfdm/exec.hpp"
#include "nfdm/physics.hpp"
#include "nfdm/transceiver.hpp"

namespace nfdm {

enum class RunMode { btb_osnr, distance_sweep, roundtrip_selftest };

/// How the amplified line is simulated in a distance sweep. lossy_spans is
/// the physical model: attenuating fiber followed by a gain-compensating
/// amplifier per span. path_averaged_lossless replaces each span by its
/// lossless path-averaged equivalent (integrable, so the transceiver model
/// is exact) while the amplifiers inject the ASE of the physical span gain
/// at unit gain.
enum class ChannelModel { lossy_spans, path_averaged_lossless };

/// Receiver-side knobs shared by every experiment. The filter cutoff is in
/// Hz on the physical waveform. The default is the smallest cutoff that
/// keeps the round-trip spectral phases of every 8-bit symbol within 1e-3
/// rad of the unfiltered detection (worst case 3.7e-4 rad at 18 GHz; the
/// error crosses 1e-3 between 16 and 17 GHz); anything wider only admits
/// more noise ahead of the power-based rescale.
struct RxChain {
  double lowpass_cutoff_hz = 18e9;
  double accept_radius = 0.15;
  BpsConfig bps{};
};

/// Bounds for the roundtrip_selftest property suites. The convergence
/// ratio band is fixed at [3, 5] (both kernels are second order).
struct SelftestTolerances {
  double roundtrip_lambda = 1e-6;
  double roundtrip_phase = 1e-3;
  double trace_energy = 1e-4;
  double propagation_lambda = 1e-4;
  double propagation_b = 1e-3;
};

/// One experiment: a sweep over OSNR points (btb_osnr, values in dB) or
/// over span counts (distance_sweep), or the deterministic property suites
/// (roundtrip_selftest). n_bits counts data bits per sweep point and is
/// rounded up to whole 8-bit symbols; pilot symbols ride on top of it.
struct ExperimentConfig {
  RunMode mode = RunMode::btb_osnr;
  SignalingPlan signaling{};
  FiberLink link{};
  ChannelModel channel_model = ChannelModel::lossy_spans;
  std::vector<double> sweep;
  std::uint64_t n_bits = 81880;  // 40 periods of the PRBS-11 sequence
  std::uint64_t seed = 1;
  // NaN launches at the natural power of the synthesized waveform; a value
  // rescales the launch (and detunes it from the nonlinear spectrum).
  double launch_power_dbm = std::numeric_limits<double>::quiet_NaN();
  std::string output_path = "results.csv";
  double ref_bandwidth_hz = 12.5e9;
  int steps_per_span = 200;
  RxChain rx{};
  SelftestTolerances selftest{};
};

/// Every failed invariant at once; empty means the config is runnable.
std::vector<std::string> check_config(const ExperimentConfig& cfg);

/// Throws std::invalid_argument listing all of check_config's complaints.
void validate(const ExperimentConfig& cfg);

/// Parses the versioned JSON schema (schema_version 1). Unknown keys are
/// rejected at every level and all complaints are reported in one error.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);

/// Canonical serialization: alphabetical keys, shortest round-trip
/// numbers, no output location. Its FNV-1a hash stamps every output row.
std::string canonical_config(const ExperimentConfig& cfg);
std::string config_hash(const ExperimentConfig& cfg);

std::uint64_t fnv1a64(std::string_view text);

/// Per-point noise seed: a splitmix64 stretch of the master seed, so sweep
/// points are statistically independent yet reproducible.
std::uint64_t mix_seed(std::uint64_t master, std::uint64_t index);

/// Worker count for the sweep loop: the request when positive, otherwise
/// the NFDM_WORKERS environment variable, otherwise all cores.
int resolve_workers(int requested);

struct ResultRow {
  double sweep_value = 0.0;
  std::uint64_t seed = 0;
  BerReport report{};
};

struct ResultTable {
  std::string value_column;  // "osnr_db" or "distance_km"
  std::string hash;
  std::vector<ResultRow> rows;  // one per sweep point, in sweep order
};

ResultTable run_btb(const ExperimentConfig& cfg, int workers = 0);
ResultTable run_distance_sweep(const ExperimentConfig& cfg, int workers = 0);

std::string to_csv(const ResultTable& table);

struct ConstellationRow {
  double sweep_value = 0.0;
  int coefficient = 0;  // stream index, order as in symbol_phases
  std::uint64_t symbol = 0;
  cplx value;
};

struct ConstellationTable {
  std::string value_column;
  std::string hash;
  std::vector<ConstellationRow> rows;
};

/// Phase-recovered, pre-decision points of every data symbol whose
/// eigenvalue was detected, for all sweep points of a btb or distance
/// config.
ConstellationTable dump_constellations(const ExperimentConfig& cfg, int workers = 0);

std::string to_csv(const ConstellationTable& table);

struct SelftestCheck {
  std::string name;
  double measured = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  bool pass = false;
};

struct SelftestReport {
  std::vector<SelftestCheck> checks;
  bool all_pass() const;
};

/// Deterministic property suites: spectral round trip, trace formula,
/// integrability under split-step propagation, and convergence order of
/// both kernels. The config seed plays no part in any of them.
SelftestReport run_selftest(const ExperimentConfig& cfg);

std::string to_text(const SelftestReport& report);

/// Writes text verbatim (UTF-8, LF endings), creating parent directories.
void write_file(const std::string& path, const std::string& text);

}  // namespace nfdm
