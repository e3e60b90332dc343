#include "nfdm/experiments.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <omp.h>
#include <span>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "nfdm/darboux.hpp"
#include "nfdm/nft.hpp"

namespace nfdm {

namespace {

using json = nlohmann::json;

constexpr double kInf = std::numeric_limits<double>::infinity();

constexpr std::array<std::pair<RunMode, std::string_view>, 3> kModeNames{{
    {RunMode::btb_osnr, "btb_osnr"},
    {RunMode::distance_sweep, "distance_sweep"},
    {RunMode::roundtrip_selftest, "roundtrip_selftest"},
}};

constexpr std::array<std::pair<ChannelModel, std::string_view>, 2> kChannelNames{{
    {ChannelModel::lossy_spans, "lossy_spans"},
    {ChannelModel::path_averaged_lossless, "path_averaged_lossless"},
}};

template <typename Table>
std::string_view enum_name(const Table& table, decltype(table[0].first) value) {
  for (const auto& [v, name] : table)
    if (v == value) return name;
  return "?";
}

// Shortest representation that parses back to the same double; integers
// come out bare ("166", "207.5", "0").
std::string format_double(double v) {
  std::array<char, 32> buf;
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

std::string join_errors(const std::string& head, const std::vector<std::string>& errors) {
  std::string out = head;
  for (const auto& e : errors) {
    out += "\n  - ";
    out += e;
  }
  return out;
}

double wrap_pi(double x) {
  x = std::remainder(x, 2.0 * std::numbers::pi);
  return x;
}

// Collects complaints while pulling typed fields out of a JSON object, so
// a config with several problems reports all of them in one round.
struct Parse {
  std::vector<std::string> errors;

  const json* field(const json& obj, const char* key) {
    const auto it = obj.find(key);
    return it == obj.end() ? nullptr : &*it;
  }

  void unknown_keys(const json& obj, const std::string& scope,
                    std::initializer_list<std::string_view> allowed) {
    for (const auto& item : obj.items()) {
      if (std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end())
        errors.push_back(scope + ": unknown key \"" + item.key() + "\"");
    }
  }

  void number(const json& obj, const std::string& scope, const char* key, double& out) {
    if (const json* v = field(obj, key)) {
      if (v->is_number())
        out = v->get<double>();
      else
        errors.push_back(scope + "." + key + ": expected a number");
    }
  }

  void integer(const json& obj, const std::string& scope, const char* key, int& out) {
    if (const json* v = field(obj, key)) {
      if (v->is_number_integer())
        out = v->get<int>();
      else
        errors.push_back(scope + "." + key + ": expected an integer");
    }
  }

  void unsigned64(const json& obj, const std::string& scope, const char* key,
                  std::uint64_t& out) {
    if (const json* v = field(obj, key)) {
      if (v->is_number_unsigned() ||
          (v->is_number_integer() && v->get<std::int64_t>() >= 0))
        out = v->get<std::uint64_t>();
      else
        errors.push_back(scope + "." + key + ": expected a non-negative integer");
    }
  }

  void text(const json& obj, const std::string& scope, const char* key, std::string& out) {
    if (const json* v = field(obj, key)) {
      if (v->is_string())
        out = v->get<std::string>();
      else
        errors.push_back(scope + "." + key + ": expected a string");
    }
  }

  template <std::size_t N>
  void fixed_numbers(const json& obj, const std::string& scope, const char* key,
                     std::array<double, N>& out) {
    if (const json* v = field(obj, key)) {
      if (!v->is_array() || v->size() != N) {
        errors.push_back(scope + "." + key + ": expected an array of " + std::to_string(N) +
                         " numbers");
        return;
      }
      for (std::size_t i = 0; i < N; ++i) {
        if ((*v)[i].is_number())
          out[i] = (*v)[i].get<double>();
        else
          errors.push_back(scope + "." + key + "[" + std::to_string(i) + "]: expected a number");
      }
    }
  }
};

void parse_signaling(Parse& p, const json& obj, SignalingPlan& plan) {
  p.unknown_keys(obj, "signaling",
                 {"baud_hz", "eigenvalues", "base_phase_rad", "b_modulus", "slot_half_width",
                  "samples_per_slot"});
  p.number(obj, "signaling", "baud_hz", plan.baud);
  if (const json* v = p.field(obj, "eigenvalues")) {
    bool shaped = v->is_array() && v->size() == 2;
    if (shaped)
      for (const auto& e : *v)
        shaped = shaped && e.is_array() && e.size() == 2 && e[0].is_number() && e[1].is_number();
    if (shaped)
      for (std::size_t i = 0; i < 2; ++i)
        plan.eigenvalues[i] = cplx((*v)[i][0].get<double>(), (*v)[i][1].get<double>());
    else
      p.errors.push_back("signaling.eigenvalues: expected [[re, im], [re, im]]");
  }
  p.fixed_numbers(obj, "signaling", "base_phase_rad", plan.base_phase);
  p.fixed_numbers(obj, "signaling", "b_modulus", plan.b_modulus);
  p.number(obj, "signaling", "slot_half_width", plan.slot_half_width);
  std::uint64_t samples = plan.samples_per_slot;
  p.unsigned64(obj, "signaling", "samples_per_slot", samples);
  plan.samples_per_slot = static_cast<std::size_t>(samples);
}

void parse_link(Parse& p, const json& obj, FiberLink& link) {
  p.unknown_keys(obj, "link",
                 {"dispersion_ps_nm_km", "gamma_w_km", "alpha_db_km", "span_km",
                  "noise_figure_db", "center_wavelength_nm"});
  p.number(obj, "link", "dispersion_ps_nm_km", link.dispersion_ps_nm_km);
  p.number(obj, "link", "gamma_w_km", link.gamma_w_km);
  p.number(obj, "link", "alpha_db_km", link.alpha_db_km);
  p.number(obj, "link", "span_km", link.span_km);
  p.number(obj, "link", "noise_figure_db", link.noise_figure_db);
  p.number(obj, "link", "center_wavelength_nm", link.center_wavelength_nm);
}

void parse_rx(Parse& p, const json& obj, RxChain& rx) {
  p.unknown_keys(obj, "rx",
                 {"lowpass_cutoff_hz", "accept_radius", "n_test_phases", "bps_window",
                  "n_pilots"});
  p.number(obj, "rx", "lowpass_cutoff_hz", rx.lowpass_cutoff_hz);
  p.number(obj, "rx", "accept_radius", rx.accept_radius);
  p.integer(obj, "rx", "n_test_phases", rx.bps.n_test_phases);
  p.integer(obj, "rx", "bps_window", rx.bps.window);
  p.integer(obj, "rx", "n_pilots", rx.bps.n_pilots);
}

void parse_selftest(Parse& p, const json& obj, SelftestTolerances& tol) {
  p.unknown_keys(obj, "selftest",
                 {"roundtrip_lambda_tol", "roundtrip_phase_tol", "trace_energy_tol",
                  "propagation_lambda_tol", "propagation_b_tol"});
  p.number(obj, "selftest", "roundtrip_lambda_tol", tol.roundtrip_lambda);
  p.number(obj, "selftest", "roundtrip_phase_tol", tol.roundtrip_phase);
  p.number(obj, "selftest", "trace_energy_tol", tol.trace_energy);
  p.number(obj, "selftest", "propagation_lambda_tol", tol.propagation_lambda);
  p.number(obj, "selftest", "propagation_b_tol", tol.propagation_b);
}

}  // namespace

std::vector<std::string> check_config(const ExperimentConfig& cfg) {
  std::vector<std::string> out;
  if (cfg.n_bits < 8)
    out.push_back("n_bits: at least 8 required (got " + std::to_string(cfg.n_bits) + ")");
  if (cfg.sweep.empty()) out.push_back("sweep: at least one point required");
  for (std::size_t i = 0; i < cfg.sweep.size(); ++i) {
    const double v = cfg.sweep[i];
    if (cfg.mode == RunMode::distance_sweep) {
      if (!(v >= 0.0) || v != std::floor(v) || v > 1e6)
        out.push_back("sweep[" + std::to_string(i) +
                      "]: span count must be a non-negative integer");
    } else if (std::isnan(v) || v == -kInf) {
      out.push_back("sweep[" + std::to_string(i) + "]: OSNR point must not be NaN or -inf");
    }
  }
  if (!(cfg.ref_bandwidth_hz > 0.0) || !std::isfinite(cfg.ref_bandwidth_hz))
    out.push_back("ref_bandwidth_hz: must be positive and finite");
  if (cfg.steps_per_span < 100) out.push_back("steps_per_span: at least 100 required");
  if (!std::isnan(cfg.launch_power_dbm) && !std::isfinite(cfg.launch_power_dbm))
    out.push_back("launch_power_dbm: must be finite (or omitted for the natural power)");
  if (!(cfg.rx.lowpass_cutoff_hz > 0.0) || !std::isfinite(cfg.rx.lowpass_cutoff_hz))
    out.push_back("rx.lowpass_cutoff_hz: must be positive and finite");
  if (!(cfg.rx.accept_radius > 0.0) || !std::isfinite(cfg.rx.accept_radius))
    out.push_back("rx.accept_radius: must be positive and finite");
  if (cfg.rx.bps.n_test_phases < 8) out.push_back("rx.n_test_phases: at least 8 required");
  if (cfg.rx.bps.window < 1) out.push_back("rx.bps_window: at least 1 required");
  if (cfg.rx.bps.n_pilots < 1) out.push_back("rx.n_pilots: at least 1 required");
  const auto tol_check = [&](const char* name, double v) {
    if (!(v > 0.0) || !std::isfinite(v))
      out.push_back(std::string("selftest.") + name + ": must be positive and finite");
  };
  tol_check("roundtrip_lambda_tol", cfg.selftest.roundtrip_lambda);
  tol_check("roundtrip_phase_tol", cfg.selftest.roundtrip_phase);
  tol_check("trace_energy_tol", cfg.selftest.trace_energy);
  tol_check("propagation_lambda_tol", cfg.selftest.propagation_lambda);
  tol_check("propagation_b_tol", cfg.selftest.propagation_b);
  if (cfg.mode != RunMode::roundtrip_selftest && cfg.output_path.empty())
    out.push_back("output_path: required for sweep modes");
  try {
    validate(cfg.signaling);
  } catch (const std::exception& e) {
    out.push_back(std::string("signaling: ") + e.what());
  }
  try {
    validate(cfg.link);
  } catch (const std::exception& e) {
    out.push_back(std::string("link: ") + e.what());
  }
  return out;
}

void validate(const ExperimentConfig& cfg) {
  const auto errors = check_config(cfg);
  if (!errors.empty()) throw std::invalid_argument(join_errors("invalid config:", errors));
}

ExperimentConfig parse_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config is not valid JSON: ") + e.what());
  }
  if (!root.is_object()) throw std::invalid_argument("config: top level must be a JSON object");

  Parse p;
  ExperimentConfig cfg;
  p.unknown_keys(root, "config",
                 {"schema_version", "mode", "channel_model", "signaling", "link", "sweep",
                  "n_bits", "seed", "launch_power_dbm", "output_path", "ref_bandwidth_hz",
                  "steps_per_span", "rx", "selftest"});

  if (const json* v = p.field(root, "schema_version")) {
    if (!v->is_number_integer() || v->get<std::int64_t>() != 1)
      p.errors.push_back("schema_version: this build reads version 1");
  } else {
    p.errors.push_back("schema_version: missing (expected 1)");
  }

  if (const json* v = p.field(root, "mode")) {
    bool known = false;
    if (v->is_string())
      for (const auto& [mode, name] : kModeNames)
        if (v->get<std::string>() == name) {
          cfg.mode = mode;
          known = true;
        }
    if (!known)
      p.errors.push_back("mode: expected one of btb_osnr, distance_sweep, roundtrip_selftest");
  } else {
    p.errors.push_back("mode: missing");
  }

  if (const json* v = p.field(root, "channel_model")) {
    bool known = false;
    if (v->is_string())
      for (const auto& [model, name] : kChannelNames)
        if (v->get<std::string>() == name) {
          cfg.channel_model = model;
          known = true;
        }
    if (!known)
      p.errors.push_back("channel_model: expected lossy_spans or path_averaged_lossless");
  }

  if (const json* v = p.field(root, "sweep")) {
    if (v->is_array()) {
      cfg.sweep.clear();
      for (std::size_t i = 0; i < v->size(); ++i) {
        if ((*v)[i].is_number())
          cfg.sweep.push_back((*v)[i].get<double>());
        else
          p.errors.push_back("sweep[" + std::to_string(i) + "]: expected a number");
      }
    } else {
      p.errors.push_back("sweep: expected an array of numbers");
    }
  }

  p.unsigned64(root, "config", "n_bits", cfg.n_bits);
  p.unsigned64(root, "config", "seed", cfg.seed);
  if (const json* v = p.field(root, "launch_power_dbm")) {
    if (v->is_null())
      cfg.launch_power_dbm = std::numeric_limits<double>::quiet_NaN();
    else if (v->is_number())
      cfg.launch_power_dbm = v->get<double>();
    else
      p.errors.push_back("launch_power_dbm: expected a number or null");
  }
  p.text(root, "config", "output_path", cfg.output_path);
  p.number(root, "config", "ref_bandwidth_hz", cfg.ref_bandwidth_hz);
  p.integer(root, "config", "steps_per_span", cfg.steps_per_span);

  if (const json* v = p.field(root, "signaling")) {
    if (v->is_object())
      parse_signaling(p, *v, cfg.signaling);
    else
      p.errors.push_back("signaling: expected an object");
  }
  if (const json* v = p.field(root, "link")) {
    if (v->is_object())
      parse_link(p, *v, cfg.link);
    else
      p.errors.push_back("link: expected an object");
  }
  if (const json* v = p.field(root, "rx")) {
    if (v->is_object())
      parse_rx(p, *v, cfg.rx);
    else
      p.errors.push_back("rx: expected an object");
  }
  if (const json* v = p.field(root, "selftest")) {
    if (v->is_object())
      parse_selftest(p, *v, cfg.selftest);
    else
      p.errors.push_back("selftest: expected an object");
  }

  if (!p.errors.empty()) throw std::invalid_argument(join_errors("invalid config:", p.errors));
  validate(cfg);
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string canonical_config(const ExperimentConfig& cfg) {
  json j;
  j["schema_version"] = 1;
  j["mode"] = enum_name(kModeNames, cfg.mode);
  j["channel_model"] = enum_name(kChannelNames, cfg.channel_model);
  j["sweep"] = cfg.sweep;
  j["n_bits"] = cfg.n_bits;
  j["seed"] = cfg.seed;
  if (std::isnan(cfg.launch_power_dbm))
    j["launch_power_dbm"] = nullptr;
  else
    j["launch_power_dbm"] = cfg.launch_power_dbm;
  j["ref_bandwidth_hz"] = cfg.ref_bandwidth_hz;
  j["steps_per_span"] = cfg.steps_per_span;
  j["signaling"]["baud_hz"] = cfg.signaling.baud;
  j["signaling"]["eigenvalues"] = {
      {cfg.signaling.eigenvalues[0].real(), cfg.signaling.eigenvalues[0].imag()},
      {cfg.signaling.eigenvalues[1].real(), cfg.signaling.eigenvalues[1].imag()}};
  j["signaling"]["base_phase_rad"] = cfg.signaling.base_phase;
  j["signaling"]["b_modulus"] = cfg.signaling.b_modulus;
  j["signaling"]["slot_half_width"] = cfg.signaling.slot_half_width;
  j["signaling"]["samples_per_slot"] = cfg.signaling.samples_per_slot;
  j["link"]["dispersion_ps_nm_km"] = cfg.link.dispersion_ps_nm_km;
  j["link"]["gamma_w_km"] = cfg.link.gamma_w_km;
  j["link"]["alpha_db_km"] = cfg.link.alpha_db_km;
  j["link"]["span_km"] = cfg.link.span_km;
  j["link"]["noise_figure_db"] = cfg.link.noise_figure_db;
  j["link"]["center_wavelength_nm"] = cfg.link.center_wavelength_nm;
  j["rx"]["lowpass_cutoff_hz"] = cfg.rx.lowpass_cutoff_hz;
  j["rx"]["accept_radius"] = cfg.rx.accept_radius;
  j["rx"]["n_test_phases"] = cfg.rx.bps.n_test_phases;
  j["rx"]["bps_window"] = cfg.rx.bps.window;
  j["rx"]["n_pilots"] = cfg.rx.bps.n_pilots;
  j["selftest"]["roundtrip_lambda_tol"] = cfg.selftest.roundtrip_lambda;
  j["selftest"]["roundtrip_phase_tol"] = cfg.selftest.roundtrip_phase;
  j["selftest"]["trace_energy_tol"] = cfg.selftest.trace_energy;
  j["selftest"]["propagation_lambda_tol"] = cfg.selftest.propagation_lambda;
  j["selftest"]["propagation_b_tol"] = cfg.selftest.propagation_b;
  return j.dump();
}

std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string config_hash(const ExperimentConfig& cfg) {
  const std::uint64_t h = fnv1a64(canonical_config(cfg));
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::uint64_t mix_seed(std::uint64_t master, std::uint64_t index) {
  std::uint64_t z = master + (index + 1) * 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

int resolve_workers(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("NFDM_WORKERS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0 && v <= 1 << 20) return static_cast<int>(v);
  }
  return omp_get_max_threads();
}

namespace {

// Everything the receiver needs that does not depend on the sweep point:
// the clean frame, its physical-units launch copy, the unit map, and the
// clock template derived from the transmitter's own slot power profile.
struct TxContext {
  TxFrame frame;
  NormalizationMap map;
  DualPolSignal physical;
  DualPolSignal tmpl;
  double target_power = 0.0;
};

TxContext make_tx(const ExperimentConfig& cfg, Exec exec) {
  const std::uint64_t data_symbols = (cfg.n_bits + 7) / 8;
  const std::size_t n_symbols =
      static_cast<std::size_t>(data_symbols) + static_cast<std::size_t>(cfg.rx.bps.n_pilots);
  Prbs11 prbs;
  const auto bits = prbs.block(n_symbols * SignalingPlan::bits_per_symbol);

  TxContext ctx;
  ctx.frame = modulate(bits, cfg.signaling, exec);
  ctx.map = make_normalization(cfg.link, cfg.signaling.t_scale_s(), true);
  ctx.physical = denormalize(ctx.frame.signal, ctx.map);
  if (!std::isnan(cfg.launch_power_dbm)) {
    const double watts = std::pow(10.0, (cfg.launch_power_dbm - 30.0) / 10.0);
    ctx.physical = rx_rescale(ctx.physical, watts);
  }
  ctx.target_power = average_power(ctx.physical);
  ctx.tmpl = slot_power_template(ctx.frame.signal, cfg.signaling);
  return ctx;
}

DualPolSignal apply_channel(const DualPolSignal& launch, const ExperimentConfig& cfg,
                            double point, std::uint64_t seed, Exec exec) {
  if (cfg.mode == RunMode::btb_osnr)
    return noise_loading(launch, point, cfg.ref_bandwidth_hz, seed);

  const int n_spans = static_cast<int>(std::llround(point));
  if (n_spans == 0) return launch;
  if (cfg.channel_model == ChannelModel::lossy_spans) {
    FiberLink link = cfg.link;
    link.n_spans = n_spans;
    return transmit_link(launch, link, cfg.steps_per_span, seed, exec);
  }
  // Integrable stand-in: zero-loss fiber at the path-averaged nonlinearity;
  // each amplifier contributes the ASE of the physical span gain at unit
  // gain (the noise figure absorbs the span loss).
  FiberLink flat = cfg.link;
  flat.gamma_w_km *= path_average_factor(cfg.link.alpha_db_km, cfg.link.span_km);
  flat.alpha_db_km = 0.0;
  DualPolSignal out = launch;
  for (int span = 0; span < n_spans; ++span) {
    out = ssfm_manakov(out, flat, flat.span_km * 1e3, cfg.steps_per_span, exec);
    out = edfa(out, 0.0, cfg.link.noise_figure_db + cfg.link.span_loss_db(),
               cfg.link.center_wavelength_nm, seed + static_cast<std::uint64_t>(span));
  }
  return out;
}

struct RxOutcome {
  std::vector<SlotDetection> slots;
  Demodulation demo;
};

// Filter first: the power-based rescale would otherwise absorb the full
// simulation-bandwidth noise and shrink the signal out of the eigenvalue
// acceptance radius at low OSNR.
RxOutcome receive(const DualPolSignal& channel_out, const TxContext& ctx,
                  const ExperimentConfig& cfg, Exec exec) {
  DualPolSignal s = lowpass(channel_out, cfg.rx.lowpass_cutoff_hz);
  s = rx_rescale(s, ctx.target_power);
  s = normalize(s, ctx.map);
  const ClockResult clocked = clock_recover(s, ctx.tmpl);
  RxOutcome out;
  out.slots = detect_frame(clocked.signal, cfg.signaling, cfg.rx.accept_radius, exec);
  out.demo = demodulate_frame(out.slots, cfg.signaling, ctx.frame, cfg.rx.bps);
  return out;
}

double sweep_value(const ExperimentConfig& cfg, std::size_t i) {
  if (cfg.mode == RunMode::btb_osnr) return cfg.sweep[i];
  return static_cast<double>(std::llround(cfg.sweep[i])) * cfg.link.span_km;
}

// Runs fn over the sweep points, concurrently when more than one worker is
// available. Outputs are indexed by point, so completion order never
// reorders rows; a failure carries its point index out.
template <typename Fn>
void for_each_point(std::size_t n_points, int workers, Fn&& fn) {
  std::vector<std::string> errors(n_points);
  auto guarded = [&](std::size_t i) {
    try {
      fn(i);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  };
  const long long team = std::min<long long>(workers, static_cast<long long>(n_points));
  if (team <= 1) {
    for (std::size_t i = 0; i < n_points; ++i) guarded(i);
  } else {
#pragma omp parallel for schedule(dynamic, 1) num_threads(static_cast<int>(team))
    for (long long i = 0; i < static_cast<long long>(n_points); ++i)
      guarded(static_cast<std::size_t>(i));
  }
  for (std::size_t i = 0; i < n_points; ++i)
    if (!errors[i].empty())
      throw std::runtime_error("sweep point " + std::to_string(i) + ": " + errors[i]);
}

ResultTable run_table(const ExperimentConfig& cfg, int workers) {
  validate(cfg);
  ResultTable table;
  table.value_column = cfg.mode == RunMode::btb_osnr ? "osnr_db" : "distance_km";
  table.hash = config_hash(cfg);
  table.rows.resize(cfg.sweep.size());
  const TxContext ctx = make_tx(cfg, Exec::openmp);
  for_each_point(cfg.sweep.size(), resolve_workers(workers), [&](std::size_t i) {
    const std::uint64_t seed = mix_seed(cfg.seed, i);
    const DualPolSignal rx = apply_channel(ctx.physical, cfg, cfg.sweep[i], seed, Exec::openmp);
    const RxOutcome out = receive(rx, ctx, cfg, Exec::openmp);
    table.rows[i] = ResultRow{sweep_value(cfg, i), seed, out.demo.report};
  });
  return table;
}

}  // namespace

ResultTable run_btb(const ExperimentConfig& cfg, int workers) {
  if (cfg.mode != RunMode::btb_osnr)
    throw std::invalid_argument("run_btb: config mode is not btb_osnr");
  return run_table(cfg, workers);
}

ResultTable run_distance_sweep(const ExperimentConfig& cfg, int workers) {
  if (cfg.mode != RunMode::distance_sweep)
    throw std::invalid_argument("run_distance_sweep: config mode is not distance_sweep");
  return run_table(cfg, workers);
}

std::string to_csv(const ResultTable& table) {
  std::string out = table.value_column +
                    ",ber_b1_l1,ber_b2_l1,ber_b1_l2,ber_b2_l2,ber_avg,erasures,n_bits,seed,"
                    "config_hash\n";
  for (const ResultRow& row : table.rows) {
    out += format_double(row.sweep_value);
    for (int j = 0; j < 4; ++j) out += "," + format_double(row.report.ber(j));
    out += "," + format_double(row.report.ber_avg());
    out += "," + std::to_string(row.report.erasures);
    out += "," + std::to_string(row.report.total_bits());
    out += "," + std::to_string(row.seed);
    out += "," + table.hash + "\n";
  }
  return out;
}

ConstellationTable dump_constellations(const ExperimentConfig& cfg, int workers) {
  if (cfg.mode == RunMode::roundtrip_selftest)
    throw std::invalid_argument(
        "dump_constellations: needs a btb_osnr or distance_sweep config");
  validate(cfg);
  ConstellationTable table;
  table.value_column = cfg.mode == RunMode::btb_osnr ? "osnr_db" : "distance_km";
  table.hash = config_hash(cfg);
  const TxContext ctx = make_tx(cfg, Exec::openmp);
  std::vector<std::vector<ConstellationRow>> per_point(cfg.sweep.size());
  for_each_point(cfg.sweep.size(), resolve_workers(workers), [&](std::size_t i) {
    const std::uint64_t seed = mix_seed(cfg.seed, i);
    const DualPolSignal rx = apply_channel(ctx.physical, cfg, cfg.sweep[i], seed, Exec::openmp);
    const RxOutcome out = receive(rx, ctx, cfg, Exec::openmp);
    const double value = sweep_value(cfg, i);
    for (std::size_t k = static_cast<std::size_t>(cfg.rx.bps.n_pilots);
         k < ctx.frame.n_symbols; ++k)
      for (int j = 0; j < 4; ++j)
        if (out.slots[k].found[static_cast<std::size_t>(j) / 2])
          per_point[i].push_back(
              ConstellationRow{value, j, k, out.demo.streams[static_cast<std::size_t>(j)]
                                                .corrected[k]});
  });
  for (auto& rows : per_point)
    table.rows.insert(table.rows.end(), rows.begin(), rows.end());
  return table;
}

std::string to_csv(const ConstellationTable& table) {
  static constexpr std::array<const char*, 4> kStreams{"b1_l1", "b2_l1", "b1_l2", "b2_l2"};
  std::string out = table.value_column + ",coefficient,symbol,re,im\n";
  for (const ConstellationRow& row : table.rows) {
    out += format_double(row.sweep_value);
    out += ",";
    out += kStreams[static_cast<std::size_t>(row.coefficient)];
    out += "," + std::to_string(row.symbol);
    out += "," + format_double(row.value.real());
    out += "," + format_double(row.value.imag()) + "\n";
  }
  return out;
}

bool SelftestReport::all_pass() const {
  return std::all_of(checks.begin(), checks.end(),
                     [](const SelftestCheck& c) { return c.pass; });
}

SelftestReport run_selftest(const ExperimentConfig& cfg) {
  validate(cfg);
  const SignalingPlan& plan = cfg.signaling;
  const SelftestTolerances& tol = cfg.selftest;
  SelftestReport report;
  const auto add = [&](std::string name, double measured, double lower, double upper) {
    report.checks.push_back(SelftestCheck{std::move(name), measured, lower, upper,
                                          measured >= lower && measured <= upper});
  };
  const std::array<cplx, 2> nominal = plan.eigenvalues;

  // Spectral round trip over a PRBS symbol batch. The slot-rate grid trades
  // accuracy for speed, so the suite samples on its own dense grid where
  // the trapezoidal bias sits well under the default tolerance.
  constexpr std::size_t kSymbols = 16;
  const TimeGrid dense = centered_grid(32768, plan.slot_half_width);
  Prbs11 prbs;
  const auto bits = prbs.block(kSymbols * SignalingPlan::bits_per_symbol);
  std::vector<double> lambda_err(kSymbols, kInf);
  std::vector<double> phase_err(kSymbols, kInf);
  DualPolSignal first_symbol;
  parallel_for(kSymbols, Exec::openmp, [&](std::size_t s) {
    const std::span<const std::uint8_t> word(bits.data() + s * 8, 8);
    const DualPolSignal sig = synthesize(map_bits(word, plan), dense);
    if (s == 0) first_symbol = sig;
    const EigenvalueSearch found = find_eigenvalues(sig, nominal);
    if (found.roots.size() != 2) return;
    const auto phases = symbol_phases(word, plan);
    double lerr = 0.0;
    double perr = 0.0;
    for (std::size_t e = 0; e < 2; ++e) {
      const cplx root = std::abs(found.roots[0] - nominal[e]) <
                                std::abs(found.roots[1] - nominal[e])
                            ? found.roots[0]
                            : found.roots[1];
      lerr = std::max(lerr, std::abs(root - nominal[e]));
      const auto [b1, b2] = compute_b(sig, root);
      perr = std::max(perr, std::abs(wrap_pi(std::arg(b1) - phases[2 * e])));
      perr = std::max(perr, std::abs(wrap_pi(std::arg(b2) - phases[2 * e + 1])));
    }
    lambda_err[s] = lerr;
    phase_err[s] = perr;
  });
  add("roundtrip_lambda_max", *std::max_element(lambda_err.begin(), lambda_err.end()), 0.0,
      tol.roundtrip_lambda);
  add("roundtrip_phase_max", *std::max_element(phase_err.begin(), phase_err.end()), 0.0,
      tol.roundtrip_phase);

  // Trace formula: the synthesized energy depends only on the eigenvalues.
  const double expected_energy = 4.0 * (nominal[0].imag() + nominal[1].imag());
  add("trace_energy_rel", std::abs(energy(first_symbol) / expected_energy - 1.0), 0.0,
      tol.trace_energy);

  // Integrability: the lossless flow moves only the b phases, so the
  // eigenvalues and the coefficient moduli must survive propagation.
  {
    const TimeGrid mid = centered_grid(8192, plan.slot_half_width);
    const std::span<const std::uint8_t> word(bits.data(), 8);
    const DualPolSignal before = synthesize(map_bits(word, plan), mid);
    const DualPolSignal after = propagate_normalized(before, 0.5, 2000, Exec::openmp);
    const EigenvalueSearch sb = find_eigenvalues(before, nominal);
    const EigenvalueSearch sa = find_eigenvalues(after, nominal);
    double lam_drift = kInf;
    double mod_drift = kInf;
    if (sb.roots.size() == 2 && sa.roots.size() == 2) {
      lam_drift = 0.0;
      mod_drift = 0.0;
      for (std::size_t e = 0; e < 2; ++e) {
        const auto nearest = [&](const EigenvalueSearch& search) {
          return std::abs(search.roots[0] - nominal[e]) <
                         std::abs(search.roots[1] - nominal[e])
                     ? search.roots[0]
                     : search.roots[1];
        };
        const cplx rb = nearest(sb);
        const cplx ra = nearest(sa);
        lam_drift = std::max(lam_drift, std::abs(ra - rb));
        const auto [b1b, b2b] = compute_b(before, rb);
        const auto [b1a, b2a] = compute_b(after, ra);
        mod_drift = std::max(mod_drift, std::abs(std::abs(b1a) / std::abs(b1b) - 1.0));
        mod_drift = std::max(mod_drift, std::abs(std::abs(b2a) / std::abs(b2b) - 1.0));
      }
    }
    add("propagation_lambda_max", lam_drift, 0.0, tol.propagation_lambda);
    add("propagation_b_modulus_rel", mod_drift, 0.0, tol.propagation_b);
  }

  // Convergence orders: both kernels are second order, so halving the step
  // divides the error by ~4.
  {
    const auto soliton_err = [](std::size_t n) {
      const TimeGrid grid = centered_grid(n, 16.0);
      DualPolSignal s = zero_signal(grid, Units::normalized);
      for (std::size_t i = 0; i < n; ++i) s.q1[i] = -1.0 / std::cosh(grid.t(i));
      const std::array<cplx, 1> guess{cplx(0.0, 0.45)};
      const EigenvalueSearch found = find_eigenvalues(s, guess);
      return found.roots.size() == 1 ? std::abs(found.roots[0] - cplx(0.0, 0.5)) : kInf;
    };
    add("scattering_halving_ratio", soliton_err(512) / soliton_err(1024), 3.0, 5.0);

    const TimeGrid grid = centered_grid(2048, plan.slot_half_width);
    const std::span<const std::uint8_t> word(bits.data(), 8);
    const DualPolSignal s0 = synthesize(map_bits(word, plan), grid);
    const DualPolSignal ref = propagate_normalized(s0, 0.25, 1600, Exec::openmp);
    const auto prop_err = [&](int steps) {
      const DualPolSignal p = propagate_normalized(s0, 0.25, steps, Exec::openmp);
      double num = 0.0;
      double den = 0.0;
      for (std::size_t i = 0; i < grid.n_samples; ++i) {
        num += std::norm(p.q1[i] - ref.q1[i]) + std::norm(p.q2[i] - ref.q2[i]);
        den += std::norm(ref.q1[i]) + std::norm(ref.q2[i]);
      }
      return std::sqrt(num / den);
    };
    add("splitstep_halving_ratio", prop_err(50) / prop_err(100), 3.0, 5.0);
  }

  return report;
}

std::string to_text(const SelftestReport& report) {
  std::string out;
  std::size_t failed = 0;
  for (const SelftestCheck& c : report.checks) {
    out += c.pass ? "[PASS] " : "[FAIL] ";
    out += c.name + ": measured " + format_double(c.measured) + ", allowed [" +
           format_double(c.lower) + ", " + format_double(c.upper) + "]\n";
    if (!c.pass) ++failed;
  }
  if (failed == 0)
    out += "all " + std::to_string(report.checks.size()) + " checks passed\n";
  else
    out += std::to_string(failed) + " of " + std::to_string(report.checks.size()) +
           " checks failed\n";
  return out;
}

void write_file(const std::string& path, const std::string& text) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace nfdm
