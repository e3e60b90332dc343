// Experiment runner: back-to-back OSNR sweeps, multi-span distance sweeps,
// constellation dumps, and the deterministic property selftest. Sweeps
// write CSV; exit code 0 on success, 1 on any validation problem, 2 when a
// selftest property fails.

#include <cstdio>
#include <cstdint>
#include <exception>
#include <string>

#include "CLI11.hpp"
#include "nfdm/experiments.hpp"

namespace {

struct Common {
  std::string config_path;
  std::string out_path;
  std::string format = "csv";
  std::uint64_t seed = 0;
  int workers = 0;
  CLI::App* sub = nullptr;
};

void add_common(CLI::App* sub, Common& c) {
  c.sub = sub;
  sub->add_option("--config", c.config_path, "JSON experiment config (schema_version 1)");
  sub->add_option("--seed", c.seed, "override the config's master seed");
  sub->add_option("--out", c.out_path, "override the config's output path");
  sub->add_option("--workers", c.workers,
                  "concurrent sweep points (default: NFDM_WORKERS env, then all cores)");
  sub->add_option("--format", c.format, "output format (csv)");
}

int run_table_command(const nfdm::ExperimentConfig& cfg, int workers, bool distance) {
  const nfdm::ResultTable table = distance ? nfdm::run_distance_sweep(cfg, workers)
                                           : nfdm::run_btb(cfg, workers);
  nfdm::write_file(cfg.output_path, nfdm::to_csv(table));
  std::printf("wrote %zu rows to %s (config %s)\n", table.rows.size(),
              cfg.output_path.c_str(), table.hash.c_str());
  return 0;
}

int run_dump_command(const nfdm::ExperimentConfig& cfg, int workers) {
  const nfdm::ConstellationTable table = nfdm::dump_constellations(cfg, workers);
  nfdm::write_file(cfg.output_path, nfdm::to_csv(table));
  std::printf("wrote %zu constellation points to %s (config %s)\n", table.rows.size(),
              cfg.output_path.c_str(), table.hash.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"nonlinear-spectrum transmission simulator"};
  app.require_subcommand(1);

  Common barebones[4];
  CLI::App* c_btb = app.add_subcommand("btb", "back-to-back OSNR sweep (noise loading only)");
  CLI::App* c_sweep = app.add_subcommand("sweep", "amplified multi-span distance sweep");
  CLI::App* c_self = app.add_subcommand("selftest", "deterministic property suites");
  CLI::App* c_dump =
      app.add_subcommand("dump-constellations", "pre-decision coefficient scatter dump");
  add_common(c_btb, barebones[0]);
  add_common(c_sweep, barebones[1]);
  add_common(c_self, barebones[2]);
  add_common(c_dump, barebones[3]);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  const Common* c = nullptr;
  for (const Common& candidate : barebones)
    if (candidate.sub != nullptr && candidate.sub->parsed()) c = &candidate;
  if (c == nullptr) return 1;  // unreachable with require_subcommand(1)

  if (c->format != "csv") {
    std::fprintf(stderr, "unsupported --format \"%s\" (only csv)\n", c->format.c_str());
    return 1;
  }

  const bool is_btb = c->sub == c_btb;
  const bool is_sweep = c->sub == c_sweep;
  const bool is_self = c->sub == c_self;
  const bool is_dump = c->sub == c_dump;

  nfdm::ExperimentConfig cfg;
  try {
    if (!c->config_path.empty()) {
      cfg = nfdm::load_config(c->config_path);
    } else if (is_self) {
      cfg.mode = nfdm::RunMode::roundtrip_selftest;
      cfg.sweep = {0.0};
    } else {
      std::fprintf(stderr, "%s needs --config\n", c->sub->get_name().c_str());
      return 1;
    }
    if (c->sub->count("--seed") > 0) cfg.seed = c->seed;
    if (!c->out_path.empty()) cfg.output_path = c->out_path;

    const bool mode_ok =
        (is_btb && cfg.mode == nfdm::RunMode::btb_osnr) ||
        (is_sweep && cfg.mode == nfdm::RunMode::distance_sweep) ||
        (is_self && cfg.mode == nfdm::RunMode::roundtrip_selftest) ||
        (is_dump && cfg.mode != nfdm::RunMode::roundtrip_selftest);
    if (!mode_ok) {
      std::fprintf(stderr, "config mode does not match the %s subcommand\n",
                   c->sub->get_name().c_str());
      return 1;
    }
    nfdm::validate(cfg);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return 1;
  }

  try {
    if (is_self) {
      const nfdm::SelftestReport report = nfdm::run_selftest(cfg);
      std::fputs(nfdm::to_text(report).c_str(), stdout);
      return report.all_pass() ? 0 : 2;
    }
    if (is_dump) return run_dump_command(cfg, c->workers);
    return run_table_command(cfg, c->workers, is_sweep);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return 1;
  }
}
