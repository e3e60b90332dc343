// Serial vs OpenMP timings for the three kernels that parallelize across
// slots or frequency bins. Run with --benchmark_filter to isolate one.
#include <benchmark/benchmark.h>

#include "nfdm/channel.hpp"
#include "nfdm/physics.hpp"
#include "nfdm/transceiver.hpp"

using namespace nfdm;

namespace {

const SignalingPlan& plan() {
  static const SignalingPlan p;
  return p;
}

const TxFrame& frame() {
  static const TxFrame f = [] {
    Prbs11 gen;
    return modulate(gen.block(16 * 8), plan());
  }();
  return f;
}

std::vector<std::uint8_t> frame_bits() {
  Prbs11 gen;
  return gen.block(16 * 8);
}

void bench_modulate(benchmark::State& state, Exec exec) {
  const auto bits = frame_bits();
  for (auto _ : state) benchmark::DoNotOptimize(modulate(bits, plan(), exec));
}

void bench_detect(benchmark::State& state, Exec exec) {
  const DualPolSignal& sig = frame().signal;
  for (auto _ : state) benchmark::DoNotOptimize(detect_frame(sig, plan(), 0.15, exec));
}

void bench_splitstep(benchmark::State& state, Exec exec) {
  const DualPolSignal& sig = frame().signal;
  for (auto _ : state) benchmark::DoNotOptimize(propagate_normalized(sig, 0.1, 64, exec));
}

}  // namespace

BENCHMARK_CAPTURE(bench_modulate, serial, Exec::serial)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(bench_modulate, openmp, Exec::openmp)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(bench_detect, serial, Exec::serial)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(bench_detect, openmp, Exec::openmp)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(bench_splitstep, serial, Exec::serial)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(bench_splitstep, openmp, Exec::openmp)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
