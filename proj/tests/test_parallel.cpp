#include <vector>

#include "doctest.h"
#include "nfdm/channel.hpp"
#include "nfdm/physics.hpp"
#include "nfdm/transceiver.hpp"

using namespace nfdm;

// The OpenMP paths must be drop-in replacements: every parallelized kernel
// partitions work that never crosses iterations, so serial and parallel
// runs have to agree bit for bit, not merely within tolerance.

TEST_CASE("modulate is bitwise identical across execution policies") {
  const SignalingPlan plan;
  Prbs11 gen;
  const auto bits = gen.block(24 * 8);
  const TxFrame serial = modulate(bits, plan, Exec::serial);
  const TxFrame parallel = modulate(bits, plan, Exec::openmp);
  CHECK(serial.signal.q1 == parallel.signal.q1);
  CHECK(serial.signal.q2 == parallel.signal.q2);
  CHECK(serial.tx_phase == parallel.tx_phase);
}

TEST_CASE("detect_frame is bitwise identical across execution policies") {
  const SignalingPlan plan;
  Prbs11 gen;
  const TxFrame frame = modulate(gen.block(12 * 8), plan);

  const auto serial = detect_frame(frame.signal, plan, 0.15, Exec::serial);
  const auto parallel = detect_frame(frame.signal, plan, 0.15, Exec::openmp);
  REQUIRE(serial.size() == parallel.size());
  for (std::size_t k = 0; k < serial.size(); ++k) {
    CHECK(serial[k].found == parallel[k].found);
    bool same = serial[k].lambda == parallel[k].lambda && serial[k].b == parallel[k].b;
    CHECK(same);
  }
}

TEST_CASE("split-step propagation is bitwise identical across execution policies") {
  const SignalingPlan plan;
  Prbs11 gen;
  const TxFrame frame = modulate(gen.block(4 * 8), plan);

  const auto serial = propagate_normalized(frame.signal, 0.3, 64, Exec::serial);
  const auto parallel = propagate_normalized(frame.signal, 0.3, 64, Exec::openmp);
  CHECK(serial.q1 == parallel.q1);
  CHECK(serial.q2 == parallel.q2);

  const FiberLink link;
  const NormalizationMap map = make_normalization(link, plan.t_scale_s(), true);
  const DualPolSignal phys = denormalize(frame.signal, map);
  const auto s2 = ssfm_manakov(phys, link, link.span_km * 1e3, 120, Exec::serial);
  const auto p2 = ssfm_manakov(phys, link, link.span_km * 1e3, 120, Exec::openmp);
  CHECK(s2.q1 == p2.q1);
  CHECK(s2.q2 == p2.q2);

  FiberLink line = link;
  line.n_spans = 2;
  const auto s3 = transmit_link(phys, line, 100, 5, Exec::serial);
  const auto p3 = transmit_link(phys, line, 100, 5, Exec::openmp);
  CHECK(s3.q1 == p3.q1);
  CHECK(s3.q2 == p3.q2);
}
