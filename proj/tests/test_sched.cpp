#include <gtest/gtest.h>

#include <array>
#include <vector>

#include "oracles/oracles.hpp"
#include "quicfec/sched.hpp"

using namespace quicfec;
using namespace quicfec::sched;

namespace {

PathState with_rb(std::size_t id, std::uint64_t room) {
  PathState p;
  p.path_id = id;
  p.cwin = static_cast<double>(room) + 5000.0;
  p.bytes_in_flight = 5000;
  return p;
}

std::vector<double> frequencies(std::span<const PathState> paths, int draws, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> f(paths.size(), 0.0);
  for (int i = 0; i < draws; ++i) f[highrb_pick(paths, rng)] += 1.0;
  for (auto& x : f) x /= draws;
  return f;
}

}  // namespace

TEST(RemainingBytes, Examples) {
  PathState p;
  p.cwin = 10000;
  p.bytes_in_flight = 4000;
  EXPECT_EQ(rb(p), 6000u);
  p.bytes_in_flight = 10000;
  EXPECT_EQ(rb(p), 0u);
  p.bytes_in_flight = 25000;
  EXPECT_EQ(rb(p), 0u);
}

TEST(HighRb, WeightsFollowRemainingBytes) {
  const std::array paths{with_rb(0, 100), with_rb(1, 300)};
  const auto w = highrb_weights(paths);
  EXPECT_DOUBLE_EQ(w[0], 0.25);
  EXPECT_DOUBLE_EQ(w[1], 0.75);
  const auto f = frequencies(paths, 100000, 1);
  EXPECT_NEAR(f[1], 0.75, 0.01);
}

TEST(HighRb, ZeroTotalIsUniform) {
  const std::array paths{with_rb(0, 0), with_rb(1, 0)};
  const auto w = highrb_weights(paths);
  EXPECT_DOUBLE_EQ(w[0], 0.5);
  EXPECT_DOUBLE_EQ(w[1], 0.5);
  EXPECT_NEAR(frequencies(paths, 100000, 2)[0], 0.5, 0.01);
}

TEST(HighRb, SinglePathAlwaysChosen) {
  const std::array paths{with_rb(0, 0)};
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(highrb_pick(paths, rng), 0u);
}

TEST(HighRb, ZeroWeightPathNeverChosen) {
  const std::array paths{with_rb(0, 0), with_rb(1, 1000)};
  EXPECT_DOUBLE_EQ(frequencies(paths, 10000, 4)[1], 1.0);
}

TEST(HighRb, FrequenciesMatchRandomWeightVectors) {
  Rng pick(10);
  for (int trial = 0; trial < 5; ++trial) {
    const std::array paths{with_rb(0, pick.below(20000)), with_rb(1, pick.below(20000)), with_rb(2, pick.below(20000))};
    const auto w = highrb_weights(paths);
    const auto f = frequencies(paths, 100000, 20 + trial);
    for (std::size_t i = 0; i < w.size(); ++i) EXPECT_NEAR(f[i], w[i], 0.01);
  }
}

TEST(HighRb, ScalingLeavesWeightsUnchanged) {
  const std::array a{with_rb(0, 1200), with_rb(1, 3400)};
  const std::array b{with_rb(0, 12000), with_rb(1, 34000)};
  const auto wa = highrb_weights(a);
  const auto wb = highrb_weights(b);
  for (std::size_t i = 0; i < wa.size(); ++i) EXPECT_NEAR(wa[i], wb[i], 1e-12);
}

TEST(HighRb, IdlePathsUsedUniformly) {
  const std::array paths{PathState{}, PathState{}};
  EXPECT_NEAR(frequencies(paths, 100000, 5)[0], 0.5, 0.02);
}

TEST(RoundRobinTest, Alternates) {
  RoundRobin rr;
  std::vector<std::size_t> seq;
  for (int i = 0; i < 6; ++i) seq.push_back(rr.pick(2));
  EXPECT_EQ(seq, (std::vector<std::size_t>{0, 1, 0, 1, 0, 1}));
  RoundRobin one;
  for (int i = 0; i < 5; ++i) EXPECT_EQ(one.pick(1), 0u);
  EXPECT_THROW(one.pick(0), std::invalid_argument);
}

TEST(RoundRobinTest, FourSendsOnTwoPathsUseEachTwice) {
  Scheduler s(SchedulerKind::round_robin, 0);
  const std::array paths{PathState{}, PathState{}};
  std::array<int, 2> used{};
  for (int i = 0; i < 4; ++i) ++used[s.pick(paths)];
  EXPECT_EQ(used[0], 2);
  EXPECT_EQ(used[1], 2);
}

TEST(SchedulerTest, SinglePathAlwaysZero) {
  Scheduler s(SchedulerKind::single_path, 0);
  const std::array paths{PathState{}, PathState{}};
  for (int i = 0; i < 10; ++i) EXPECT_EQ(s.pick(paths), 0u);
}

TEST(SchedulerTest, KindNames) {
  for (auto k : {SchedulerKind::single_path, SchedulerKind::round_robin, SchedulerKind::high_rb}) {
    EXPECT_EQ(scheduler_from_string(to_string(k)), k);
  }
  EXPECT_THROW(scheduler_from_string("olia"), std::invalid_argument);
}

TEST(Cwnd, AckOfOnePacketAtOnePacketWindowDoubles) {
  PathState p;
  p.cwin = static_cast<double>(p.packet_size);
  cwnd_on_send(p, p.packet_size);
  cwnd_on_ack(p, p.packet_size);
  EXPECT_DOUBLE_EQ(p.cwin, 2.0 * static_cast<double>(p.packet_size));
  EXPECT_EQ(p.bytes_in_flight, 0u);
}

TEST(Cwnd, AckGrowthIsAboutOnePacketPerWindow) {
  PathState p;
  const double start = p.cwin;
  // One window's worth of acks.
  for (int i = 0; i < 10; ++i) cwnd_on_ack(p, p.packet_size);
  EXPECT_NEAR(p.cwin - start, static_cast<double>(p.packet_size), 0.05 * static_cast<double>(p.packet_size));
}

TEST(Cwnd, LossesFloorAtTwoPackets) {
  PathState p;
  for (int i = 0; i < 10; ++i) cwnd_on_loss(p, 0, static_cast<SimTime>(i) * 1000);
  EXPECT_DOUBLE_EQ(p.cwin, 2.0 * static_cast<double>(p.packet_size));
}

TEST(Cwnd, AtMostOneReductionPerRtt) {
  PathState p;
  p.srtt = 100 * netem::kMillisecond;
  cwnd_on_send(p, 3000);
  cwnd_on_loss(p, 1350, 0);
  cwnd_on_loss(p, 1350, 50 * netem::kMillisecond);
  EXPECT_DOUBLE_EQ(p.cwin, 5.0 * 1350);
  EXPECT_EQ(p.bytes_in_flight, 300u);
  cwnd_on_loss(p, 1350, 100 * netem::kMillisecond);
  EXPECT_DOUBLE_EQ(p.cwin, 2.5 * 1350);
  EXPECT_EQ(p.bytes_in_flight, 0u);
}

TEST(BurstEnumerationTest, FigureScenario) {
  const codec::BlockCodeParams block{6, 4};
  const auto one = burst_recovery_enumeration(block, 3, 1);
  const auto two = burst_recovery_enumeration(block, 3, 2);
  EXPECT_DOUBLE_EQ(one.fraction(), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(two.fraction(), 2.0 / 3.0);
}

TEST(BurstEnumerationTest, SmallBlocks) {
  const codec::BlockCodeParams block{3, 2};
  EXPECT_DOUBLE_EQ(burst_recovery_enumeration(block, 3, 1).fraction(), 0.0);
  EXPECT_DOUBLE_EQ(burst_recovery_enumeration(block, 3, 2).fraction(), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(burst_recovery_enumeration(block, 1, 1).fraction(), 1.0);
}

TEST(BurstEnumerationTest, EmptyBurstAlwaysRecoverable) {
  EXPECT_DOUBLE_EQ(burst_recovery_enumeration({6, 4}, 0, 1).fraction(), 1.0);
  EXPECT_DOUBLE_EQ(burst_recovery_enumeration({30, 20}, 0, 2).fraction(), 1.0);
}

TEST(BurstEnumerationTest, MultipathNeverWorseForBlockCodes) {
  for (unsigned n : {3u, 6u, 10u, 30u}) {
    for (unsigned k = 1; k < n; ++k) {
      for (std::size_t burst = 0; burst <= n; ++burst) {
        const codec::BlockCodeParams block{n, k};
        EXPECT_GE(burst_recovery_enumeration(block, burst, 2).fraction(),
                  burst_recovery_enumeration(block, burst, 1).fraction())
            << n << "," << k << " burst " << burst;
      }
    }
  }
}

TEST(BurstEnumerationTest, MatchesExplicitLayoutOracle) {
  for (unsigned n : {3u, 5u, 6u, 10u, 30u}) {
    for (unsigned k = 1; k < n; k += (n > 10 ? 7 : 1)) {
      for (std::size_t len = 1; len <= 12; ++len) {
        for (std::size_t paths = 1; paths <= 3; ++paths) {
          const auto lib = burst_recovery_enumeration({n, k}, len, paths);
          const auto [good, total] = oracle::burst_recoverable(n, k, len, paths);
          ASSERT_EQ(lib.recoverable, good) << n << "," << k << " len " << len << " paths " << paths;
          ASSERT_EQ(lib.total, total);
        }
      }
    }
  }
}
