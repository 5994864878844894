#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "cacc/platooning.hpp"

namespace {

using namespace cacc;

constexpr double kSj = 1000.0 / 180.0;

ControllerParams ctrl() { return ControllerParams{}; }

TEST(GapError, OnPolicySpacing) {
  const auto c = ctrl();
  EXPECT_NEAR(gap_error(0.0, 20.0, kSj + 0.6 * 20.0, c), 0.0, 1e-12);
}

TEST(GapError, LargeGap) {
  EXPECT_NEAR(gap_error(0.0, 27.78, 25.0, ctrl()), 25.0 - kSj - 0.6 * 27.78, 1e-12);
  EXPECT_NEAR(gap_error(0.0, 27.78, 25.0, ctrl()), 2.777, 1e-3);
}

TEST(GapError, StoppedAtJamSpacing) { EXPECT_NEAR(gap_error(10.0, 0.0, 10.0 + kSj, ctrl()), 0.0, 1e-12); }

TEST(CaccAccel, Equilibrium) {
  EXPECT_NEAR(cacc_accel(0.0, 20.0, kSj + 12.0, 20.0, ctrl()), 0.0, 1e-12);
}

TEST(CaccAccel, GapTooLargeAccelerates) {
  const double a = cacc_accel(0.0, 27.78, 25.0, 27.78, ctrl());
  const double e = 25.0 - kSj - 0.6 * 27.78;
  EXPECT_NEAR(a, 0.5 * e / 0.6, 1e-12);
  EXPECT_NEAR(a, 2.314, 1e-3);
}

TEST(CaccAccel, SlowerLeader) {
  EXPECT_NEAR(cacc_accel(0.0, 20.0, kSj + 12.0, 19.0, ctrl()), -1.0 / 0.6, 1e-12);
}

TEST(CaccAccel, ErrorDerivativeIsMinusLambdaE) {
  // de/dt = (v_lead - v) - h a; with a from the law this is -lambda e.
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> x(10.0, 80.0), v(0.0, 35.0);
  const auto c = ctrl();
  for (int i = 0; i < 1000; ++i) {
    const double xl = x(rng), vf = v(rng), vl = v(rng);
    const double e = gap_error(0.0, vf, xl, c);
    const double a = cacc_accel(0.0, vf, xl, vl, c);
    EXPECT_NEAR((vl - vf) - c.time_gap_s * a, -c.gain_per_s * e, 1e-10);
  }
}

TEST(CaccAccel, LiteralSignDiverges) {
  auto c = ctrl();
  c.paper_literal_sign = true;
  const double e = gap_error(0.0, 20.0, 40.0, c);
  const double a = cacc_accel(0.0, 20.0, 40.0, 20.0, c);
  EXPECT_NEAR(-c.time_gap_s * a, +c.gain_per_s * e, 1e-12);
}

TEST(CaccAccel, LinearSuperposition) {
  // a(e, dv) = (lambda e + dv) / h, exactly linear in both arguments.
  const auto c = ctrl();
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> d(-5.0, 5.0);
  const double v = 20.0;
  auto accel = [&](double e, double dv) {
    const double xl = kSj + c.time_gap_s * v + e;
    return cacc_accel(0.0, v, xl, v + dv, c);
  };
  for (int i = 0; i < 500; ++i) {
    const double e1 = d(rng), e2 = d(rng), dv1 = d(rng), dv2 = d(rng);
    const double sum = accel(e1 + e2, dv1 + dv2);
    EXPECT_NEAR(sum, accel(e1, dv1) + accel(e2, dv2), 1e-12 * std::max(1.0, std::abs(sum)));
  }
  EXPECT_NEAR(accel(0.0, 0.0), 0.0, 1e-12);
}

TEST(JoinTarget, PassThroughWithoutAttempt) { EXPECT_EQ(join_target_speed(27.78, false, ctrl()), 27.78); }

TEST(JoinTarget, BoostDuringAttempt) {
  EXPECT_NEAR(join_target_speed(27.78, true, ctrl()), 29.7246, 1e-9);
  EXPECT_NEAR(join_target_speed(27.78, true, ctrl()), 29.72, 5e-3);
}

TEST(JoinTarget, UnitBoostIsIdentity) {
  auto c = ctrl();
  c.join_boost = 1.0;
  EXPECT_EQ(join_target_speed(27.78, true, c), 27.78);
}

// --- lifecycle scan --------------------------------------------------------

struct Lane {
  std::vector<LaneMember> members;
  PlatoonRegistry reg;

  LaneMember& add(VehicleId id, double x, double v, VehicleClass cls = VehicleClass::kCacc, int link = 0) {
    LaneMember m;
    m.id = id;
    m.cls = cls;
    m.x = x;
    m.v = v;
    m.link = link;
    members.push_back(m);
    return members.back();
  }

  /// Puts members [first, first + n) into one platoon.
  PlatoonId make_platoon(std::size_t first, std::size_t n) {
    PlatoonState p;
    p.id = reg.next_id++;
    for (std::size_t i = first; i < first + n; ++i) {
      p.members.push_back(members[i].id);
      members[i].tag.platoon = p.id;
      members[i].tag.role = i == first ? Role::kLeader : Role::kFollower;
    }
    reg.platoons[p.id] = p;
    return p.id;
  }

  std::vector<LifecycleEvent> scan(const ControllerParams& c = ControllerParams{}, bool disconnected = true,
                                   double now = 10.0) const {
    return platoon_scan(members, reg, c, ScanContext{now, 0.1, 0, disconnected});
  }
};

std::vector<LifecycleKind> kinds(const std::vector<LifecycleEvent>& evs) {
  std::vector<LifecycleKind> out;
  for (const auto& e : evs) out.push_back(e.kind);
  return out;
}

using K = LifecycleKind;

TEST(PlatoonScan, LoneVehicleForms) {
  Lane lane;
  lane.add(1, 500.0, 27.0);
  const auto evs = lane.scan();
  ASSERT_EQ(kinds(evs), std::vector<K>{K::kForm});
  EXPECT_EQ(evs[0].vehicle, 1u);
  EXPECT_EQ(evs[0].platoon, 1u);
  EXPECT_EQ(evs[0].t, 10.0);
}

TEST(PlatoonScan, ConventionalVehiclesIgnored) {
  Lane lane;
  lane.add(1, 500.0, 27.0, VehicleClass::kConventional);
  lane.add(2, 450.0, 27.0, VehicleClass::kConventional);
  EXPECT_TRUE(lane.scan().empty());
}

TEST(PlatoonScan, CaccOutOfRangeFormsItsOwn) {
  Lane lane;
  lane.add(1, 500.0, 27.0);
  lane.make_platoon(0, 1);
  lane.add(2, 300.0, 27.0);
  const auto evs = lane.scan();
  ASSERT_EQ(kinds(evs), std::vector<K>{K::kForm});
  EXPECT_EQ(evs[0].vehicle, 2u);
}

TEST(PlatoonScan, BehindConventionalFormsItsOwn) {
  Lane lane;
  lane.add(1, 500.0, 27.0, VehicleClass::kConventional);
  lane.add(2, 470.0, 27.0);
  EXPECT_EQ(kinds(lane.scan()), std::vector<K>{K::kForm});
}

TEST(PlatoonScan, TailJoinStarts) {
  Lane lane;
  lane.add(1, 500.0, 27.0);
  lane.make_platoon(0, 1);
  lane.add(2, 440.0, 27.0);
  const auto evs = lane.scan();
  ASSERT_EQ(kinds(evs), std::vector<K>{K::kJoinStart});
  EXPECT_EQ(evs[0].platoon, 1u);
}

TEST(PlatoonScan, JoinCommitsWhenOnPolicy) {
  Lane lane;
  lane.add(1, 500.0, 27.0);
  const PlatoonId p = lane.make_platoon(0, 1);
  auto& m = lane.add(2, 500.0 - kSj - 0.6 * 27.0 - 0.3, 27.0);
  m.tag.join = JoinAttempt{2, p, 8.0, 20};
  const auto evs = lane.scan();
  ASSERT_EQ(kinds(evs), std::vector<K>{K::kJoinCommit});
  EXPECT_EQ(evs[0].platoon, p);
}

TEST(PlatoonScan, JoinAbortsAfterWindow) {
  Lane lane;
  lane.add(1, 500.0, 27.0);
  const PlatoonId p = lane.make_platoon(0, 1);
  auto& m = lane.add(2, 420.0, 27.0);
  m.tag.join = JoinAttempt{2, p, 3.4, 66};  // 6.6 s elapsed
  const auto evs = lane.scan();
  ASSERT_EQ(kinds(evs), (std::vector<K>{K::kJoinAbort, K::kForm}));
  EXPECT_EQ(evs[0].platoon, p);
  EXPECT_NE(evs[1].platoon, p);
  EXPECT_EQ(evs[1].vehicle, 2u);
}

TEST(PlatoonScan, JoinContinuesInsideWindow) {
  Lane lane;
  lane.add(1, 500.0, 27.0);
  const PlatoonId p = lane.make_platoon(0, 1);
  auto& m = lane.add(2, 420.0, 27.0);
  m.tag.join = JoinAttempt{2, p, 5.0, 50};
  EXPECT_TRUE(lane.scan().empty());
}

TEST(PlatoonScan, CapRefusesJoiner) {
  Lane lane;
  for (int i = 0; i < 22; ++i) lane.add(static_cast<VehicleId>(i + 1), 2000.0 - 22.2 * i, 27.78);
  const PlatoonId full = lane.make_platoon(0, 22);
  lane.add(23, lane.members.back().x - 40.0, 27.78);
  const auto evs = lane.scan();
  ASSERT_EQ(kinds(evs), (std::vector<K>{K::kSplitCap, K::kForm}));
  EXPECT_EQ(evs[0].platoon, full);
  EXPECT_EQ(evs[1].vehicle, 23u);
}

TEST(PlatoonScan, NoCapWhenUnlimited) {
  Lane lane;
  for (int i = 0; i < 22; ++i) lane.add(static_cast<VehicleId>(i + 1), 2000.0 - 22.2 * i, 27.78);
  lane.make_platoon(0, 22);
  lane.add(23, lane.members.back().x - 40.0, 27.78);
  auto c = ControllerParams{};
  c.max_platoon_size.reset();
  EXPECT_EQ(kinds(lane.scan(c)), std::vector<K>{K::kJoinStart});
}

TEST(PlatoonScan, RefusedPlatoonNotRetried) {
  Lane lane;
  lane.add(1, 500.0, 27.0);
  const PlatoonId p = lane.make_platoon(0, 1);
  auto& m = lane.add(2, 440.0, 27.0);
  m.tag.refused = p;
  EXPECT_EQ(kinds(lane.scan()), std::vector<K>{K::kForm});
}

TEST(PlatoonScan, LeaderCrossingBoundarySplits) {
  Lane lane;
  lane.add(1, 1001.0, 27.78, VehicleClass::kCacc, 1).crossed_link = true;
  lane.add(2, 978.0, 27.78, VehicleClass::kCacc, 0);
  const PlatoonId p = lane.make_platoon(0, 2);
  const auto evs = lane.scan();
  ASSERT_FALSE(evs.empty());
  EXPECT_EQ(evs[0].kind, K::kSplitBoundary);
  EXPECT_EQ(evs[0].platoon, p);
  EXPECT_EQ(evs[0].vehicle, 1u);
  // The crossed leader starts over on the new link.
  EXPECT_EQ(evs[1].kind, K::kForm);
  EXPECT_EQ(evs[1].vehicle, 1u);
  EXPECT_EQ(evs.size(), 2u);
}

TEST(PlatoonScan, ConnectedLinksKeepPlatoon) {
  Lane lane;
  lane.add(1, 1001.0, 27.78, VehicleClass::kCacc, 1).crossed_link = true;
  lane.add(2, 978.0, 27.78, VehicleClass::kCacc, 0);
  lane.make_platoon(0, 2);
  EXPECT_TRUE(lane.scan(ControllerParams{}, false).empty());
}

TEST(PlatoonScan, NoJoinAcrossDisconnectedBoundary) {
  Lane lane;
  lane.add(1, 1010.0, 27.78, VehicleClass::kCacc, 1);
  lane.make_platoon(0, 1);
  lane.add(2, 990.0, 27.78, VehicleClass::kCacc, 0);
  EXPECT_EQ(kinds(lane.scan()), std::vector<K>{K::kForm});
  EXPECT_EQ(kinds(lane.scan(ControllerParams{}, false)), std::vector<K>{K::kJoinStart});
}

TEST(PlatoonScan, InputsUntouched) {
  Lane lane;
  lane.add(1, 500.0, 27.0);
  lane.add(2, 470.0, 27.0);
  const auto before = lane.members;
  const auto reg_before = lane.reg.platoons.size();
  (void)lane.scan();
  ASSERT_EQ(lane.members.size(), before.size());
  for (std::size_t i = 0; i < before.size(); ++i) EXPECT_EQ(lane.members[i].tag.platoon, before[i].tag.platoon);
  EXPECT_EQ(lane.reg.platoons.size(), reg_before);
}

TEST(PlatoonScan, FreshSingletonCanBeJoinedInSameScan) {
  Lane lane;
  lane.add(1, 500.0, 27.0);
  lane.add(2, 470.0, 27.0);
  EXPECT_EQ(kinds(lane.scan()), (std::vector<K>{K::kForm, K::kJoinStart}));
}

TEST(PlatoonScan, FollowerOfJoiningVehicleWaits) {
  Lane lane;
  lane.add(1, 600.0, 27.0);
  const PlatoonId p = lane.make_platoon(0, 1);
  lane.add(2, 540.0, 27.0).tag.join = JoinAttempt{2, p, 9.0, 10};
  lane.add(3, 510.0, 27.0);
  EXPECT_TRUE(lane.scan().empty());
}

TEST(ApplyEvent, ReplayBuildsRegistry) {
  Lane lane;
  lane.add(1, 500.0, 27.0);
  lane.add(2, 500.0 - kSj - 0.6 * 27.0, 27.0);
  const auto evs = lane.scan();
  ASSERT_EQ(kinds(evs), (std::vector<K>{K::kForm, K::kJoinStart, K::kJoinCommit}));
  PlatoonRegistry reg;
  auto members = lane.members;
  auto tag_of = [&members](VehicleId id) -> PlatoonTag& { return members[id - 1].tag; };
  for (const auto& e : evs) apply_event(e, reg, tag_of);
  ASSERT_EQ(reg.platoons.size(), 1u);
  const auto& p = reg.platoons.begin()->second;
  EXPECT_EQ(p.members, (std::vector<VehicleId>{1, 2}));
  EXPECT_EQ(members[0].tag.role, Role::kLeader);
  EXPECT_EQ(members[1].tag.role, Role::kFollower);
}

TEST(ApplyEvent, ExitPromotesNextMember) {
  Lane lane;
  lane.add(1, 500.0, 27.0);
  lane.add(2, 478.0, 27.0);
  lane.add(3, 456.0, 27.0);
  const PlatoonId p = lane.make_platoon(0, 3);
  auto tag_of = [&lane](VehicleId id) -> PlatoonTag& { return lane.members[id - 1].tag; };
  apply_event({11.0, K::kSplitExit, 1, p, 0, 500.0}, lane.reg, tag_of);
  EXPECT_EQ(lane.reg.platoons.at(p).members, (std::vector<VehicleId>{2, 3}));
  EXPECT_EQ(lane.members[1].tag.role, Role::kLeader);
  EXPECT_EQ(lane.members[0].tag.platoon, kNoPlatoon);
}

TEST(Lifecycle, KindNames) {
  EXPECT_EQ(to_string(K::kForm), "FORM");
  EXPECT_EQ(to_string(K::kJoinStart), "JOIN_START");
  EXPECT_EQ(to_string(K::kJoinCommit), "JOIN_COMMIT");
  EXPECT_EQ(to_string(K::kJoinAbort), "JOIN_ABORT");
  EXPECT_EQ(to_string(K::kSplitCap), "SPLIT_CAP");
  EXPECT_EQ(to_string(K::kSplitBoundary), "SPLIT_BOUNDARY");
  EXPECT_EQ(to_string(K::kSplitExit), "SPLIT_EXIT");
}

}  // namespace
