#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "cacc/dynamics.hpp"

namespace {

using namespace cacc;

constexpr double g = 9.8066;

TEST(TractiveForce, FrictionBranchNearStandstill) {
  VehicleParams p;
  EXPECT_DOUBLE_EQ(tractive_force(p, 0.0), 900.0 * g * 0.6);
  EXPECT_DOUBLE_EQ(tractive_force(p, 0.05), 900.0 * g * 0.6);
}

TEST(TractiveForce, PowerBranchAtFreeFlow) {
  VehicleParams p;
  // 1000 * 0.9 * 150 / 27.78
  EXPECT_NEAR(tractive_force(p, 27.78), 135000.0 / 27.78, 1e-9);
  EXPECT_NEAR(tractive_force(p, 27.78), 4860.0, 0.5);
}

TEST(TractiveForce, FrictionBranchAtHalfSpeed) {
  VehicleParams p;
  EXPECT_GT(135000.0 / 13.89, 9700.0);
  EXPECT_NEAR(tractive_force(p, 13.89), 5295.564, 1e-3);
}

TEST(TractiveForce, MonotoneAndBounded) {
  VehicleParams p;
  const double cap = p.tractive_axle_mass_kg * g * p.adhesion;
  double prev = tractive_force(p, kTractionSpeedFloor);
  for (double v = kTractionSpeedFloor; v < 60.0; v += 0.037) {
    const double f = tractive_force(p, v);
    EXPECT_LE(f, prev + 1e-12);
    EXPECT_LE(f, cap);
    prev = f;
  }
}

TEST(Resistance, ZeroSpeed) {
  VehicleParams p;
  const auto r = resistance_forces(p, 0.0, {});
  EXPECT_EQ(r.aero, 0.0);
  EXPECT_EQ(r.grade, 0.0);
  EXPECT_DOUBLE_EQ(r.rolling, 1500.0 * g * 1.75 * 4.575 / 1000.0);
}

TEST(Resistance, AtFreeFlow) {
  VehicleParams p;
  const auto r = resistance_forces(p, 27.78, {});
  const double aero = 0.5 * 1.2256 * 0.28 * 1.0 * 2.3 * 27.78 * 27.78;
  const double rolling = 1500.0 * g * 1.75 / 1000.0 * (0.0328 * 27.78 * 3.6 + 4.575);
  EXPECT_NEAR(r.aero, aero, 1e-9);
  EXPECT_NEAR(r.rolling, rolling, 1e-9);
  EXPECT_NEAR(r.aero, 304.5, 0.1);
  EXPECT_NEAR(r.rolling, 202.2, 0.1);
  EXPECT_EQ(r.grade, 0.0);
}

TEST(Resistance, Grade) {
  VehicleParams p;
  EXPECT_NEAR(resistance_forces(p, 10.0, {0.05}).grade, 735.495, 1e-3);
}

TEST(Resistance, AeroIsQuadratic) {
  VehicleParams p;
  for (double v : {0.5, 3.0, 13.89, 27.78, 40.0})
    EXPECT_NEAR(aero_resistance(p, 2.0 * v), 4.0 * aero_resistance(p, v), 1e-12 * aero_resistance(p, 2.0 * v));
}

TEST(Envelope, NoKinematicDemand) {
  VehicleParams p;
  EXPECT_EQ(accel_envelope(p, 20.0, {}, 0.0).a_collision, 0.0);
}

TEST(Envelope, FreeFlowValues) {
  VehicleParams p;
  const auto env = accel_envelope(p, 27.78, {}, 5.0);
  const double expect_max = (135000.0 / 27.78 - 0.5 * 1.2256 * 0.28 * 2.3 * 27.78 * 27.78 -
                             1500.0 * g * 1.75 / 1000.0 * (0.0328 * 100.008 + 4.575)) /
                            1500.0;
  EXPECT_NEAR(env.a_max, expect_max, 1e-9);
  EXPECT_NEAR(env.a_max, 2.902, 1e-3);
  EXPECT_NEAR(env.a_min, -g * 0.6 * 0.9, 1e-12);
  EXPECT_NEAR(env.a_min, -5.296, 1e-3);
  EXPECT_NEAR(env.a_collision, -25.0 / 3.0, 1e-12);
}

TEST(Envelope, DegenerateDowngradeThrows) {
  VehicleParams p;
  EXPECT_THROW(accel_envelope(p, 10.0, {-0.4}, 1.0), ModelError);
}

TEST(Envelope, CollisionZeroIffNoKinematicDemand) {
  VehicleParams p;
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> b(0.0, 10.0), grade(-0.2, 0.2);
  for (int i = 0; i < 500; ++i) {
    const double bk = i % 5 == 0 ? 0.0 : b(rng);
    const double ac = accel_envelope(p, 15.0, {grade(rng)}, bk).a_collision;
    EXPECT_LE(ac, 0.0);
    EXPECT_EQ(ac == 0.0, bk == 0.0);
  }
}

TEST(KinematicDecel, EqualSpeeds) { EXPECT_EQ(kinematic_decel(0.0, 20.0, 60.0, 20.0, 5.0), 0.0); }

TEST(KinematicDecel, Closing) { EXPECT_DOUBLE_EQ(kinematic_decel(0.0, 30.0, 55.0, 20.0, 5.0), 5.0); }

TEST(KinematicDecel, Opening) { EXPECT_EQ(kinematic_decel(0.0, 20.0, 55.0, 30.0, 5.0), 0.0); }

TEST(KinematicDecel, OverlapThrows) { EXPECT_THROW(kinematic_decel(0.0, 20.0, 5.0, 10.0, 5.0), ModelError); }

TEST(KinematicDecel, MatchesPiecewiseForm) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> v(0.0, 40.0), gap(0.1, 200.0);
  for (int i = 0; i < 2000; ++i) {
    const double vn = v(rng), vl = v(rng), s = gap(rng);
    const double got = kinematic_decel(0.0, vn, s + 5.0, vl, 5.0);
    if (vn > vl) {
      const double want = (vn * vn - vl * vl) / (2.0 * s);
      EXPECT_NEAR(got, want, 1e-12 * want);
    } else {
      EXPECT_EQ(got, 0.0);
    }
  }
}

TEST(ClampAccel, InteriorPoint) {
  const auto r = clamp_accel(1.0, {2.902, -5.296, 0.0});
  EXPECT_EQ(r.accel, 1.0);
  EXPECT_FALSE(r.infeasible);
}

TEST(ClampAccel, CappedAtMax) { EXPECT_EQ(clamp_accel(5.0, {2.902, -5.296, 0.0}).accel, 2.902); }

TEST(ClampAccel, InfeasibleOrdering) {
  const auto r = clamp_accel(-1.0, {2.902, -5.296, -25.0 / 3.0});
  EXPECT_EQ(r.accel, -5.296);
  EXPECT_TRUE(r.infeasible);
}

TEST(ClampAccel, BrakesAtLeastCollisionDemand) {
  const auto r = clamp_accel(-0.5, {2.0, -5.0, -2.0});
  EXPECT_EQ(r.accel, -2.0);
  EXPECT_FALSE(r.infeasible);
}

TEST(ClampAccel, OutputStaysInRange) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> cand(-15.0, 15.0), amax(-1.0, 4.0), amin(-8.0, 0.0), acol(-10.0, 0.0);
  for (int i = 0; i < 5000; ++i) {
    AccelEnvelope env{amax(rng), amin(rng), i % 3 == 0 ? 0.0 : acol(rng)};
    const double c = cand(rng);
    const auto r = clamp_accel(c, env);
    EXPECT_GE(r.accel, env.a_min);
    EXPECT_LE(r.accel, std::max(env.a_max, 0.0));
    if (c <= 0.0 && env.a_collision >= env.a_min) {
      EXPECT_LE(r.accel, env.a_collision);
    }
  }
}

TEST(Params, DefaultsAreValid) { EXPECT_TRUE(params_problems(VehicleParams{}).empty()); }

TEST(Params, RejectsBadValues) {
  VehicleParams p;
  p.tractive_axle_mass_kg = 2000.0;
  p.driveline_efficiency = 1.2;
  p.desired_decel = 0.0;
  EXPECT_EQ(params_problems(p).size(), 3u);
}

}  // namespace
