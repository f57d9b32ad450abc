#include <gtest/gtest.h>

#include "trackbc/course.hpp"
#include "trackbc/sim.hpp"

using namespace trackbc;

namespace {

SimConfig noiseless() {
  SimConfig c;
  c.imu_noise = 0.0;
  c.sonar_noise = 0.0;
  return c;
}

ScenarioSpec corridor(double wall = 300.0) { return course::empty_corridor(wall); }

SimState run(const ScenarioSpec& spec, SimState s, MotorCommand m, int arm, int ticks, const SimConfig& c = {}) {
  for (int i = 0; i < ticks; ++i) s = sim_step(spec, s, m, arm, c);
  return s;
}

const MotorCommand kForward{1, 1};
const MotorCommand kStop{0, 0};

}  // namespace

TEST(Scenario, EmptyCorridorHasNoFeatures) {
  const auto s = load_scenario(R"({"corridor_length": 360, "wall_position": 300})");
  EXPECT_TRUE(s.obstacles.empty());
  EXPECT_FALSE(s.stair);
  EXPECT_TRUE(s.perturbations.empty());
  EXPECT_EQ(s.wall_position, 300.0);
}

TEST(Scenario, DemoCourseWithStairIsValid) {
  const auto s = load_scenario(R"({
    "corridor_length": 400,
    "obstacles": [
      {"position": 40, "height": 3, "length": 3},
      {"position": 80, "height": 2.5, "length": 3},
      {"position": 120, "height": 10, "length": 3},
      {"position": 160, "height": 3.5, "length": 3}],
    "stair": {"position": 220, "n_steps": 3, "step_height": 8, "step_depth": 15},
    "wall_position": 320,
    "perturbations": [{"time": 8, "kind": "push_left", "magnitude": 35}],
    "slip": {"enabled": true, "yaw_drift_scale": 4, "speed_loss": 0.2},
    "seed": 3})");
  EXPECT_EQ(s.obstacles.size(), 4u);
  ASSERT_TRUE(s.stair);
  EXPECT_EQ(s.stair->n_steps, 3);
}

TEST(Scenario, OverlapAndOrderingAreNamed) {
  try {
    load_scenario(R"({"corridor_length": 300, "wall_position": 250,
      "obstacles": [{"position": 50, "height": 3, "length": 10}, {"position": 55, "height": 3, "length": 5}]})");
    FAIL();
  } catch (const DomainError& e) {
    EXPECT_NE(std::string(e.what()).find("overlap"), std::string::npos);
  }
  try {
    load_scenario(R"({"corridor_length": 300, "wall_position": 250,
      "obstacles": [{"position": 90, "height": 3, "length": 5}, {"position": 50, "height": 3, "length": 5}]})");
    FAIL();
  } catch (const DomainError& e) {
    EXPECT_NE(std::string(e.what()).find("ordering"), std::string::npos);
  }
  EXPECT_THROW(load_scenario(R"({"corridor_length": 300, "wall_position": 50,
      "obstacles": [{"position": 90, "height": 3, "length": 5}]})"),
               DomainError);
}

TEST(Scenario, ParseErrorsNameTheField) {
  try {
    load_scenario(R"({"corridor_length": 300, "wall_position": 250, "colour": 1})");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("colour"), std::string::npos);
  }
  try {
    load_scenario(R"({"corridor_length": "far", "wall_position": 250})");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("corridor_length"), std::string::npos);
  }
  EXPECT_THROW(load_scenario("{not json"), ParseError);
}

TEST(Scenario, TextRoundTrip) {
  for (const auto& seg : course::named_segments()) {
    EXPECT_EQ(load_scenario(scenario_to_text(seg.scenario)), seg.scenario) << seg.name;
  }
  const auto r = course::random_course(4);
  EXPECT_EQ(load_scenario(scenario_to_text(r)), r);
}

TEST(Sim, InitialPose) {
  const auto spec = course::first_demo().scenario;
  const SimState s = sim_init(spec);
  EXPECT_EQ(s.x, 0.0);
  EXPECT_EQ(s.yaw, 0.0);
  EXPECT_EQ(s.pitch, 0.0);
  EXPECT_EQ(s.roll, 0.0);
  EXPECT_EQ(s.arm_pose, ArmPose::Middle);
  EXPECT_EQ(s.fallen, Fallen::None);
  EXPECT_EQ(s.t(), 0.0);
  EXPECT_EQ(sim_init(spec), sim_init(spec));
  auto other = spec;
  other.seed += 1;
  const SimState o = sim_init(other);
  EXPECT_EQ(o.x, s.x);
  EXPECT_EQ(o.yaw, s.yaw);
  EXPECT_EQ(o.pitch, s.pitch);
}

TEST(Sim, ForwardOnFlatGroundAtBaseSpeed) {
  const auto spec = corridor();
  const SimConfig c;
  const SimState s = run(spec, sim_init(spec), kForward, 0, 100);
  EXPECT_NEAR(s.x, c.base_speed * 1.0, 1e-9);
  EXPECT_EQ(s.yaw, 0.0);
  EXPECT_NEAR(s.t(), 1.0, 1e-12);
}

TEST(Sim, SpinLeftDecreasesYawInPlace) {
  const auto spec = corridor();
  const SimConfig c;
  const SimState s = run(spec, sim_init(spec), mix_motors(0, -1), 0, 100);
  EXPECT_NEAR(s.yaw, -c.yaw_rate_full, 1e-9);
  EXPECT_EQ(s.x, 0.0);
  const SimState r = run(spec, sim_init(spec), mix_motors(0, 1), 0, 100);
  EXPECT_NEAR(r.yaw, c.yaw_rate_full, 1e-9);
}

TEST(Sim, FullTurnMatchesSteeringDuration) {
  // 90 degrees of yaw error takes 2.1 s of full differential.
  const auto spec = corridor();
  const SimState s = run(spec, sim_init(spec), mix_motors(0, 1), 0, 210);
  EXPECT_NEAR(s.yaw, 90.0, 1e-9);
}

TEST(Sim, ArmPrimitiveTimingAndBusyLockout) {
  const auto spec = corridor();
  SimState s = sim_init(spec);
  s = run(spec, s, kStop, 1, 1);
  EXPECT_TRUE(s.arm_busy());
  s = run(spec, s, kStop, 4, 98);  // ignored while busy
  EXPECT_EQ(s.arm_pose, ArmPose::Middle);
  s = run(spec, s, kStop, 4, 1);
  EXPECT_NEAR(s.t(), 1.0, 1e-12);
  EXPECT_EQ(s.arm_pose, ArmPose::Back);
  EXPECT_FALSE(s.arm_busy());
}

TEST(Sim, PrimitiveDurations) {
  const auto spec = corridor();
  const SimConfig c;
  struct Case {
    int arm;
    double seconds;
  };
  for (const auto& [arm, seconds] : {Case{1, 1.0}, Case{4, 5.0}}) {
    SimState s = sim_init(spec);
    s = sim_step(spec, s, kStop, arm, c);
    EXPECT_NEAR(s.arm_busy_until_s(), seconds, 1e-12) << arm;
  }
  SimState s = run(spec, sim_init(spec), kStop, 1, 100);
  s = sim_step(spec, s, kStop, 0, c);
  EXPECT_NEAR(s.arm_busy_until_s() - 1.0, 1.0, 1e-12);
}

TEST(Sim, Perturbations) {
  const auto spec = corridor();
  const SimConfig c;
  const SimState up = sim_init(spec);
  const SimState left = apply_perturbation(spec, up, PerturbationKind::PushLeft, 30.0);
  EXPECT_EQ(left.fallen, Fallen::Left);
  EXPECT_LE(left.roll, -c.roll_fall_threshold);
  const SimState right = apply_perturbation(spec, up, PerturbationKind::PushRight, 30.0);
  EXPECT_EQ(right.fallen, Fallen::Right);
  EXPECT_GE(right.roll, c.roll_fall_threshold);
  EXPECT_EQ(apply_perturbation(spec, up, PerturbationKind::YawKick, 45.0).yaw, 45.0);
  EXPECT_EQ(apply_perturbation(spec, left, PerturbationKind::PushRight, 30.0), left);
}

TEST(Sim, FallenRobotOnlyRecoversWithMatchingPrimitive) {
  const auto spec = corridor();
  SimState s = apply_perturbation(spec, sim_init(spec), PerturbationKind::PushLeft, 30.0);
  s = run(spec, s, kForward, 0, 50);
  EXPECT_EQ(s.x, 0.0);
  EXPECT_EQ(s.fallen, Fallen::Left);

  SimState wrong = run(spec, s, kStop, 3, 200);
  EXPECT_EQ(wrong.fallen, Fallen::Left);

  const double start = s.t();
  s = run(spec, s, kStop, 2, 199);
  EXPECT_EQ(s.fallen, Fallen::Left);
  s = run(spec, s, kStop, 2, 1);
  EXPECT_NEAR(s.t() - start, 2.0, 1e-12);
  EXPECT_EQ(s.fallen, Fallen::None);
  EXPECT_EQ(s.roll, 0.0);
  EXPECT_EQ(s.recoveries, 1);
  EXPECT_EQ(s.yaw, -30.0);  // heading offset survives recovery
}

TEST(Sim, ClimbingRules) {
  auto spec = corridor();
  const SimConfig c;
  auto with_obstacle = [&](double h) {
    auto s = spec;
    s.obstacles = {{50.0, h, 5.0}};
    return s;
  };
  // Small: passes without the arm.
  {
    const auto sp = with_obstacle(3.0);
    const SimState s = run(sp, sim_init(sp), kForward, 0, 600);
    EXPECT_GT(s.x, 60.0);
  }
  // Large: blocked without the arm, passes with it held back.
  {
    const auto sp = with_obstacle(9.0);
    const SimState blocked = run(sp, sim_init(sp), kForward, 0, 600);
    EXPECT_LT(blocked.x + c.robot_length, 50.0 + 1e-3);
    SimState s = run(sp, sim_init(sp), kStop, 1, 100);
    s = run(sp, s, kForward, 1, 600);
    EXPECT_GT(s.x, 60.0);
  }
  // Taller than the assisted limit: blocked either way.
  {
    const auto sp = with_obstacle(15.0);
    SimState s = run(sp, sim_init(sp), kStop, 1, 100);
    s = run(sp, s, kForward, 1, 600);
    EXPECT_LT(s.x + c.robot_length, 50.0 + 1e-3);
  }
  // Stair steps need the arm.
  {
    auto sp = spec;
    sp.stair = Stair{60.0, 3, 7.0, 15.0};
    const SimState blocked = run(sp, sim_init(sp), kForward, 0, 800);
    EXPECT_LT(blocked.x + c.robot_length, 60.0 + 1e-3);
    SimState s = run(sp, sim_init(sp), kStop, 1, 100);
    s = run(sp, s, kForward, 1, 1200);
    EXPECT_GT(s.x, 60.0 + 2 * 15.0);
  }
}

TEST(Sim, SmallObstacleSlowsAndPitches) {
  auto spec = corridor();
  spec.obstacles = {{30.0, 3.0, 4.0}};
  spec.slip = SlipConfig{};
  const SimConfig c;
  SimState s = sim_init(spec);
  double max_pitch = 0.0;
  int ticks_on = 0;
  while (s.x < 50.0) {
    s = sim_step(spec, s, kForward, 0, c);
    max_pitch = std::max(max_pitch, s.pitch);
    ticks_on += s.on_feature ? 1 : 0;
  }
  EXPECT_GT(max_pitch, 5.0);
  // Footprint spans an edge for (length + obstacle) cm at half speed.
  EXPECT_NEAR(ticks_on * kPhysicsDt, 2 * (c.robot_length + 4.0) / c.base_speed, 0.05);
}

TEST(Sensors, SonarRanges) {
  const SimConfig c = noiseless();
  auto spec = corridor(300.0);
  SimState s = sim_init(spec, c);
  s.x = 300.0 - 100.0 - c.robot_length;
  EXPECT_NEAR(sonar_range(spec, s, c), 100.0, 1e-9);

  auto low = corridor(200.0 + c.robot_length);
  low.obstacles = {{50.0, 10.0, 5.0}};
  const SimState start = sim_init(low, c);
  EXPECT_NEAR(sonar_range(low, start, c), 200.0, 1e-9);

  auto tall = low;
  tall.obstacles = {{50.0, 30.0, 5.0}};
  EXPECT_NEAR(sonar_range(tall, start, c), 50.0 - c.robot_length, 1e-9);
}

TEST(Sensors, SonarIsMonotoneDrivingAtTheWall) {
  const SimConfig c = noiseless();
  auto spec = corridor(250.0);
  spec.obstacles = {{60.0, 3.0, 4.0}, {120.0, 2.0, 3.0}};
  SimState s = sim_init(spec, c);
  double prev = sonar_range(spec, s, c);
  for (int i = 0; i < 1500; ++i) {
    s = sim_step(spec, s, kForward, 0, c);
    const double d = sonar_range(spec, s, c);
    EXPECT_LE(d, prev + 1e-9);
    prev = d;
  }
}

TEST(Sensors, RatesAndNoiseFreeTruth) {
  const SimConfig c = noiseless();
  auto spec = corridor();
  Simulator sim(spec, c);
  const SensorFrame first = sim.sense();
  EXPECT_EQ(first.imu.size(), 1u);
  EXPECT_EQ(first.sonar.size(), 1u);
  std::size_t imu = 0, sonar = 0;
  for (int k = 0; k < 10; ++k) {
    const SensorFrame f = sim.advance(kForward, 0);
    imu += f.imu.size();
    sonar += f.sonar.size();
    for (const auto& smp : f.imu) EXPECT_EQ(smp.yaw, 0.0);
  }
  EXPECT_EQ(imu, 30u);
  EXPECT_EQ(sonar, 20u);
  EXPECT_NEAR(sim.advance(kStop, 0, 5).sonar.back().value, sim.wall_distance(), 1e-9);
}

TEST(Sim, IdleIsAFixedPoint) {
  for (const auto& seg : course::named_segments()) {
    auto spec = seg.scenario;
    spec.perturbations.clear();
    SimState s = sim_init(spec);
    s = run(spec, s, kForward, 0, 137);
    const SimState after = run(spec, s, kStop, 0, 300);
    SimState cmp = after;
    cmp.tick = s.tick;
    EXPECT_EQ(cmp, s) << seg.name;
  }
}

TEST(Sim, DeterministicTrajectoriesAndSensors) {
  const auto spec = course::first_demo().scenario;
  Simulator a(spec), b(spec);
  EXPECT_EQ(a.sense().sonar[0].value, b.sense().sonar[0].value);
  for (int k = 0; k < 300; ++k) {
    const MotorCommand m = mix_motors(k % 7 == 0 ? 0 : 1, k % 11 == 0 ? 1 : 0);
    const int arm = (k / 40) % 2;
    const SensorFrame fa = a.advance(m, arm);
    const SensorFrame fb = b.advance(m, arm);
    ASSERT_EQ(fa.imu.size(), fb.imu.size());
    for (std::size_t i = 0; i < fa.imu.size(); ++i) {
      EXPECT_EQ(fa.imu[i].yaw, fb.imu[i].yaw);
      EXPECT_EQ(fa.imu[i].roll, fb.imu[i].roll);
    }
    ASSERT_EQ(a.state(), b.state());
  }
}

TEST(Sim, ScheduledPerturbationsFire) {
  const auto spec = course::falls_demo().scenario;
  Simulator sim(spec);
  bool fell = false;
  for (int k = 0; k < 120 && !fell; ++k) {
    sim.advance(kStop, 0);
    fell = sim.state().fallen != Fallen::None;
  }
  EXPECT_TRUE(fell);
  EXPECT_EQ(sim.state().falls, 1);
}
