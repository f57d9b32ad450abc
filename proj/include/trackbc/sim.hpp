#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <vector>

#include "trackbc/domain.hpp"
#include "trackbc/scenario.hpp"
#include "trackbc/signal.hpp"

namespace trackbc {

// Model constants of the corridor simulator. Speeds are in cm/s, angles in
// degrees, durations in seconds.
struct SimConfig {
  double base_speed = 20.0;
  double yaw_rate_full = 90.0 / 2.1;  // under full differential (-1, 1)
  double robot_length = 10.0;
  double h_small = 4.0;   // climbable without the arm
  double h_assist = 12.0; // climbable with the arm held back
  double feature_speed_factor = 0.5;
  double roll_fall_threshold = 60.0;
  double fallen_roll = 90.0;
  double contact_pitch = 5.0;
  double contact_gap = 0.5;
  double arm_pitch_back = 3.0;
  double arm_pitch_delivery = -4.0;
  double arm_back_duration = 1.0;
  double arm_middle_duration = 1.0;
  double recovery_duration = 2.0;
  double delivery_duration = 5.0;
  double delivery_reach = 20.0;
  double sonar_height = 25.0;
  double sonar_max_range = 450.0;
  double imu_noise = 0.5;
  double sonar_noise = 1.0;
};

inline constexpr int kPhysicsHz = 100;
inline constexpr int kControlHz = 10;
inline constexpr int kTicksPerControl = kPhysicsHz / kControlHz;
inline constexpr double kPhysicsDt = 1.0 / kPhysicsHz;

enum class Fallen { None, Left, Right };

inline const char* fallen_name(Fallen f) {
  switch (f) {
    case Fallen::None: return "none";
    case Fallen::Left: return "left";
    case Fallen::Right: return "right";
  }
  return "unknown";
}

struct SimState {
  std::int64_t tick = 0;  // physics ticks since start
  double x = 0.0;         // rear of the tracks, cm along the corridor
  double lateral = 0.0;
  double yaw = 0.0;
  double pitch = 0.0;
  double roll = 0.0;
  Fallen fallen = Fallen::None;

  ArmPose arm_pose = ArmPose::Middle;    // settled pose
  ArmPose arm_target = ArmPose::Middle;  // pose of the running primitive
  std::int64_t arm_start = 0;
  std::int64_t arm_busy_until = 0;

  bool touching = false;    // nose resting against a face taller than h_small
  bool on_feature = false;  // footprint spans a height change
  double drift_rate = 0.0;  // deg/s yaw drift while on the current feature

  std::size_t next_perturbation = 0;
  int falls = 0;
  int recoveries = 0;
  bool delivered = false;

  std::mt19937_64 rng;

  double t() const { return static_cast<double>(tick) * kPhysicsDt; }
  double arm_busy_until_s() const { return static_cast<double>(arm_busy_until) * kPhysicsDt; }
  bool arm_busy() const { return arm_busy_until > tick; }

  friend bool operator==(const SimState&, const SimState&) = default;
};

// Piecewise-constant height profile of the corridor floor.
class Terrain {
 public:
  Terrain() = default;
  explicit Terrain(const ScenarioSpec& spec) : spec_(&spec) {
    for (const auto& o : spec.obstacles) {
      edges_.push_back(o.position);
      edges_.push_back(o.position + o.length);
    }
    if (spec.stair) {
      for (int i = 0; i < spec.stair->n_steps; ++i) {
        edges_.push_back(spec.stair->position + i * spec.stair->step_depth);
      }
    }
    std::sort(edges_.begin(), edges_.end());
  }

  double height(double x) const {
    double h = 0.0;
    for (const auto& o : spec_->obstacles) {
      if (x >= o.position && x < o.position + o.length) h = std::max(h, o.height);
    }
    if (spec_->stair && x >= spec_->stair->position) {
      const auto& s = *spec_->stair;
      const int step = std::min(s.n_steps, static_cast<int>(std::floor((x - s.position) / s.step_depth)) + 1);
      h = std::max(h, step * s.step_height);
    }
    return h;
  }

  // Maximum floor height over the closed interval [a, b].
  double max_height(double a, double b) const {
    double h = height(a);
    for (double e : edges_) {
      if (e > a && e <= b) h = std::max(h, height(e));
    }
    return h;
  }

  bool flat(double a, double b) const {
    for (double e : edges_) {
      if (e > a && e <= b) return false;
    }
    return true;
  }

  const std::vector<double>& edges() const { return edges_; }

 private:
  const ScenarioSpec* spec_ = nullptr;
  std::vector<double> edges_;
};

inline constexpr double kEdgeEps = 1e-7;
inline constexpr double kBlockGap = 1e-4;

namespace detail {

inline double deg2rad(double d) { return d * std::numbers::pi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / std::numbers::pi; }

inline std::int64_t duration_ticks(double seconds) {
  return static_cast<std::int64_t>(std::llround(seconds * kPhysicsHz));
}

inline double arm_pitch(ArmPose p, const SimConfig& c) {
  switch (p) {
    case ArmPose::Back: return c.arm_pitch_back;
    case ArmPose::Delivery: return c.arm_pitch_delivery;
    default: return 0.0;
  }
}

inline ArmPose settled_pose(ArmPose target) {
  return (target == ArmPose::RecoverLeft || target == ArmPose::RecoverRight) ? ArmPose::Middle : target;
}

inline double primitive_duration(ArmPose target, const SimConfig& c) {
  switch (target) {
    case ArmPose::Middle: return c.arm_middle_duration;
    case ArmPose::Back: return c.arm_back_duration;
    case ArmPose::RecoverLeft:
    case ArmPose::RecoverRight: return c.recovery_duration;
    case ArmPose::Delivery: return c.delivery_duration;
  }
  return 0.0;
}

inline double arm_progress(const SimState& s) {
  if (!s.arm_busy()) return 1.0;
  const double total = static_cast<double>(s.arm_busy_until - s.arm_start);
  return total > 0 ? static_cast<double>(s.tick - s.arm_start) / total : 1.0;
}

inline bool recovering_matching(const SimState& s) {
  return s.arm_busy() && ((s.fallen == Fallen::Left && s.arm_target == ArmPose::RecoverLeft) ||
                          (s.fallen == Fallen::Right && s.arm_target == ArmPose::RecoverRight));
}

}  // namespace detail

// True if the nose is within contact_gap of a face rising more than h_small.
inline bool touching_face(const Terrain& terrain, const SimState& s, const SimConfig& c) {
  const double front = s.x + c.robot_length;
  const double here = terrain.height(front);
  for (double e : terrain.edges()) {
    if (e > front && e <= front + c.contact_gap && terrain.height(e) - here > c.h_small) return true;
  }
  return false;
}

inline double wall_distance(const ScenarioSpec& spec, const SimState& s, const SimConfig& c) {
  return std::max(0.0, spec.wall_position - (s.x + c.robot_length));
}

// Recomputes pitch, roll and the contact flags from the pose.
inline void refresh_attitude(const ScenarioSpec& spec, SimState& s, const SimConfig& c) {
  const Terrain terrain(spec);
  const double L = c.robot_length;
  s.on_feature = !terrain.flat(s.x, s.x + L);
  s.touching = touching_face(terrain, s, c);
  const double front_h = terrain.max_height(s.x + L / 2, s.x + L);
  const double rear_h = terrain.max_height(s.x, s.x + L / 2);
  double pitch = detail::rad2deg(std::atan2(front_h - rear_h, L));
  if (s.touching) pitch += c.contact_pitch;
  const double from = detail::arm_pitch(s.arm_pose, c);
  const double to = detail::arm_pitch(detail::settled_pose(s.arm_busy() ? s.arm_target : s.arm_pose), c);
  const double p = detail::arm_progress(s);
  pitch += from + (to - from) * p;
  s.pitch = pitch;

  if (s.fallen == Fallen::None) {
    s.roll = 0.0;
  } else {
    const double sign = s.fallen == Fallen::Left ? -1.0 : 1.0;
    double mag = c.fallen_roll;
    if (detail::recovering_matching(s)) mag -= (c.fallen_roll - c.roll_fall_threshold) * p;
    s.roll = sign * mag;
  }
}

inline SimState sim_init(const ScenarioSpec& spec, const SimConfig& c = {}) {
  SimState s;
  s.rng.seed(spec.seed);
  refresh_attitude(spec, s, c);
  return s;
}

inline SimState apply_perturbation(const ScenarioSpec& spec, SimState s, PerturbationKind kind, double magnitude,
                                   const SimConfig& c = {}) {
  switch (kind) {
    case PerturbationKind::PushLeft:
    case PerturbationKind::PushRight:
      if (s.fallen != Fallen::None) return s;
      s.fallen = kind == PerturbationKind::PushLeft ? Fallen::Left : Fallen::Right;
      s.yaw += kind == PerturbationKind::PushLeft ? -magnitude : magnitude;
      ++s.falls;
      break;
    case PerturbationKind::YawKick:
      s.yaw += magnitude;
      break;
  }
  refresh_attitude(spec, s, c);
  return s;
}

namespace detail {

inline bool perturbation_ready(const SimState& s) {
  return s.fallen == Fallen::None && !s.arm_busy() && s.arm_pose == ArmPose::Middle && !s.on_feature &&
         !s.touching;
}

// Moves the nose forward by up to dx, stopping at the first face the robot
// cannot mount. Returns the distance actually travelled.
inline double advance_forward(const Terrain& terrain, const ScenarioSpec& spec, const SimState& s, double dx,
                              const SimConfig& c) {
  const double front = s.x + c.robot_length;
  double target = std::min(front + dx, spec.wall_position);
  const bool arm_ready = s.arm_pose == ArmPose::Back && !s.arm_busy();
  double level = terrain.height(front);
  for (double e : terrain.edges()) {
    if (e <= front || e > target) continue;
    const double rise = terrain.height(e) - level;
    const bool ok = rise <= c.h_small || (rise <= c.h_assist && arm_ready);
    if (!ok) {
      target = std::max(front, e - kBlockGap);
      break;
    }
    level = terrain.height(e);
  }
  return std::max(0.0, target - front);
}

inline double advance_backward(const Terrain& terrain, const SimState& s, double dx, const SimConfig& c) {
  double target = std::max(0.0, s.x - dx);
  const auto& edges = terrain.edges();
  for (auto it = edges.rbegin(); it != edges.rend(); ++it) {
    const double e = *it;
    if (e > s.x || e <= target) continue;
    const double rise = terrain.height(e - kEdgeEps) - terrain.height(e);
    if (rise > c.h_assist) {
      target = std::min(s.x, e + kBlockGap);
      break;
    }
  }
  return std::max(0.0, s.x - target);
}

}  // namespace detail

// One 0.01 s physics tick.
inline SimState sim_step(const ScenarioSpec& spec, SimState s, MotorCommand motors, int arm, const SimConfig& c = {}) {
  const Terrain terrain(spec);

  // Arm: start a primitive unless one is running or the arm already rests in
  // the commanded pose.
  if (arm >= 0 && arm <= 4 && !s.arm_busy()) {
    const auto target = static_cast<ArmPose>(arm);
    if (target != s.arm_pose) {
      s.arm_target = target;
      s.arm_start = s.tick;
      s.arm_busy_until = s.tick + detail::duration_ticks(detail::primitive_duration(target, c));
    }
  }

  if (s.fallen == Fallen::None) {
    const double factor = s.on_feature ? c.feature_speed_factor : 1.0;
    double v = c.base_speed * 0.5 * (motors.left + motors.right) * factor;
    if (spec.slip.enabled && s.on_feature && v != 0.0) {
      std::uniform_real_distribution<double> u(0.0, 1.0);
      v *= 1.0 - spec.slip.speed_loss * u(s.rng);
    }
    s.yaw += c.yaw_rate_full * 0.5 * (motors.left - motors.right) * kPhysicsDt;
    if (spec.slip.enabled && s.on_feature && v > 0.0) s.yaw += s.drift_rate * kPhysicsDt;

    const double heading = detail::deg2rad(s.yaw);
    const double along = v * kPhysicsDt * std::cos(heading);
    double moved = 0.0;
    if (along > 0.0) {
      moved = detail::advance_forward(terrain, spec, s, along, c);
      s.x += moved;
    } else if (along < 0.0) {
      moved = -detail::advance_backward(terrain, s, -along, c);
      s.x += moved;
    }
    if (along != 0.0) s.lateral += v * kPhysicsDt * std::sin(heading) * (moved / along);
    s.x = std::clamp(s.x, 0.0, spec.corridor_length);

    const bool was_on_feature = s.on_feature;
    s.on_feature = !terrain.flat(s.x, s.x + c.robot_length);
    if (s.on_feature && !was_on_feature && spec.slip.enabled && v > 0.0) {
      std::uniform_real_distribution<double> u(-1.0, 1.0);
      s.drift_rate = u(s.rng) * spec.slip.yaw_drift_scale;
    }
  }

  ++s.tick;

  if (s.arm_busy_until == s.tick && s.arm_start < s.tick) {
    const ArmPose target = s.arm_target;
    if ((target == ArmPose::RecoverLeft && s.fallen == Fallen::Left) ||
        (target == ArmPose::RecoverRight && s.fallen == Fallen::Right)) {
      s.fallen = Fallen::None;
      ++s.recoveries;
    }
    if (target == ArmPose::Delivery && wall_distance(spec, s, c) <= c.delivery_reach) s.delivered = true;
    s.arm_pose = detail::settled_pose(target);
    s.arm_target = s.arm_pose;
  }

  refresh_attitude(spec, s, c);

  while (s.next_perturbation < spec.perturbations.size()) {
    const auto& p = spec.perturbations[s.next_perturbation];
    if (p.time > s.t() + kTimeEps || !detail::perturbation_ready(s)) break;
    s = apply_perturbation(spec, s, p.kind, p.magnitude, c);
    ++s.next_perturbation;
  }
  return s;
}

struct ImuSample {
  double t = 0.0;
  double yaw = 0.0;
  double pitch = 0.0;
  double roll = 0.0;
};

struct SensorFrame {
  std::vector<ImuSample> imu;
  std::vector<TimedSample> sonar;
};

// Noiseless range from the nose to the nearest surface standing taller than
// the sonar line, along the heading.
inline double sonar_range(const ScenarioSpec& spec, const SimState& s, const SimConfig& c) {
  const Terrain terrain(spec);
  const double front = s.x + c.robot_length;
  const double line = terrain.max_height(s.x, front) + c.sonar_height;
  const double cos_yaw = std::cos(detail::deg2rad(s.yaw));
  if (cos_yaw < std::cos(detail::deg2rad(85.0))) return c.sonar_max_range;
  double ahead = spec.wall_position - front;
  for (const auto& o : spec.obstacles) {
    if (o.position >= front && o.height > line) ahead = std::min(ahead, o.position - front);
  }
  if (spec.stair) {
    const auto& st = *spec.stair;
    for (int i = 0; i < st.n_steps; ++i) {
      const double face = st.position + i * st.step_depth;
      if (face >= front && (i + 1) * st.step_height > line) ahead = std::min(ahead, face - front);
    }
  }
  return std::min(c.sonar_max_range, std::max(0.0, ahead) / cos_yaw);
}

namespace detail {

// IMU sample j is stamped j/30 s and read from physics tick floor(10j/3).
inline bool imu_tick(std::int64_t tick, std::int64_t& j) {
  j = (3 * tick + 9) / 10;
  return (10 * j) / 3 == tick;
}

}  // namespace detail

inline void sample_state(const ScenarioSpec& spec, const SimState& s, const SimConfig& c, std::mt19937_64& noise,
                         SensorFrame& frame) {
  std::int64_t j = 0;
  if (detail::imu_tick(s.tick, j)) {
    std::normal_distribution<double> n(0.0, 1.0);
    const double ny = c.imu_noise > 0 ? c.imu_noise * n(noise) : 0.0;
    const double np = c.imu_noise > 0 ? c.imu_noise * n(noise) : 0.0;
    const double nr = c.imu_noise > 0 ? c.imu_noise * n(noise) : 0.0;
    frame.imu.push_back({static_cast<double>(j) / 30.0, s.yaw + ny, s.pitch + np, s.roll + nr});
  }
  if (s.tick % 5 == 0) {
    std::normal_distribution<double> n(0.0, 1.0);
    const double nd = c.sonar_noise > 0 ? c.sonar_noise * n(noise) : 0.0;
    const double d = std::clamp(sonar_range(spec, s, c) + nd, 0.0, c.sonar_max_range);
    frame.sonar.push_back({static_cast<double>(s.tick) / kPhysicsHz, d});
  }
}

// IMU samples at 30 Hz and sonar samples at 20 Hz over the given state
// trajectory (one state per physics tick).
inline SensorFrame read_sensors(const ScenarioSpec& spec, std::span<const SimState> states, const SimConfig& c,
                                std::mt19937_64& noise) {
  SensorFrame frame;
  for (const auto& s : states) sample_state(spec, s, c, noise, frame);
  return frame;
}

inline std::uint64_t noise_seed(std::uint64_t scenario_seed) { return scenario_seed ^ 0x9e3779b97f4a7c15ULL; }

// Single-owner simulation session: state, sensor noise stream and the
// sampling clock.
class Simulator {
 public:
  explicit Simulator(ScenarioSpec spec, SimConfig config = {})
      : spec_(std::move(spec)), config_(config) {
    validate(spec_);
    reset();
  }

  void reset() {
    state_ = sim_init(spec_, config_);
    noise_.seed(noise_seed(spec_.seed));
  }

  // Samples taken at the current tick (used once, at the start).
  SensorFrame sense() {
    SensorFrame frame;
    sample_state(spec_, state_, config_, noise_, frame);
    return frame;
  }

  // Holds the command for `ticks` physics ticks and returns every sensor
  // sample taken along the way.
  SensorFrame advance(MotorCommand motors, int arm, int ticks = kTicksPerControl) {
    SensorFrame frame;
    for (int i = 0; i < ticks; ++i) {
      state_ = sim_step(spec_, std::move(state_), motors, arm, config_);
      sample_state(spec_, state_, config_, noise_, frame);
    }
    return frame;
  }

  const SimState& state() const { return state_; }
  const ScenarioSpec& scenario() const { return spec_; }
  const SimConfig& config() const { return config_; }
  double wall_distance() const { return trackbc::wall_distance(spec_, state_, config_); }

 private:
  ScenarioSpec spec_;
  SimConfig config_;
  SimState state_;
  std::mt19937_64 noise_;
};

inline void feed(StreamConditioner& conditioner, const SensorFrame& frame) {
  for (const auto& s : frame.imu) conditioner.push_imu(s.t, s.yaw, s.pitch, s.roll);
  for (const auto& s : frame.sonar) conditioner.push_sonar(s.t, s.value);
}

}  // namespace trackbc
