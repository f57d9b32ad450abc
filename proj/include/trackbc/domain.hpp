#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "trackbc/error.hpp"

namespace trackbc {

inline constexpr int kNumActions = 45;
inline constexpr int kIdleActionId = 4;

enum class ArmPose : int {
  Middle = 0,
  Back = 1,
  RecoverLeft = 2,
  RecoverRight = 3,
  Delivery = 4,
};

inline const char* arm_pose_name(ArmPose p) {
  switch (p) {
    case ArmPose::Middle: return "middle";
    case ArmPose::Back: return "back";
    case ArmPose::RecoverLeft: return "recover_left";
    case ArmPose::RecoverRight: return "recover_right";
    case ArmPose::Delivery: return "delivery";
  }
  return "unknown";
}

// One command on each of the three control channels.
//   arm:      0 middle, 1 back, 2 recover-left, 3 recover-right, 4 delivery
//   steering: -1 left, 0 idle, 1 right
//   movement: -1 backward, 0 stop, 1 forward
struct ActionTriple {
  int arm = 0;
  int steering = 0;
  int movement = 0;

  friend bool operator==(const ActionTriple&, const ActionTriple&) = default;
};

inline constexpr ActionTriple kIdle{0, 0, 0};

// Index of a motion primitive in [0, 44].
struct ActionId {
  int value = kIdleActionId;

  friend bool operator==(const ActionId&, const ActionId&) = default;
  friend auto operator<=>(const ActionId&, const ActionId&) = default;
};

struct MotorCommand {
  int left = 0;
  int right = 0;

  friend bool operator==(const MotorCommand&, const MotorCommand&) = default;
};

// Filtered sensor sample at the control rate. Angles in degrees, distance in
// centimeters.
struct Observation {
  double yaw = 0.0;
  double pitch = 0.0;
  double roll = 0.0;
  double distance = 0.0;

  friend bool operator==(const Observation&, const Observation&) = default;

  std::array<double, 4> as_array() const { return {yaw, pitch, roll, distance}; }
};

inline bool is_valid(const Observation& o) {
  return std::isfinite(o.yaw) && std::isfinite(o.pitch) && std::isfinite(o.roll) &&
         std::isfinite(o.distance) && o.distance >= 0.0;
}

using OneHot45 = std::array<double, kNumActions>;

inline void check_triple(const ActionTriple& a) {
  if (a.arm < 0 || a.arm > 4) {
    throw DomainError("arm channel out of range [0,4]: " + std::to_string(a.arm));
  }
  if (a.steering < -1 || a.steering > 1) {
    throw DomainError("steering channel out of range [-1,1]: " + std::to_string(a.steering));
  }
  if (a.movement < -1 || a.movement > 1) {
    throw DomainError("movement channel out of range [-1,1]: " + std::to_string(a.movement));
  }
}

inline bool is_valid(const ActionTriple& a) {
  return a.arm >= 0 && a.arm <= 4 && a.steering >= -1 && a.steering <= 1 &&
         a.movement >= -1 && a.movement <= 1;
}

inline void check_action_id(int id) {
  if (id < 0 || id >= kNumActions) {
    throw DomainError("action id out of range [0,44]: " + std::to_string(id));
  }
}

inline ActionId encode_action(const ActionTriple& a) {
  check_triple(a);
  return ActionId{a.arm * 9 + (a.steering + 1) * 3 + a.movement + 1};
}

inline ActionTriple decode_action(ActionId id) {
  check_action_id(id.value);
  const int arm = id.value / 9;
  const int rest = id.value % 9;
  return ActionTriple{arm, rest / 3 - 1, rest % 3 - 1};
}

inline MotorCommand mix_motors(int movement, int steering) {
  if (movement < -1 || movement > 1) {
    throw DomainError("movement channel out of range [-1,1]: " + std::to_string(movement));
  }
  if (steering < -1 || steering > 1) {
    throw DomainError("steering channel out of range [-1,1]: " + std::to_string(steering));
  }
  return MotorCommand{std::clamp(movement + steering, -1, 1),
                      std::clamp(movement - steering, -1, 1)};
}

inline OneHot45 to_one_hot(ActionId id) {
  check_action_id(id.value);
  OneHot45 v{};
  v[static_cast<std::size_t>(id.value)] = 1.0;
  return v;
}

inline bool is_idle(const ActionTriple& a) { return a == kIdle; }

inline std::string to_string(const ActionTriple& a) {
  return "(" + std::to_string(a.arm) + "," + std::to_string(a.steering) + "," +
         std::to_string(a.movement) + ")";
}

}  // namespace trackbc
