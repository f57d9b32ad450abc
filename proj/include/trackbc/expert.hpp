#pragma once

#include <cmath>
#include <optional>

#include "trackbc/demo.hpp"
#include "trackbc/sim.hpp"

namespace trackbc {

struct ExpertConfig {
  ControllerKind kind = ControllerKind::Mobility;
  int lead_in_ticks = 24;  // idle ticks before acting, matches the controller warm-up
  double yaw_tol = 5.0;
  double wall_stop_distance = 3.0;
  int backoff_ticks = 20;  // manipulation: reverse this long after delivering
  int clear_ticks = 5;  // flat ticks with the arm back before retracting
  std::optional<double> stop_at;  // finish once the rear passes this x
  int tail_ticks = 3;
};

// Deterministic demonstrator with privileged access to the simulator state.
// Stands in for the human teleoperator. Every decision it takes is keyed to
// something the sensors also see (roll, pitch, sonar, yaw), so a policy over
// observation windows can imitate it.
class ScriptedExpert {
 public:
  explicit ScriptedExpert(ExpertConfig config = {}) : cfg_(config), lead_in_(config.lead_in_ticks) {}

  // Next command, or nothing once the demonstration is over.
  std::optional<ActionTriple> next(const SimState& s, const ScenarioSpec& spec, const SimConfig& sim) {
    if (lead_in_ > 0) {
      --lead_in_;
      return kIdle;
    }
    if (finished_) {
      if (tail_ <= 0) return std::nullopt;
      --tail_;
      return kIdle;
    }
    return decide(s, spec, sim);
  }

  bool finished() const { return finished_; }

  // Single decision from a state, ignoring lead-in and tail bookkeeping.
  ActionTriple decide(const SimState& s, const ScenarioSpec& spec, const SimConfig& sim) {
    if (s.fallen != Fallen::None) return issue({s.fallen == Fallen::Left ? 2 : 3, 0, 0});
    if (s.arm_busy()) return held_;
    if (s.arm_pose == ArmPose::Delivery) returning_ = true;
    if (returning_) {
      if (cfg_.kind == ControllerKind::Manipulation && ++backoff_ > cfg_.backoff_ticks) return finish();
      if (s.x <= 0.0) return finish();
      return {static_cast<int>(s.arm_pose), 0, -1};  // reverse, holding the arm where it is
    }
    const bool flat = !s.on_feature && !s.touching;
    if (s.arm_pose == ArmPose::Back) {
      flat_ticks_ = flat ? flat_ticks_ + 1 : 0;
      if (flat_ticks_ >= cfg_.clear_ticks) {
        flat_ticks_ = 0;
        return issue({0, 0, 1});  // retract while driving on
      }
      return {1, 0, 1};
    }
    if (s.touching) return issue({1, 0, 0});
    if (!s.on_feature && std::fabs(s.yaw) > cfg_.yaw_tol) return {0, s.yaw > 0 ? -1 : 1, 0};
    if (wall_distance(spec, s, sim) < cfg_.wall_stop_distance) return issue({4, 0, 0});
    if (cfg_.stop_at && s.x >= *cfg_.stop_at) return finish();
    return {0, 0, 1};
  }

 private:
  ActionTriple issue(ActionTriple a) {
    held_ = a;
    return a;
  }

  ActionTriple finish() {
    finished_ = true;
    tail_ = cfg_.tail_ticks - 1;
    return kIdle;
  }

  ExpertConfig cfg_;
  int lead_in_ = 0;
  int tail_ = 0;
  bool finished_ = false;
  bool returning_ = false;
  int backoff_ = 0;
  int flat_ticks_ = 0;
  ActionTriple held_ = kIdle;
};

}  // namespace trackbc
