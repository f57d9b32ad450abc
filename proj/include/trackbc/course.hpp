#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "trackbc/demo.hpp"
#include "trackbc/expert.hpp"
#include "trackbc/record.hpp"
#include "trackbc/scenario.hpp"

namespace trackbc {

// A scenario plus how the scripted expert should drive it.
struct DemoSegment {
  std::string name;
  ScenarioSpec scenario;
  ExpertConfig expert;
};

inline SlipConfig default_slip() { return SlipConfig{true, 4.0, 0.2}; }

namespace course {

inline ScenarioSpec empty_corridor(double wall = 300.0, std::uint64_t seed = 1) {
  ScenarioSpec s;
  s.corridor_length = wall + 50.0;
  s.wall_position = wall;
  s.seed = seed;
  return s;
}

// Every mobility segment is a full mission: out to the wall, a pause, then
// reverse to the start. Merge junctions therefore all sit at the start line.

// Obstacles, a fall to the left, the stair, the wall and the way back.
inline DemoSegment first_demo() {
  ScenarioSpec s;
  s.corridor_length = 360.0;
  s.obstacles = {{60.0, 10.0, 3.0}, {115.0, 3.0, 3.0}};
  s.stair = Stair{200.0, 3, 8.0, 15.0};
  s.wall_position = 300.0;
  s.perturbations = {{12.0, PerturbationKind::PushLeft, 35.0}};
  s.slip = default_slip();
  s.seed = 11;
  return {"first", s, ExpertConfig{}};
}

// Three small obstacles, toppled left and then right.
inline DemoSegment falls_demo() {
  ScenarioSpec s;
  s.corridor_length = 300.0;
  s.obstacles = {{55.0, 3.0, 3.0}, {105.0, 2.5, 4.0}, {150.0, 3.5, 3.0}};
  s.wall_position = 250.0;
  s.perturbations = {{9.0, PerturbationKind::PushLeft, 30.0}, {15.0, PerturbationKind::PushRight, 45.0}};
  s.slip = default_slip();
  s.seed = 12;
  return {"falls", s, ExpertConfig{}};
}

// Heading kicks of both signs and several sizes.
inline DemoSegment steering_demo() {
  ScenarioSpec s;
  s.corridor_length = 450.0;
  s.obstacles = {{150.0, 2.0, 3.0}};
  s.wall_position = 400.0;
  s.perturbations = {{4.0, PerturbationKind::YawKick, 30.0},
                     {7.0, PerturbationKind::YawKick, -55.0},
                     {10.5, PerturbationKind::YawKick, 70.0},
                     {14.0, PerturbationKind::YawKick, -20.0}};
  s.slip = default_slip();
  s.seed = 13;
  return {"steering", s, ExpertConfig{}};
}

// Two large obstacles with the arm, a small one, toppled right, a short stair.
inline DemoSegment obstacle_demo() {
  ScenarioSpec s;
  s.corridor_length = 420.0;
  s.obstacles = {{65.0, 11.5, 3.0}, {125.0, 2.5, 3.0}, {180.0, 7.5, 2.5}};
  s.stair = Stair{250.0, 3, 6.5, 14.0};
  s.wall_position = 350.0;
  s.perturbations = {{9.0, PerturbationKind::PushRight, 50.0}};
  s.slip = default_slip();
  s.seed = 14;
  return {"obstacle", s, ExpertConfig{}};
}

// Extra skill used for the edited demonstration: a tall stair and a
// heading kick on the way.
inline DemoSegment new_skill_demo() {
  ScenarioSpec s;
  s.corridor_length = 360.0;
  s.obstacles = {{70.0, 7.0, 2.5}};
  s.stair = Stair{150.0, 4, 7.0, 16.0};
  s.wall_position = 300.0;
  s.perturbations = {{5.0, PerturbationKind::PushLeft, 25.0}, {14.0, PerturbationKind::YawKick, -40.0}};
  s.slip = default_slip();
  s.seed = 15;
  return {"new_skill", s, ExpertConfig{}};
}

inline ScenarioSpec random_course(std::uint64_t seed);

inline std::vector<DemoSegment> named_segments() {
  return {first_demo(), falls_demo(), steering_demo(), obstacle_demo(), new_skill_demo()};
}

// Generated courses for training. Seeds start at 1000 so they never collide
// with the small seeds used for held-out evaluation.
inline constexpr std::uint64_t kTrainingSeedBase = 1000;

inline std::vector<DemoSegment> mobility_segments(int generated = 6) {
  std::vector<DemoSegment> out = {falls_demo(), steering_demo(), obstacle_demo(), first_demo()};
  for (int i = 0; i < generated; ++i) {
    const std::uint64_t seed = kTrainingSeedBase + static_cast<std::uint64_t>(i);
    out.push_back({"generated_" + std::to_string(seed), random_course(seed), ExpertConfig{}});
  }
  // The first segment starts with the full warm-up, like the closed loop.
  // Later segments wait half a window at home, so no idle-labelled window is
  // entirely stationary.
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (i > 0) out[i].expert.lead_in_ticks = 12;
    out[i].expert.tail_ticks = 1;
  }
  return out;
}

// Approach the wall, deliver, back away with the arm still out. The first
// segment starts inside delivery range; later ones start further out and only
// need a single idle record for the merge rule.
inline DemoSegment manipulation_demo(double start_distance, int lead_in, std::uint64_t seed) {
  ScenarioSpec s;
  s.wall_position = start_distance + 10.0;
  s.corridor_length = s.wall_position + 100.0;
  s.seed = seed;
  ExpertConfig e;
  e.kind = ControllerKind::Manipulation;
  e.lead_in_ticks = lead_in;
  e.tail_ticks = 20;
  return {"manipulation", s, e};
}

inline std::vector<DemoSegment> manipulation_segments() {
  return {manipulation_demo(6.0, 54, 21), manipulation_demo(60.0, 1, 22), manipulation_demo(150.0, 1, 23),
          manipulation_demo(100.0, 1, 24)};
}

// Held-out course: obstacle sizes and positions, stair geometry and the
// perturbation schedule all drawn from `seed`.
inline ScenarioSpec random_course(std::uint64_t seed) {
  std::mt19937_64 rng(seed * 7919 + 17);
  auto uni = [&](double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); };
  const int n_small = static_cast<int>(rng() % 2) + 2;
  const int n_large = static_cast<int>(rng() % 2) + 1;
  std::vector<bool> large(static_cast<std::size_t>(n_small + n_large), false);
  for (int i = 0; i < n_large; ++i) large[static_cast<std::size_t>(i)] = true;
  std::shuffle(large.begin(), large.end(), rng);

  ScenarioSpec s;
  double pos = uni(50.0, 70.0);
  for (bool big : large) {
    const double h = big ? uni(7.0, 11.5) : uni(2.0, 3.8);
    const double len = uni(2.0, 4.0);
    s.obstacles.push_back({pos, h, len});
    pos += len + uni(45.0, 70.0);
  }
  s.stair = Stair{pos, 3, uni(6.0, 8.0), uni(14.0, 16.0)};
  s.wall_position = s.stair->position + s.stair->n_steps * s.stair->step_depth + uni(40.0, 70.0);
  s.corridor_length = s.wall_position + 40.0;

  std::vector<PerturbationKind> kinds = {PerturbationKind::PushLeft, PerturbationKind::PushRight,
                                         PerturbationKind::YawKick};
  std::shuffle(kinds.begin(), kinds.end(), rng);
  double t = uni(5.0, 8.0);
  for (auto k : kinds) {
    double mag = uni(25.0, 50.0);
    if (k == PerturbationKind::YawKick) mag = (rng() % 2 ? 1.0 : -1.0) * uni(25.0, 65.0);
    s.perturbations.push_back({t, k, mag});
    t += uni(4.0, 7.0);
  }
  s.slip = default_slip();
  s.seed = seed;
  validate(s);
  return s;
}

// Records every segment with the scripted expert and merges them in order.
inline Demonstration record_segments(const std::vector<DemoSegment>& segs, const SimConfig& sim = {}) {
  std::vector<Demonstration> parts;
  parts.reserve(segs.size());
  for (const auto& sg : segs) parts.push_back(record_scripted(sg.scenario, sg.expert, sim));
  return merge(parts);
}

}  // namespace course
}  // namespace trackbc
