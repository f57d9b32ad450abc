#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "trackbc/error.hpp"
#include "trackbc/io.hpp"

namespace trackbc {

struct Obstacle {
  double position = 0.0;  // cm, leading face
  double height = 0.0;    // cm
  double length = 0.0;    // cm

  friend bool operator==(const Obstacle&, const Obstacle&) = default;
};

// Ascending stair; the top step continues as a landing up to the wall.
struct Stair {
  double position = 0.0;  // cm, face of the first step
  int n_steps = 0;
  double step_height = 0.0;  // cm
  double step_depth = 0.0;   // cm

  double landing_start() const { return position + (n_steps - 1) * step_depth; }
  double total_height() const { return n_steps * step_height; }

  friend bool operator==(const Stair&, const Stair&) = default;
};

enum class PerturbationKind { PushLeft, PushRight, YawKick };

inline const char* perturbation_name(PerturbationKind k) {
  switch (k) {
    case PerturbationKind::PushLeft: return "push_left";
    case PerturbationKind::PushRight: return "push_right";
    case PerturbationKind::YawKick: return "yaw_kick";
  }
  return "unknown";
}

struct Perturbation {
  double time = 0.0;  // s
  PerturbationKind kind = PerturbationKind::YawKick;
  double magnitude = 0.0;  // degrees

  friend bool operator==(const Perturbation&, const Perturbation&) = default;
};

struct SlipConfig {
  bool enabled = false;
  double yaw_drift_scale = 0.0;  // deg/s
  double speed_loss = 0.0;       // fraction in [0, 1)

  friend bool operator==(const SlipConfig&, const SlipConfig&) = default;
};

struct ScenarioSpec {
  double corridor_length = 0.0;
  std::vector<Obstacle> obstacles;
  std::optional<Stair> stair;
  double wall_position = 0.0;
  std::vector<Perturbation> perturbations;
  SlipConfig slip;
  std::uint64_t seed = 0;

  friend bool operator==(const ScenarioSpec&, const ScenarioSpec&) = default;
};

inline void validate(const ScenarioSpec& s) {
  auto fail = [](const std::string& msg) { throw DomainError("scenario: " + msg); };
  auto finite_pos = [&](double v, const std::string& field) {
    if (!std::isfinite(v) || v <= 0.0) fail(field + " must be positive and finite");
  };
  finite_pos(s.corridor_length, "corridor_length");
  finite_pos(s.wall_position, "wall_position");
  if (s.wall_position > s.corridor_length) fail("wall_position beyond corridor_length");

  double feature_end = 0.0;
  for (std::size_t i = 0; i < s.obstacles.size(); ++i) {
    const auto& o = s.obstacles[i];
    const std::string name = "obstacles[" + std::to_string(i) + "]";
    if (!std::isfinite(o.position) || o.position < 0.0) fail(name + ".position must be >= 0");
    finite_pos(o.height, name + ".height");
    finite_pos(o.length, name + ".length");
    if (i > 0) {
      const auto& prev = s.obstacles[i - 1];
      if (o.position < prev.position) {
        fail("ordering violation: " + name + " precedes obstacles[" + std::to_string(i - 1) + "]");
      }
      if (o.position < prev.position + prev.length) {
        fail("overlap: " + name + " overlaps obstacles[" + std::to_string(i - 1) + "]");
      }
    }
    feature_end = o.position + o.length;
  }
  if (s.stair) {
    const auto& st = *s.stair;
    if (st.n_steps < 1) fail("stair.n_steps must be >= 1");
    finite_pos(st.step_height, "stair.step_height");
    finite_pos(st.step_depth, "stair.step_depth");
    if (!std::isfinite(st.position) || st.position < feature_end) {
      fail("overlap: stair must start after every obstacle");
    }
    feature_end = st.position + st.n_steps * st.step_depth;
  }
  if (s.wall_position < feature_end) fail("wall_position must lie beyond all features");

  for (std::size_t i = 0; i < s.perturbations.size(); ++i) {
    const auto& p = s.perturbations[i];
    const std::string name = "perturbations[" + std::to_string(i) + "]";
    if (!std::isfinite(p.time) || p.time < 0.0) fail(name + ".time must be >= 0");
    if (!std::isfinite(p.magnitude)) fail(name + ".magnitude must be finite");
    if (i > 0 && p.time < s.perturbations[i - 1].time) {
      fail("ordering violation: " + name + " is earlier than its predecessor");
    }
  }
  if (!std::isfinite(s.slip.yaw_drift_scale) || s.slip.yaw_drift_scale < 0.0) {
    fail("slip.yaw_drift_scale must be >= 0");
  }
  if (!(s.slip.speed_loss >= 0.0 && s.slip.speed_loss < 1.0)) fail("slip.speed_loss must be in [0,1)");
}

namespace detail {

using nlohmann::json;

inline void reject_unknown(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : keys) known = known || it.key() == k;
    if (!known) throw ParseError("scenario: unknown field '" + where + it.key() + "'");
  }
}

inline double number_field(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw ParseError("scenario: missing field '" + where + key + "'");
  const auto& v = j.at(key);
  if (!v.is_number()) throw ParseError("scenario: field '" + where + key + "' must be a number");
  return v.get<double>();
}

}  // namespace detail

inline nlohmann::json to_json(const ScenarioSpec& s) {
  nlohmann::json j;
  j["corridor_length"] = s.corridor_length;
  j["obstacles"] = nlohmann::json::array();
  for (const auto& o : s.obstacles) {
    j["obstacles"].push_back({{"position", o.position}, {"height", o.height}, {"length", o.length}});
  }
  if (s.stair) {
    j["stair"] = {{"position", s.stair->position},
                  {"n_steps", s.stair->n_steps},
                  {"step_height", s.stair->step_height},
                  {"step_depth", s.stair->step_depth}};
  } else {
    j["stair"] = nullptr;
  }
  j["wall_position"] = s.wall_position;
  j["perturbations"] = nlohmann::json::array();
  for (const auto& p : s.perturbations) {
    j["perturbations"].push_back(
        {{"time", p.time}, {"kind", perturbation_name(p.kind)}, {"magnitude", p.magnitude}});
  }
  j["slip"] = {{"enabled", s.slip.enabled},
               {"yaw_drift_scale", s.slip.yaw_drift_scale},
               {"speed_loss", s.slip.speed_loss}};
  j["seed"] = s.seed;
  return j;
}

inline ScenarioSpec scenario_from_json(const nlohmann::json& j) {
  using detail::number_field;
  if (!j.is_object()) throw ParseError("scenario: document must be an object");
  detail::reject_unknown(
      j, {"corridor_length", "obstacles", "stair", "wall_position", "perturbations", "slip", "seed"}, "");
  ScenarioSpec s;
  s.corridor_length = number_field(j, "corridor_length", "");
  s.wall_position = number_field(j, "wall_position", "");
  if (j.contains("obstacles")) {
    const auto& arr = j.at("obstacles");
    if (!arr.is_array()) throw ParseError("scenario: field 'obstacles' must be an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string where = "obstacles[" + std::to_string(i) + "].";
      detail::reject_unknown(arr[i], {"position", "height", "length"}, where);
      s.obstacles.push_back({number_field(arr[i], "position", where), number_field(arr[i], "height", where),
                             number_field(arr[i], "length", where)});
    }
  }
  if (j.contains("stair") && !j.at("stair").is_null()) {
    const auto& st = j.at("stair");
    detail::reject_unknown(st, {"position", "n_steps", "step_height", "step_depth"}, "stair.");
    if (!st.contains("n_steps") || !st.at("n_steps").is_number_integer()) {
      throw ParseError("scenario: field 'stair.n_steps' must be an integer");
    }
    s.stair = Stair{number_field(st, "position", "stair."), st.at("n_steps").get<int>(),
                    number_field(st, "step_height", "stair."), number_field(st, "step_depth", "stair.")};
  }
  if (j.contains("perturbations")) {
    const auto& arr = j.at("perturbations");
    if (!arr.is_array()) throw ParseError("scenario: field 'perturbations' must be an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string where = "perturbations[" + std::to_string(i) + "].";
      detail::reject_unknown(arr[i], {"time", "kind", "magnitude"}, where);
      Perturbation p;
      p.time = number_field(arr[i], "time", where);
      p.magnitude = number_field(arr[i], "magnitude", where);
      const std::string kind = arr[i].value("kind", "");
      if (kind == "push_left") {
        p.kind = PerturbationKind::PushLeft;
      } else if (kind == "push_right") {
        p.kind = PerturbationKind::PushRight;
      } else if (kind == "yaw_kick") {
        p.kind = PerturbationKind::YawKick;
      } else {
        throw ParseError("scenario: field '" + where + "kind' must be push_left, push_right or yaw_kick");
      }
      s.perturbations.push_back(p);
    }
  }
  if (j.contains("slip")) {
    const auto& sl = j.at("slip");
    detail::reject_unknown(sl, {"enabled", "yaw_drift_scale", "speed_loss"}, "slip.");
    if (sl.contains("enabled")) {
      if (!sl.at("enabled").is_boolean()) throw ParseError("scenario: field 'slip.enabled' must be a boolean");
      s.slip.enabled = sl.at("enabled").get<bool>();
    }
    if (sl.contains("yaw_drift_scale")) s.slip.yaw_drift_scale = number_field(sl, "yaw_drift_scale", "slip.");
    if (sl.contains("speed_loss")) s.slip.speed_loss = number_field(sl, "speed_loss", "slip.");
  }
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_unsigned()) throw ParseError("scenario: field 'seed' must be a non-negative integer");
    s.seed = j.at("seed").get<std::uint64_t>();
  }
  validate(s);
  return s;
}

inline ScenarioSpec load_scenario(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("scenario: ") + e.what());
  }
  return scenario_from_json(j);
}

inline std::string scenario_to_text(const ScenarioSpec& s) { return to_json(s).dump(2) + "\n"; }

inline std::string scenario_digest(const ScenarioSpec& s) { return hex_digest(to_json(s).dump()); }

}  // namespace trackbc
