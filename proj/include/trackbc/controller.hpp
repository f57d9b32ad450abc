#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "trackbc/demo.hpp"
#include "trackbc/net/checkpoint.hpp"
#include "trackbc/net/lstm.hpp"
#include "trackbc/record.hpp"
#include "trackbc/sim.hpp"

namespace trackbc {

struct LoopConfig {
  double control_hz = 10.0;
  int m_mobility = 25;
  int m_manipulation = 55;
  double wall_threshold = 15.0;
  int wall_streak_required = 3;
  double manipulation_duration = 7.0;
  double time_limit = 150.0;
  double home_x = 1.0;
};

inline void check_loop_config(const LoopConfig& c) {
  if (c.control_hz <= 0 || c.m_mobility <= 0 || c.m_manipulation <= 0 || c.wall_threshold <= 0 ||
      c.wall_streak_required <= 0 || c.manipulation_duration <= 0 || c.time_limit <= 0) {
    throw DomainError("loop config values must be positive");
  }
}

class ObservationBuffer {
 public:
  explicit ObservationBuffer(int capacity) : cap_(static_cast<std::size_t>(capacity)) {
    if (capacity <= 0) throw SizeError("ObservationBuffer: capacity must be positive");
    ring_.resize(cap_);
  }

  void push(const Observation& o) {
    ring_[head_] = o;
    head_ = (head_ + 1) % cap_;
    if (fill_ < cap_) ++fill_;
  }

  std::size_t fill() const { return fill_; }
  std::size_t capacity() const { return cap_; }

  // The most recent n observations, oldest first.
  std::vector<Observation> last(std::size_t n) const {
    if (n > fill_) throw SizeError("ObservationBuffer: only " + std::to_string(fill_) + " observations held");
    std::vector<Observation> out;
    out.reserve(n);
    for (std::size_t k = 0; k < n; ++k) out.push_back(ring_[(head_ + cap_ - n + k) % cap_]);
    return out;
  }

 private:
  std::size_t cap_;
  std::vector<Observation> ring_;
  std::size_t head_ = 0;
  std::size_t fill_ = 0;
};

inline ObservationBuffer& push_observation(ObservationBuffer& b, const Observation& o) {
  b.push(o);
  return b;
}

inline ActionId infer_action(const ObservationBuffer& buf, const net::NetworkCheckpoint& ck, int m) {
  if (m != ck.shape.m) throw ShapeError("infer_action: m does not match checkpoint");
  if (buf.fill() < static_cast<std::size_t>(m)) return ActionId{kIdleActionId};
  std::vector<double> x;
  x.reserve(static_cast<std::size_t>(m) * 4);
  for (const auto& o : buf.last(static_cast<std::size_t>(m))) {
    const auto v = ck.norm.apply(o);
    x.insert(x.end(), v.begin(), v.end());
  }
  return ActionId{net::argmax(net::forward(ck.params, x, m))};
}

enum class Mode { Mobility, Manipulation };

inline const char* mode_name(Mode m) { return m == Mode::Mobility ? "mobility" : "manipulation"; }

struct ModeState {
  Mode mode = Mode::Mobility;
  std::optional<double> deadline;
  int wall_streak = 0;
  // Cleared on leaving manipulation; the streak restarts only after a reading
  // at or beyond the threshold.
  bool armed = true;

  bool operator==(const ModeState&) const = default;
};

inline ModeState update_mode(ModeState s, const Observation& obs, const LoopConfig& cfg, double t) {
  if (s.mode == Mode::Manipulation) {
    if (t + 1e-9 >= *s.deadline) {
      s.mode = Mode::Mobility;
      s.deadline.reset();
      s.wall_streak = 0;
      s.armed = obs.distance >= cfg.wall_threshold;
    }
    return s;
  }
  if (obs.distance >= cfg.wall_threshold) {
    s.wall_streak = 0;
    s.armed = true;
    return s;
  }
  if (!s.armed) return s;
  if (++s.wall_streak >= cfg.wall_streak_required) {
    s.mode = Mode::Manipulation;
    s.deadline = t + cfg.manipulation_duration;
    s.wall_streak = 0;
  }
  return s;
}

struct TraceStep {
  std::int64_t tick = 0;
  Mode mode = Mode::Mobility;
  ActionTriple action;
};

struct EpisodeResult {
  bool delivered = false;
  bool returned = false;
  int falls = 0;
  int recoveries = 0;
  double final_yaw_error = 0.0;
  std::int64_t ticks = 0;
  double final_x = 0.0;
  int mobility_queries = 0;
  int manipulation_queries = 0;
  int mode_switches = 0;
  std::vector<TraceStep> trace;
  Demonstration demo;  // observations and actions as seen by the loop

  bool all_recovered() const { return falls == recoveries; }
  bool success(double yaw_tol = 15.0) const {
    return delivered && returned && all_recovered() && std::abs(final_yaw_error) < yaw_tol;
  }
};

inline nlohmann::json episode_to_json(const EpisodeResult& r) {
  nlohmann::json trace = nlohmann::json::array();
  for (const auto& s : r.trace) {
    trace.push_back({s.tick, mode_name(s.mode), s.action.arm, s.action.steering, s.action.movement});
  }
  return {{"delivered", r.delivered},
          {"returned", r.returned},
          {"falls", r.falls},
          {"recoveries", r.recoveries},
          {"final_yaw_error", r.final_yaw_error},
          {"ticks", r.ticks},
          {"final_x", r.final_x},
          {"mobility_queries", r.mobility_queries},
          {"manipulation_queries", r.manipulation_queries},
          {"mode_switches", r.mode_switches},
          {"success", r.success()},
          {"trace", trace}};
}

inline EpisodeResult run_closed_loop(Simulator& sim, const net::NetworkCheckpoint& mobility,
                                     const net::NetworkCheckpoint& manipulation, const LoopConfig& cfg = {}) {
  check_loop_config(cfg);
  if (mobility.shape.m != cfg.m_mobility) throw ShapeError("run_closed_loop: mobility checkpoint m mismatch");
  if (manipulation.shape.m != cfg.m_manipulation) {
    throw ShapeError("run_closed_loop: manipulation checkpoint m mismatch");
  }
  EpisodeResult r;
  ObservationBuffer buf(std::max(cfg.m_mobility, cfg.m_manipulation));
  ModeState mode;
  std::int64_t tick = 0;

  auto source = [&](const Observation& raw, const SimState& s) -> std::optional<ActionTriple> {
    if (s.delivered && s.x <= cfg.home_x) {
      r.returned = true;
      return std::nullopt;
    }
    const Observation obs = quantize(raw);
    buf.push(obs);
    const Mode before = mode.mode;
    mode = update_mode(mode, obs, cfg, static_cast<double>(tick) / cfg.control_hz);
    if (mode.mode != before) ++r.mode_switches;
    ActionId id;
    if (mode.mode == Mode::Mobility) {
      id = infer_action(buf, mobility, cfg.m_mobility);
      ++r.mobility_queries;
    } else {
      id = infer_action(buf, manipulation, cfg.m_manipulation);
      ++r.manipulation_queries;
    }
    const ActionTriple a = decode_action(id);
    r.trace.push_back({tick, mode.mode, a});
    ++tick;
    return a;
  };

  RecordOptions opt;
  opt.created_by = "controller";
  opt.max_ticks = static_cast<std::int64_t>(std::llround(cfg.time_limit * cfg.control_hz));
  r.demo = record_demo(sim, source, opt);
  const SimState& s = sim.state();
  r.delivered = s.delivered;
  r.falls = s.falls;
  r.recoveries = s.recoveries;
  r.final_yaw_error = s.yaw;
  r.final_x = s.x;
  r.ticks = tick;
  return r;
}

}  // namespace trackbc
