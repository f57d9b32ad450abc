#pragma once

#include <cstdint>
#include <optional>

#include "trackbc/demo.hpp"
#include "trackbc/expert.hpp"
#include "trackbc/sim.hpp"

namespace trackbc {

struct RecordOptions {
  ControllerKind kind = ControllerKind::Mobility;
  std::string created_by = "scripted";
  std::int64_t max_ticks = 3000;
  double filter_cutoff_hz = 15.0;
};

// Step-wise recording session: pairs each tick's conditioned observation
// with the action applied for that tick.
class Recorder {
 public:
  Recorder(Simulator& sim, const RecordOptions& opt = {})
      : sim_(sim), opt_(opt), conditioner_(opt.filter_cutoff_hz, 30.0) {
    demo_.meta.kind = opt.kind;
    demo_.meta.created_by = opt.created_by;
    demo_.meta.complete = false;
    feed(conditioner_, sim_.sense());
  }

  std::int64_t tick() const { return tick_; }
  bool full() const { return tick_ >= opt_.max_ticks; }

  // Conditioned observation for the current tick, before quantization.
  Observation observation() {
    const auto obs = conditioner_.at(static_cast<double>(tick_) / kControlHz);
    if (!obs) throw AlignmentError("record_demo: no aligned observation at tick " + std::to_string(tick_));
    return *obs;
  }

  void apply(const ActionTriple& action) {
    check_triple(action);
    demo_.records.push_back({tick_, quantize(observation()), action});
    feed(conditioner_, sim_.advance(mix_motors(action.movement, action.steering), action.arm));
    ++tick_;
  }

  const Demonstration& demo() const { return demo_; }

  Demonstration finish(bool complete) const {
    Demonstration d = demo_;
    d.meta.complete = complete;
    d.meta.segments.push_back(
        {scenario_digest(sim_.scenario()), sim_.scenario().seed, 0, static_cast<std::int64_t>(d.records.size())});
    return d;
  }

 private:
  Simulator& sim_;
  RecordOptions opt_;
  StreamConditioner conditioner_;
  Demonstration demo_;
  std::int64_t tick_ = 0;
};

// Runs the session at the control rate. The source is called as
// source(obs, state) and returns std::nullopt to end the session.
template <class Source>
Demonstration record_demo(Simulator& sim, Source&& source, const RecordOptions& opt = {}) {
  Recorder rec(sim, opt);
  bool complete = false;
  while (!rec.full()) {
    const std::optional<ActionTriple> action = source(rec.observation(), sim.state());
    if (!action) {
      complete = true;
      break;
    }
    rec.apply(*action);
  }
  Demonstration demo = rec.finish(complete);
  if (demo.records.empty()) throw SizeError("record_demo: session produced no records");
  return demo;
}

inline Demonstration record_scripted(const ScenarioSpec& spec, const ExpertConfig& expert_cfg,
                                     const SimConfig& sim_cfg = {}, std::int64_t max_ticks = 3000) {
  Simulator sim(spec, sim_cfg);
  ScriptedExpert expert(expert_cfg);
  RecordOptions opt;
  opt.kind = expert_cfg.kind;
  opt.max_ticks = max_ticks;
  return record_demo(
      sim, [&](const Observation&, const SimState& s) { return expert.next(s, sim.scenario(), sim.config()); }, opt);
}

}  // namespace trackbc
