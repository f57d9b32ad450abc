#include <gtest/gtest.h>

#include <random>
#include <set>

#include "trackbc/course.hpp"
#include "trackbc/demo.hpp"
#include "trackbc/record.hpp"

using namespace trackbc;

namespace {

// Synthetic demo: one provenance segment, observations from the tick.
Demonstration synthetic(const std::vector<ActionTriple>& actions, std::uint64_t seed = 1) {
  Demonstration d;
  for (std::size_t i = 0; i < actions.size(); ++i) {
    const double k = static_cast<double>(i);
    d.records.push_back({static_cast<std::int64_t>(i), Observation{k * 0.5, -k * 0.25, 1.0, 100.0 - k * 0.1},
                         actions[i]});
  }
  d.meta.segments = {{"abc", seed, 0, static_cast<std::int64_t>(actions.size())}};
  return d;
}

const Demonstration& merged_mobility() {
  static const Demonstration d = course::record_segments(course::mobility_segments());
  return d;
}

}  // namespace

TEST(Record, TenSecondSessionGivesOneHundredRecords) {
  Simulator sim(course::empty_corridor());
  RecordOptions opt;
  opt.max_ticks = 100;
  const auto d = record_demo(sim, [](const Observation&, const SimState&) { return std::optional(kIdle); }, opt);
  ASSERT_EQ(d.size(), 100u);
  for (std::size_t i = 0; i < d.size(); ++i) {
    EXPECT_EQ(d.records[i].tick, static_cast<std::int64_t>(i));
    EXPECT_TRUE(is_idle(d.records[i].action));
  }
  EXPECT_FALSE(d.meta.complete);
  ASSERT_EQ(d.meta.segments.size(), 1u);
  EXPECT_EQ(d.meta.segments[0].to, 100);
}

TEST(Record, SourceEndsTheSession) {
  Simulator sim(course::empty_corridor());
  int n = 0;
  const auto d = record_demo(sim, [&](const Observation&, const SimState&) -> std::optional<ActionTriple> {
    if (n++ == 30) return std::nullopt;
    return kIdle;
  });
  EXPECT_EQ(d.size(), 30u);
  EXPECT_TRUE(d.meta.complete);
  Simulator sim2(course::empty_corridor());
  EXPECT_THROW(
      record_demo(sim2, [](const Observation&, const SimState&) { return std::optional<ActionTriple>(); }),
      SizeError);
}

TEST(Record, ObservationsPrecedeTheirAction) {
  // Driving forward shrinks the sonar range only after the command.
  Simulator sim(course::empty_corridor(300.0));
  RecordOptions opt;
  opt.max_ticks = 20;
  const auto d = record_demo(sim, [](const Observation&, const SimState&) { return std::optional(ActionTriple{0, 0, 1}); },
                             opt);
  EXPECT_NEAR(d.records[0].obs.distance, 290.0, 5.0);
  EXPECT_LT(d.records[19].obs.distance, d.records[0].obs.distance - 20.0);
}

TEST(Record, ScriptedSegmentsAreValidAndIdleAtBothEnds) {
  for (const auto& seg : course::named_segments()) {
    const auto d = record_scripted(seg.scenario, seg.expert);
    EXPECT_TRUE(d.meta.complete) << seg.name;
    EXPECT_TRUE(validate_demo(d).ok()) << seg.name;
  }
}

TEST(Record, MergedMobilityDemoCoversTheSkills) {
  const auto& d = merged_mobility();
  EXPECT_TRUE(validate_demo(d).ok());
  EXPECT_GE(d.size(), 1200u);
  std::set<int> labels;
  for (const auto& r : d.records) labels.insert(encode_action(r.action).value);
  for (int id : {1, 4, 5, 7, 13, 14, 22, 31, 39, 40}) EXPECT_TRUE(labels.count(id)) << id;
}

TEST(Record, DeliversAtTheWallThenReversesHoldingThePose) {
  const auto seg = course::first_demo();
  const auto d = record_scripted(seg.scenario, seg.expert);
  std::size_t deliver = d.size();
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (encode_action(d.records[i].action).value == 40) {
      deliver = i;
      break;
    }
  }
  ASSERT_LT(deliver, d.size());
  EXPECT_LT(d.records[deliver].obs.distance, 15.0);
  int reversing = 0;
  for (std::size_t i = deliver + 1; i < d.size(); ++i) {
    const int id = encode_action(d.records[i].action).value;
    if (id == 39) ++reversing;
    EXPECT_TRUE(id == 39 || id == 40 || id == 4 || id == 22 || id == 31) << i << " " << id;
  }
  EXPECT_GT(reversing, 50);
}

TEST(Record, ManipulationDemosEndBackingAway) {
  for (const auto& seg : course::manipulation_segments()) {
    const auto d = record_scripted(seg.scenario, seg.expert);
    EXPECT_TRUE(validate_demo(d).ok());
    int reversing = 0;
    for (const auto& r : d.records) reversing += encode_action(r.action).value == 39;
    // Short approaches run out of corridor before the backoff ends.
    EXPECT_GT(reversing, 0);
    EXPECT_LE(reversing, seg.expert.backoff_ticks);
  }
}

TEST(Record, RecordingIsDeterministic) {
  const auto seg = course::first_demo();
  EXPECT_EQ(demo_to_text(record_scripted(seg.scenario, seg.expert)),
            demo_to_text(record_scripted(seg.scenario, seg.expert)));
}

TEST(Expert, DecisionExamples) {
  const auto spec = course::empty_corridor();
  const SimConfig c;
  SimState s = sim_init(spec);
  EXPECT_EQ(ScriptedExpert().decide(s, spec, c), (ActionTriple{0, 0, 1}));
  s.yaw = 30.0;
  EXPECT_EQ(ScriptedExpert().decide(s, spec, c), (ActionTriple{0, -1, 0}));
  s.yaw = -30.0;
  EXPECT_EQ(ScriptedExpert().decide(s, spec, c), (ActionTriple{0, 1, 0}));
  s = apply_perturbation(spec, sim_init(spec), PerturbationKind::PushLeft, 30.0);
  EXPECT_EQ(ScriptedExpert().decide(s, spec, c), (ActionTriple{2, 0, 0}));
  s = apply_perturbation(spec, sim_init(spec), PerturbationKind::PushRight, 30.0);
  EXPECT_EQ(ScriptedExpert().decide(s, spec, c), (ActionTriple{3, 0, 0}));
}

TEST(DemoFormat, TextRoundTripIsExact) {
  const auto seg = course::falls_demo();
  const auto d = record_scripted(seg.scenario, seg.expert);
  const auto text = demo_to_text(d);
  const auto back = demo_from_text(text);
  EXPECT_EQ(back, d);
  EXPECT_EQ(demo_to_text(back), text);
}

TEST(DemoFormat, FileResolution) {
  EXPECT_EQ(quantize(Observation{1.23456, -0.004, 0.005, 12.34}), (Observation{1.23, 0.0, 0.01, 12.3}));
  auto d = synthetic({kIdle, kIdle});
  d.records[0].obs.yaw = 0.123456;
  const auto line = demo_to_text(d).substr(demo_to_text(d).find('\n') + 1);
  EXPECT_EQ(line.substr(0, line.find('\n')), "0.0,0.12,0.00,1.00,100.0,0,0,0");
}

TEST(DemoFormat, RejectsMalformedFiles) {
  const auto good = demo_to_text(synthetic({kIdle, kIdle, kIdle}));
  const auto header = good.substr(0, good.find('\n') + 1);
  EXPECT_THROW(demo_from_text(""), ParseError);
  EXPECT_THROW(demo_from_text(header), ParseError);
  EXPECT_THROW(demo_from_text("{\"format\": \"other\"}\n0.0,0,0,0,1,0,0,0\n"), ParseError);
  EXPECT_THROW(demo_from_text(header + "0.0,0,0,0,1,0,0,0\n0.2,0,0,0,1,0,0,0\n"), ParseError);
  EXPECT_THROW(demo_from_text(header + "0.05,0,0,0,1,0,0,0\n"), ParseError);
  EXPECT_THROW(demo_from_text(header + "0.0,0,0,0,1,5,0,0\n"), ParseError);
  EXPECT_THROW(demo_from_text(header + "0.0,0,0,0,-1,0,0,0\n"), ParseError);
  EXPECT_THROW(demo_from_text(header + "0.0,0,0,0,1,0,0\n"), ParseError);
  EXPECT_THROW(demo_from_text(header + "0.0,0,0,0,1,0,0,0,9\n"), ParseError);
}

TEST(DemoFormat, ValidationNamesTheOffendingRecord) {
  auto d = synthetic({kIdle, ActionTriple{0, 0, 1}, ActionTriple{0, 0, 1}});
  const auto rep = validate_demo(d);
  ASSERT_EQ(rep.problems.size(), 1u);
  EXPECT_NE(rep.problems[0].find("t=0.2"), std::string::npos);
  d.records[2].action = kIdle;
  d.records[1].tick = 5;
  EXPECT_FALSE(validate_demo(d).ok());
}

TEST(Edit, TrimFullSpanIsIdentity) {
  const auto seg = course::falls_demo();
  const auto d = record_scripted(seg.scenario, seg.expert);
  const auto t = trim(d, 0.0, d.records.back().t());
  EXPECT_EQ(demo_to_text(t), demo_to_text(d));
}

TEST(Edit, TrimRebasesAndKeepsProvenance) {
  const auto d = synthetic({ActionTriple{0, 0, 1}, kIdle, ActionTriple{0, 1, 0}, kIdle, kIdle, ActionTriple{0, 0, 1}});
  const auto t = trim(d, 0.1, 0.4);
  ASSERT_EQ(t.size(), 4u);
  EXPECT_EQ(t.records.front().tick, 0);
  EXPECT_EQ(t.records.front().obs, d.records[1].obs);
  ASSERT_EQ(t.meta.segments.size(), 1u);
  EXPECT_EQ(t.meta.segments[0].from, 1);
  EXPECT_EQ(t.meta.segments[0].to, 5);
}

TEST(Edit, TrimErrors) {
  const auto d = synthetic({kIdle, ActionTriple{0, 0, 1}, ActionTriple{0, 0, 1}, kIdle});
  try {
    trim(d, 0.1, 0.3);
    FAIL();
  } catch (const BoundaryError& e) {
    EXPECT_NE(std::string(e.what()).find("t=0.1"), std::string::npos);
  }
  EXPECT_THROW(trim(d, 0.0, 0.5), RangeError);
  EXPECT_THROW(trim(d, 0.3, 0.0), RangeError);
  EXPECT_THROW(trim(d, 0.05, 0.3), RangeError);
}

TEST(Edit, MergeSingleIsIdentityAndConcatenates) {
  const auto a = synthetic({kIdle, ActionTriple{0, 0, 1}, kIdle}, 1);
  const auto b = synthetic({kIdle, ActionTriple{0, 1, 0}, kIdle}, 2);
  EXPECT_EQ(merge({a}), a);
  const auto m = merge({a, b});
  ASSERT_EQ(m.size(), 6u);
  for (std::size_t i = 0; i < m.size(); ++i) EXPECT_EQ(m.records[i].tick, static_cast<std::int64_t>(i));
  EXPECT_EQ(m.records[4].action, (ActionTriple{0, 1, 0}));
  ASSERT_EQ(m.meta.segments.size(), 2u);
  EXPECT_EQ(m.meta.segments[1].seed, 2u);
}

TEST(Edit, MergeErrorsNameTheJunction) {
  const auto a = synthetic({kIdle, kIdle});
  const auto mid_turn = synthetic({ActionTriple{0, 1, 0}, kIdle});
  try {
    merge({a, a, mid_turn});
    FAIL();
  } catch (const JunctionError& e) {
    EXPECT_EQ(e.junction(), 1u);
    EXPECT_NE(std::string(e.what()).find("junction 1"), std::string::npos);
  }
  EXPECT_THROW(merge(std::span<const Demonstration>{}), SizeError);
  auto other = a;
  other.meta.kind = ControllerKind::Manipulation;
  EXPECT_THROW(merge({a, other}), DomainError);
}

TEST(Edit, RandomizedBoundaryRules) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<ActionTriple> acts(40);
    for (auto& a : acts) a = rng() % 3 == 0 ? kIdle : decode_action(ActionId{static_cast<int>(rng() % kNumActions)});
    const auto d = synthetic(acts);
    const auto i = static_cast<std::size_t>(rng() % 39);
    const auto j = i + 1 + static_cast<std::size_t>(rng() % (39 - i));
    const bool ok = is_idle(acts[i]) && is_idle(acts[j]);
    const double t0 = static_cast<double>(i) / 10.0, t1 = static_cast<double>(j) / 10.0;
    if (ok) {
      EXPECT_NO_THROW(trim(d, t0, t1));
    } else {
      EXPECT_THROW(trim(d, t0, t1), BoundaryError);
    }
    const auto e = synthetic({acts[j], kIdle});
    const auto f = synthetic({kIdle, acts[i]});
    if (is_idle(acts[i]) && is_idle(acts[j])) {
      EXPECT_NO_THROW(merge({f, e}));
    } else {
      EXPECT_THROW(merge({f, e}), JunctionError);
    }
  }
}

TEST(Edit, SplitAtIdleThenMergeIsByteIdentical) {
  const auto& d = merged_mobility();
  std::vector<std::size_t> cuts;
  for (std::size_t k = 1; k + 2 < d.size(); ++k) {
    if (is_idle(d.records[k].action) && is_idle(d.records[k + 1].action)) cuts.push_back(k);
  }
  ASSERT_FALSE(cuts.empty());
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t k = cuts[rng() % cuts.size()];
    const auto a = trim(d, 0.0, static_cast<double>(k) / 10.0);
    const auto b = trim(d, static_cast<double>(k + 1) / 10.0, d.records.back().t());
    EXPECT_EQ(demo_to_text(merge({a, b})), demo_to_text(d)) << k;
  }
}

TEST(Dataset, WindowCountAndLabels) {
  std::vector<ActionTriple> acts(30, kIdle);
  acts[9] = ActionTriple{0, 0, 1};
  const auto d = synthetic(acts);
  const auto ds = window(d, 10);
  ASSERT_EQ(ds.size(), 21u);
  EXPECT_EQ(ds.labels[0], 5);
  EXPECT_EQ(ds.window(0).front(), d.records[0].obs);
  EXPECT_EQ(ds.window(0).back(), d.records[9].obs);
  EXPECT_EQ(ds.window(20).back(), d.records[29].obs);
  EXPECT_EQ(window(d, 30).size(), 1u);
  EXPECT_THROW(window(d, 31), SizeError);
  EXPECT_THROW(window(d, 0), SizeError);
}

TEST(Dataset, ClassWeightsBalanceTheClasses) {
  std::vector<ActionTriple> acts(100, kIdle);
  for (int i = 0; i < 10; ++i) acts[static_cast<std::size_t>(i * 10 + 3)] = ActionTriple{0, 0, 1};
  const auto ds = window(synthetic(acts), 1);
  const auto w = class_weights(ds);
  EXPECT_NEAR(w[4], 100.0 / 180.0, 1e-12);
  EXPECT_NEAR(w[5], 5.0, 1e-12);
  EXPECT_EQ(w[0], 0.0);
  double total = 0.0;
  for (int c = 0; c < kNumActions; ++c) total += w[static_cast<std::size_t>(c)] * ds.class_counts[static_cast<std::size_t>(c)];
  EXPECT_NEAR(total, 100.0, 1e-9);
}
