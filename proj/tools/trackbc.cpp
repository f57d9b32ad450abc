// trackbc: record, edit, train, transfer, eval, rollout and teleop.
//
// Exit codes: 0 success, 1 failure (bad input, IO, unmet postcondition),
// 2 usage error.

#include <cstdio>
#include <csignal>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "trackbc/controller.hpp"
#include "trackbc/course.hpp"
#include "trackbc/demo.hpp"
#include "trackbc/net/train.hpp"
#include "trackbc/record.hpp"
#include "trackbc/teleop.hpp"

namespace fs = std::filesystem;
using namespace trackbc;

namespace {

constexpr int kOk = 0;
constexpr int kFail = 1;
constexpr int kUsage = 2;

struct UsageError : Error {
  using Error::Error;
};

ScenarioSpec read_scenario(const fs::path& p) { return load_scenario(read_file(p)); }

void print_histogram(const Demonstration& d) {
  std::array<int, kNumActions> counts{};
  for (const auto& r : d.records) ++counts[static_cast<std::size_t>(encode_action(r.action).value)];
  for (int id = 0; id < kNumActions; ++id) {
    if (counts[static_cast<std::size_t>(id)] == 0) continue;
    std::printf("  %2d %-10s %d\n", id, to_string(decode_action(ActionId{id})).c_str(),
                counts[static_cast<std::size_t>(id)]);
  }
}

int default_window(ControllerKind k) {
  const LoopConfig loop;
  return k == ControllerKind::Mobility ? loop.m_mobility : loop.m_manipulation;
}

// ---------------------------------------------------------------------------

struct RecordArgs {
  fs::path scenario, out;
  std::string kind = "mobility";
  std::int64_t max_ticks = 3000;
};

int cmd_record(const RecordArgs& a) {
  ExpertConfig ec;
  ec.kind = parse_kind(a.kind);
  const Demonstration d = record_scripted(read_scenario(a.scenario), ec, SimConfig{}, a.max_ticks);
  save_demo(a.out, d);
  std::printf("%zu records, %.1f s, complete=%s\n", d.size(), static_cast<double>(d.size()) / kControlHz,
              d.meta.complete ? "true" : "false");
  print_histogram(d);
  return kOk;
}

struct EditArgs {
  fs::path in, out;
  std::vector<fs::path> inputs;
  double from = 0, to = 0;
};

int cmd_trim(const EditArgs& a) {
  const Demonstration d = trim(load_demo(a.in), a.from, a.to);
  save_demo(a.out, d);
  std::printf("%zu records\n", d.size());
  return kOk;
}

int cmd_merge(const EditArgs& a) {
  std::vector<Demonstration> segs;
  for (const auto& p : a.inputs) segs.push_back(load_demo(p));
  const Demonstration d = merge(segs);
  save_demo(a.out, d);
  std::printf("%zu segments, %zu records, %.1f s\n", segs.size(), d.size(),
              static_cast<double>(d.size()) / kControlHz);
  return kOk;
}

int cmd_validate(const EditArgs& a) {
  const Demonstration d = load_demo(a.in);
  const auto rep = validate_demo(d);
  std::printf("records %zu, rates %d/%d/%d Hz, kind %s, complete %s, segments %zu\n", d.size(), d.meta.control_hz,
              d.meta.imu_hz, d.meta.sonar_hz, kind_name(d.meta.kind), d.meta.complete ? "true" : "false",
              d.meta.segments.size());
  for (const auto& p : rep.problems) std::printf("problem: %s\n", p.c_str());
  std::printf("%s\n", rep.ok() ? "valid" : "invalid");
  return rep.ok() ? kOk : kFail;
}

struct TrainArgs {
  fs::path demo, out, report, from;
  std::string kind = "mobility";
  int hidden = 64;
  int window = 0;
  int steps = 3000;
  int batch = 32;
  double lr = 0.001;
  double target = 0;
  std::uint64_t seed = 1;
  int baseline = 0;
};

net::TrainConfig train_config(const TrainArgs& a) {
  net::TrainConfig cfg;
  cfg.steps = a.steps;
  cfg.batch = a.batch;
  cfg.lr = a.lr;
  if (a.target > 0) cfg.target_accuracy = a.target;
  return cfg;
}

void print_report(const net::TrainReport& r) {
  std::printf("steps %d, accuracy %.4f, loss %.4f\n", r.steps_run, r.final_accuracy, r.final_loss);
  for (const auto& [t, s] : r.steps_to_threshold) {
    if (s) {
      std::printf("steps to %.0f%%: %d\n", t * 100, *s);
    } else {
      std::printf("steps to %.0f%%: not reached\n", t * 100);
    }
  }
}

void write_report(const fs::path& p, const net::TrainReport& r, nlohmann::json extra = {}) {
  if (p.empty()) return;
  auto j = net::report_to_json(r);
  for (auto& [k, v] : extra.items()) j[k] = v;
  atomic_write(p, j.dump(2) + "\n");
}

int cmd_train(const TrainArgs& a) {
  const Demonstration d = load_demo(a.demo);
  const ControllerKind kind = parse_kind(a.kind);
  const int m = a.window > 0 ? a.window : default_window(kind);
  const auto ds = window(d, m);
  const auto r = net::train(ds, net::NetworkShape{4, a.hidden, 2, kNumActions, m}, train_config(a), a.seed,
                            demo_digest(d));
  net::save_checkpoint(a.out, r.checkpoint);
  std::printf("%zu windows, m=%d, hidden=%d\n", ds.size(), m, a.hidden);
  print_report(r.report);
  write_report(a.report, r.report);
  return kOk;
}

int cmd_transfer(const TrainArgs& a) {
  const auto source = net::load_checkpoint(a.from);
  const Demonstration d = load_demo(a.demo);
  const auto ds = window(d, a.window > 0 ? a.window : source.shape.m);
  const auto r = net::transfer_train(source, ds, train_config(a), a.seed, demo_digest(d));
  net::save_checkpoint(a.out, r.checkpoint);
  print_report(r.report);
  nlohmann::json extra = nlohmann::json::object();
  if (a.baseline > 0) {
    extra["baseline_steps"] = a.baseline;
    for (const auto& [t, s] : r.report.steps_to_threshold) {
      if (s) std::printf("%.0f%%: %d steps vs %d from scratch (%.0f%%)\n", t * 100, *s, a.baseline,
                         100.0 * *s / a.baseline);
    }
  }
  write_report(a.report, r.report, extra);
  return kOk;
}

struct EvalArgs {
  fs::path checkpoint, demo;
};

int cmd_eval(const EvalArgs& a) {
  const auto ck = net::load_checkpoint(a.checkpoint);
  const auto ds = window(load_demo(a.demo), ck.shape.m);
  std::printf("%zu windows, accuracy %.4f\n", ds.size(), net::evaluate_accuracy(ck, ds));
  return kOk;
}

struct RolloutArgs {
  fs::path scenario, mobility, manipulation, out;
  std::vector<std::uint64_t> seeds;
  bool held_out = false;
  bool trace = false;
};

int cmd_rollout(const RolloutArgs& a) {
  if (a.seeds.empty()) throw UsageError("rollout: --seeds needs at least one seed");
  if (a.scenario.empty() == !a.held_out) throw UsageError("rollout: give exactly one of --scenario or --held-out");
  const auto mob = net::load_checkpoint(a.mobility);
  const auto man = net::load_checkpoint(a.manipulation);
  std::optional<ScenarioSpec> base;
  if (!a.held_out) base = read_scenario(a.scenario);
  nlohmann::json episodes = nlohmann::json::array();
  int ok = 0;
  for (auto seed : a.seeds) {
    ScenarioSpec spec = a.held_out ? course::random_course(seed) : *base;
    if (!a.held_out) spec.seed = seed;
    Simulator sim(spec);
    const EpisodeResult r = run_closed_loop(sim, mob, man);
    ok += r.success() ? 1 : 0;
    std::printf("seed %llu: success=%d delivered=%d returned=%d falls=%d recovered=%d yaw=%.1f ticks=%lld\n",
                static_cast<unsigned long long>(seed), r.success(), r.delivered, r.returned, r.falls, r.recoveries,
                r.final_yaw_error, static_cast<long long>(r.ticks));
    auto j = episode_to_json(r);
    if (!a.trace) j.erase("trace");
    j["seed"] = seed;
    episodes.push_back(j);
  }
  const double rate = static_cast<double>(ok) / static_cast<double>(a.seeds.size());
  std::printf("success %d/%zu (%.0f%%)\n", ok, a.seeds.size(), 100 * rate);
  if (!a.out.empty()) {
    atomic_write(a.out, nlohmann::json{{"episodes", episodes}, {"success_rate", rate}}.dump(2) + "\n");
  }
  return kOk;
}

struct TeleopArgs {
  fs::path scenario, out = ".";
  unsigned short port = 8765;
  std::string address = "127.0.0.1";
  std::string kind = "mobility";
  int sessions = 0;
};

teleop::TeleopServer* g_server = nullptr;

int cmd_teleop(const TeleopArgs& a) {
  teleop::ServerOptions opt;
  opt.port = a.port;
  opt.address = a.address;
  opt.out_dir = a.out;
  opt.kind = parse_kind(a.kind);
  opt.max_sessions = a.sessions;
  fs::create_directories(a.out);
  teleop::TeleopServer server(read_scenario(a.scenario), opt);
  g_server = &server;
  std::signal(SIGINT, [](int) {
    if (g_server) g_server->stop();
  });
  std::printf("listening on ws://%s:%u\n", a.address.c_str(), server.port());
  std::fflush(stdout);
  server.run();
  g_server = nullptr;
  return kOk;
}

struct CourseArgs {
  std::string name;
  std::uint64_t seed = 1;
  fs::path out;
};

int cmd_course(const CourseArgs& a) {
  ScenarioSpec s;
  if (a.name == "random") {
    s = course::random_course(a.seed);
  } else if (a.name == "empty") {
    s = course::empty_corridor();
  } else {
    bool found = false;
    for (const auto& seg : course::named_segments()) {
      if (seg.name == a.name) {
        s = seg.scenario;
        found = true;
      }
    }
    if (!found) throw UsageError("course: unknown name " + a.name);
  }
  const std::string text = scenario_to_text(s);
  if (a.out.empty()) {
    std::fputs(text.c_str(), stdout);
  } else {
    atomic_write(a.out, text);
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"trackbc: demonstrations, training and closed-loop rollout for a tracked robot"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");
  const std::vector<std::string> kinds{"mobility", "manipulation"};
  std::function<int()> run;

  RecordArgs rec;
  auto* c_record = app.add_subcommand("record", "Record a scripted-expert demo on a scenario");
  c_record->add_option("--scenario", rec.scenario, "Scenario file")->required()->check(CLI::ExistingFile);
  c_record->add_option("--out", rec.out, "Demo file to write")->required();
  c_record->add_option("--kind", rec.kind, "Expert variant")->check(CLI::IsMember(kinds));
  c_record->add_option("--max-ticks", rec.max_ticks, "Session cap in control ticks")->check(CLI::PositiveNumber);
  c_record->callback([&] { run = [&] { return cmd_record(rec); }; });

  EditArgs ed;
  auto* c_edit = app.add_subcommand("edit", "Trim, merge or validate demos");
  c_edit->require_subcommand(1);
  auto* c_trim = c_edit->add_subcommand("trim", "Keep records with from <= t <= to; both ends must be idle");
  c_trim->add_option("--in", ed.in, "Input demo")->required()->check(CLI::ExistingFile);
  c_trim->add_option("--from", ed.from, "Start time, s")->required();
  c_trim->add_option("--to", ed.to, "End time, s")->required();
  c_trim->add_option("--out", ed.out, "Demo file to write")->required();
  c_trim->callback([&] { run = [&] { return cmd_trim(ed); }; });
  auto* c_merge = c_edit->add_subcommand("merge", "Concatenate demos joined at idle records");
  c_merge->add_option("inputs", ed.inputs, "Input demos in order")->required()->check(CLI::ExistingFile);
  c_merge->add_option("--out", ed.out, "Demo file to write")->required();
  c_merge->callback([&] { run = [&] { return cmd_merge(ed); }; });
  auto* c_validate = c_edit->add_subcommand("validate", "Check rates, ranges and idle boundaries");
  c_validate->add_option("in", ed.in, "Demo file")->required()->check(CLI::ExistingFile);
  c_validate->callback([&] { run = [&] { return cmd_validate(ed); }; });

  TrainArgs tr;
  auto add_train_opts = [&](CLI::App* c) {
    c->add_option("--demo", tr.demo, "Training demo")->required()->check(CLI::ExistingFile);
    c->add_option("--out", tr.out, "Checkpoint to write")->required();
    c->add_option("--report", tr.report, "Training report (JSON) to write");
    c->add_option("--window", tr.window, "Timesteps per sample m")->check(CLI::PositiveNumber);
    c->add_option("--steps", tr.steps, "Optimizer steps")->check(CLI::NonNegativeNumber);
    c->add_option("--batch", tr.batch, "Batch size")->check(CLI::PositiveNumber);
    c->add_option("--lr", tr.lr, "Adam learning rate")->check(CLI::PositiveNumber);
    c->add_option("--target", tr.target, "Stop once full-set accuracy reaches this")->check(CLI::Range(0.0, 1.0));
    c->add_option("--seed", tr.seed, "Init and batch seed");
  };
  auto* c_train = app.add_subcommand("train", "Train a controller network from scratch");
  add_train_opts(c_train);
  c_train->add_option("--kind", tr.kind, "Controller kind, sets the default window")->check(CLI::IsMember(kinds));
  c_train->add_option("--hidden", tr.hidden, "LSTM hidden units")->check(CLI::PositiveNumber);
  c_train->callback([&] { run = [&] { return cmd_train(tr); }; });
  auto* c_transfer = app.add_subcommand("transfer", "Retrain the head of a trained network on a new demo");
  add_train_opts(c_transfer);
  c_transfer->add_option("--from", tr.from, "Source checkpoint")->required()->check(CLI::ExistingFile);
  c_transfer->add_option("--baseline-steps", tr.baseline, "From-scratch steps to compare against");
  c_transfer->callback([&] { run = [&] { return cmd_transfer(tr); }; });

  EvalArgs ev;
  auto* c_eval = app.add_subcommand("eval", "Accuracy of a checkpoint over a demo");
  c_eval->add_option("--checkpoint", ev.checkpoint, "Checkpoint")->required()->check(CLI::ExistingFile);
  c_eval->add_option("--demo", ev.demo, "Demo")->required()->check(CLI::ExistingFile);
  c_eval->callback([&] { run = [&] { return cmd_eval(ev); }; });

  RolloutArgs ro;
  auto* c_rollout = app.add_subcommand("rollout", "Closed-loop episodes with both networks");
  c_rollout->add_option("--scenario", ro.scenario, "Scenario file; each seed replaces its seed")
      ->check(CLI::ExistingFile);
  c_rollout->add_flag("--held-out", ro.held_out, "Use the generated held-out course for each seed");
  c_rollout->add_option("--mobility", ro.mobility, "Mobility checkpoint")->required()->check(CLI::ExistingFile);
  c_rollout->add_option("--manipulation", ro.manipulation, "Manipulation checkpoint")
      ->required()
      ->check(CLI::ExistingFile);
  c_rollout->add_option("--seeds", ro.seeds, "Seeds, comma separated")->delimiter(',');
  c_rollout->add_option("--out", ro.out, "Results document to write");
  c_rollout->add_flag("--trace", ro.trace, "Include per-tick traces in the results");
  c_rollout->callback([&] { run = [&] { return cmd_rollout(ro); }; });

  TeleopArgs tp;
  auto* c_teleop = app.add_subcommand("teleop", "Host a teleoperation session over a web socket");
  c_teleop->add_option("--scenario", tp.scenario, "Scenario file")->required()->check(CLI::ExistingFile);
  c_teleop->add_option("--port", tp.port, "TCP port, 0 picks a free one");
  c_teleop->add_option("--address", tp.address, "Bind address");
  c_teleop->add_option("--out", tp.out, "Directory for saved demos");
  c_teleop->add_option("--kind", tp.kind, "Recorded demo kind")->check(CLI::IsMember(kinds));
  c_teleop->add_option("--sessions", tp.sessions, "Exit after this many sessions, 0 runs until interrupted");
  c_teleop->callback([&] { run = [&] { return cmd_teleop(tp); }; });

  CourseArgs co;
  auto* c_course = app.add_subcommand("course", "Write a built-in scenario");
  c_course->add_option("--name", co.name, "first, falls, steering, obstacle, new_skill, empty or random")
      ->required();
  c_course->add_option("--seed", co.seed, "Seed for the random course");
  c_course->add_option("--out", co.out, "Scenario file to write, stdout when omitted");
  c_course->callback([&] { run = [&] { return cmd_course(co); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }
  try {
    return run();
  } catch (const UsageError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return kUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kFail;
  }
}
