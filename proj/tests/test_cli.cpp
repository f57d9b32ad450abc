#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>

#include "trackbc/course.hpp"
#include "trackbc/demo.hpp"
#include "trackbc/io.hpp"
#include "trackbc/net/checkpoint.hpp"

using namespace trackbc;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
};

const fs::path& work_dir() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / "trackbc_cli";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

Run cli(const std::string& args) {
  const auto log = work_dir() / "last.log";
  const std::string cmd = std::string(TRACKBC_CLI) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, read_file(log)};
}

std::string path(const std::string& name) { return (work_dir() / name).string(); }

// Scenario files for the named courses, written once.
void write_courses() {
  static bool done = false;
  if (done) return;
  for (const auto& seg : course::named_segments()) {
    atomic_write(work_dir() / (seg.name + ".json"), scenario_to_text(seg.scenario));
  }
  done = true;
}

}  // namespace

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(cli("").code, 2);
  EXPECT_EQ(cli("frobnicate").code, 2);
  EXPECT_EQ(cli("record --bogus").code, 2);
  EXPECT_EQ(cli("course --name falls --colour red").code, 2);
  EXPECT_EQ(cli("course --name nowhere").code, 2);
  EXPECT_EQ(cli("--help").code, 0);
}

TEST(Cli, RecordIsByteIdenticalAcrossRuns) {
  write_courses();
  const auto r1 = cli("record --scenario " + path("falls.json") + " --out " + path("falls_a.demo"));
  ASSERT_EQ(r1.code, 0) << r1.out;
  EXPECT_NE(r1.out.find("records"), std::string::npos);
  ASSERT_EQ(cli("record --scenario " + path("falls.json") + " --out " + path("falls_b.demo")).code, 0);
  EXPECT_EQ(read_file(path("falls_a.demo")), read_file(path("falls_b.demo")));
  const auto v = cli("edit validate " + path("falls_a.demo"));
  EXPECT_EQ(v.code, 0) << v.out;
  EXPECT_NE(v.out.find("valid"), std::string::npos);
}

TEST(Cli, MissingScenarioFailsWithoutOutput) {
  const auto r = cli("record --scenario " + path("missing.json") + " --out " + path("never.demo"));
  EXPECT_NE(r.code, 0);
  EXPECT_FALSE(fs::exists(path("never.demo")));
  atomic_write(path("broken.json"), "{\"corridor_length\": 10");
  const auto b = cli("record --scenario " + path("broken.json") + " --out " + path("never.demo"));
  EXPECT_EQ(b.code, 1);
  EXPECT_FALSE(fs::exists(path("never.demo")));
}

TEST(Cli, EditTrimMergeValidate) {
  write_courses();
  std::string inputs;
  for (const char* name : {"first", "falls", "steering", "obstacle"}) {
    ASSERT_EQ(cli(std::string("record --scenario ") + path(std::string(name) + ".json") + " --out " +
                  path(std::string(name) + ".demo"))
                  .code,
              0);
    inputs += " " + path(std::string(name) + ".demo");
  }
  const auto m = cli("edit merge" + inputs + " --out " + path("merged.demo"));
  ASSERT_EQ(m.code, 0) << m.out;
  EXPECT_NE(m.out.find("4 segments"), std::string::npos);
  EXPECT_EQ(cli("edit validate " + path("merged.demo")).code, 0);

  const auto d = load_demo(path("first.demo"));
  std::size_t k = 0;
  while (is_idle(d.records[k].action)) ++k;
  const auto t = cli("edit trim --in " + path("first.demo") + " --from " + format_time(d.records[k].t()) +
                     " --to " + format_time(d.records.back().t()) + " --out " + path("trimmed.demo"));
  EXPECT_EQ(t.code, 1);
  EXPECT_NE(t.out.find("t=" + format_time(d.records[k].t())), std::string::npos) << t.out;
  EXPECT_FALSE(fs::exists(path("trimmed.demo")));

  auto bad = d;
  bad.records.front().action = ActionTriple{0, 0, 1};
  save_demo(path("bad.demo"), bad);
  const auto v = cli("edit validate " + path("bad.demo"));
  EXPECT_EQ(v.code, 1);
  EXPECT_NE(v.out.find("t=0.0"), std::string::npos);
}

TEST(Cli, TrainEvalTransferRollout) {
  write_courses();
  ASSERT_EQ(cli("record --scenario " + path("falls.json") + " --out " + path("t.demo")).code, 0);
  const auto t = cli("train --demo " + path("t.demo") + " --out " + path("mob.ckpt") +
                     " --hidden 8 --steps 3 --report " + path("report.json"));
  ASSERT_EQ(t.code, 0) << t.out;
  const auto ck = net::load_checkpoint(path("mob.ckpt"));
  EXPECT_EQ(ck.shape.m, 25);
  EXPECT_EQ(ck.shape.hidden, 8);
  EXPECT_EQ(nlohmann::json::parse(read_file(path("report.json"))).at("steps_run"), 3);
  ASSERT_EQ(cli("train --demo " + path("t.demo") + " --out " + path("man.ckpt") + " --kind manipulation --hidden 8 --steps 1")
                .code,
            0);
  EXPECT_EQ(net::load_checkpoint(path("man.ckpt")).shape.m, 55);

  const auto e = cli("eval --checkpoint " + path("mob.ckpt") + " --demo " + path("t.demo"));
  EXPECT_EQ(e.code, 0);
  EXPECT_NE(e.out.find("accuracy"), std::string::npos);

  const auto x = cli("transfer --from " + path("mob.ckpt") + " --demo " + path("t.demo") + " --out " +
                     path("tr.ckpt") + " --steps 2 --baseline-steps 100");
  EXPECT_EQ(x.code, 0) << x.out;
  EXPECT_TRUE(net::load_checkpoint(path("tr.ckpt")).meta.transfer);

  const std::string nets = " --mobility " + path("mob.ckpt") + " --manipulation " + path("man.ckpt");
  EXPECT_EQ(cli("rollout --held-out" + nets).code, 2);
  EXPECT_EQ(cli("rollout" + nets + " --seeds 1").code, 2);
  const auto r = cli("rollout --held-out --seeds 1" + nets + " --out " + path("episodes.json"));
  ASSERT_EQ(r.code, 0) << r.out;
  const auto j = nlohmann::json::parse(read_file(path("episodes.json")));
  ASSERT_EQ(j.at("episodes").size(), 1u);
  EXPECT_EQ(j.at("episodes")[0].at("seed"), 1);
  EXPECT_FALSE(j.at("episodes")[0].contains("trace"));
}

TEST(Cli, CourseWritesAParsableScenario) {
  const auto r = cli("course --name random --seed 4 --out " + path("r4.json"));
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(load_scenario(read_file(path("r4.json"))), course::random_course(4));
}
