#include <gtest/gtest.h>

#include <filesystem>

#include "trackbc/course.hpp"
#include "trackbc/io.hpp"

using namespace trackbc;
namespace fs = std::filesystem;

// The checked-in scenario files are the built-in courses, byte for byte.
TEST(ScenarioFiles, MatchTheBuiltInCourses) {
  const fs::path dir = fs::path(TRACKBC_SOURCE_DIR) / "scenarios";
  for (const auto& seg : course::named_segments()) {
    const auto file = dir / (seg.name + ".json");
    ASSERT_TRUE(fs::exists(file)) << file;
    EXPECT_EQ(read_file(file), scenario_to_text(seg.scenario)) << file;
  }
  EXPECT_EQ(read_file(dir / "empty.json"), scenario_to_text(course::empty_corridor()));
}

TEST(ScenarioFiles, HeldOutCoursesAreValidAndDistinct) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto s = course::random_course(seed);
    EXPECT_NO_THROW(validate(s));
    EXPECT_FALSE(s == course::random_course(seed + 1));
    EXPECT_EQ(s.perturbations.size(), 3u);
  }
}
