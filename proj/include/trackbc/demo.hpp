#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "trackbc/domain.hpp"
#include "trackbc/error.hpp"
#include "trackbc/io.hpp"

namespace trackbc {

inline constexpr int kDemoFormatVersion = 1;

enum class ControllerKind { Mobility, Manipulation };

inline const char* kind_name(ControllerKind k) {
  return k == ControllerKind::Mobility ? "mobility" : "manipulation";
}

inline ControllerKind parse_kind(const std::string& s) {
  if (s == "mobility") return ControllerKind::Mobility;
  if (s == "manipulation") return ControllerKind::Manipulation;
  throw ParseError("unknown controller kind '" + s + "'");
}

// Where a run of records came from: ticks [from, to) of one recording.
struct Provenance {
  std::string scenario;  // scenario digest
  std::uint64_t seed = 0;
  std::int64_t from = 0;
  std::int64_t to = 0;

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct DemoMeta {
  int version = kDemoFormatVersion;
  ControllerKind kind = ControllerKind::Mobility;
  std::string created_by = "scripted";
  int control_hz = 10;
  int imu_hz = 30;
  int sonar_hz = 20;
  bool complete = true;
  std::vector<Provenance> segments;

  friend bool operator==(const DemoMeta&, const DemoMeta&) = default;
};

struct DemoRecord {
  std::int64_t tick = 0;  // control ticks, t = tick / 10 s
  Observation obs;
  ActionTriple action;

  double t() const { return static_cast<double>(tick) / 10.0; }

  friend bool operator==(const DemoRecord&, const DemoRecord&) = default;
};

struct Demonstration {
  DemoMeta meta;
  std::vector<DemoRecord> records;

  std::size_t size() const { return records.size(); }

  friend bool operator==(const Demonstration&, const Demonstration&) = default;
};

// Observations are stored at file resolution: 0.01 deg and 0.1 cm.
inline double quantize(double v, double scale) {
  const double q = std::round(v * scale) / scale;
  return q == 0.0 ? 0.0 : q;
}

inline Observation quantize(const Observation& o) {
  return Observation{quantize(o.yaw, 100.0), quantize(o.pitch, 100.0), quantize(o.roll, 100.0),
                     quantize(o.distance, 10.0)};
}

// ---------------------------------------------------------------------------
// Text format

inline nlohmann::json meta_to_json(const DemoMeta& m) {
  nlohmann::json j;
  j["format"] = "trackbc-demo";
  j["version"] = m.version;
  j["kind"] = kind_name(m.kind);
  j["created_by"] = m.created_by;
  j["rates"] = {{"control_hz", m.control_hz}, {"imu_hz", m.imu_hz}, {"sonar_hz", m.sonar_hz}};
  j["complete"] = m.complete;
  j["segments"] = nlohmann::json::array();
  for (const auto& s : m.segments) {
    j["segments"].push_back({{"scenario", s.scenario}, {"seed", s.seed}, {"from", s.from}, {"to", s.to}});
  }
  return j;
}

inline DemoMeta meta_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "trackbc-demo") throw ParseError("demo: not a trackbc demo file");
    DemoMeta m;
    m.version = j.at("version").get<int>();
    if (m.version != kDemoFormatVersion) {
      throw ParseError("demo: unsupported format version " + std::to_string(m.version));
    }
    m.kind = parse_kind(j.at("kind").get<std::string>());
    m.created_by = j.at("created_by").get<std::string>();
    m.control_hz = j.at("rates").at("control_hz").get<int>();
    m.imu_hz = j.at("rates").at("imu_hz").get<int>();
    m.sonar_hz = j.at("rates").at("sonar_hz").get<int>();
    m.complete = j.at("complete").get<bool>();
    for (const auto& s : j.at("segments")) {
      m.segments.push_back({s.at("scenario").get<std::string>(), s.at("seed").get<std::uint64_t>(),
                            s.at("from").get<std::int64_t>(), s.at("to").get<std::int64_t>()});
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("demo: bad metadata record: ") + e.what());
  }
}

inline std::string demo_to_text(const Demonstration& d) {
  std::string out = meta_to_json(d.meta).dump() + "\n";
  char line[160];
  for (const auto& r : d.records) {
    const auto o = quantize(r.obs);
    std::snprintf(line, sizeof(line), "%.1f,%.2f,%.2f,%.2f,%.1f,%d,%d,%d\n", quantize(r.t(), 10.0), o.yaw,
                  o.pitch, o.roll, o.distance, r.action.arm, r.action.steering, r.action.movement);
    out += line;
  }
  return out;
}

inline Demonstration demo_from_text(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line)) throw ParseError("demo: empty file");
  Demonstration d;
  try {
    d.meta = meta_from_json(nlohmann::json::parse(line));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("demo: line 1: ") + e.what());
  }
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    double t, yaw, pitch, roll, dist;
    int ua, us, um;
    char tail = 0;
    const int n = std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf,%lf,%d,%d,%d%c", &t, &yaw, &pitch, &roll, &dist, &ua,
                              &us, &um, &tail);
    if (n != 8) throw ParseError("demo: line " + std::to_string(lineno) + ": expected 8 comma-separated fields");
    DemoRecord r;
    r.tick = std::llround(t * 10.0);
    if (std::fabs(t * 10.0 - static_cast<double>(r.tick)) > 1e-6) {
      throw ParseError("demo: line " + std::to_string(lineno) + ": time off the 0.1 s grid");
    }
    r.obs = Observation{yaw, pitch, roll, dist};
    r.action = ActionTriple{ua, us, um};
    if (!is_valid(r.action)) {
      throw ParseError("demo: line " + std::to_string(lineno) + ": action " + to_string(r.action) + " out of range");
    }
    if (!is_valid(r.obs)) throw ParseError("demo: line " + std::to_string(lineno) + ": invalid observation");
    if (!d.records.empty() && r.tick != d.records.back().tick + 1) {
      throw ParseError("demo: line " + std::to_string(lineno) + ": timestamps must advance by exactly 0.1 s");
    }
    d.records.push_back(r);
  }
  if (d.records.empty()) throw ParseError("demo: no records");
  return d;
}

inline Demonstration load_demo(const std::filesystem::path& path) { return demo_from_text(read_file(path)); }

inline void save_demo(const std::filesystem::path& path, const Demonstration& d) {
  atomic_write(path, demo_to_text(d));
}

inline std::string demo_digest(const Demonstration& d) { return hex_digest(demo_to_text(d)); }

// ---------------------------------------------------------------------------
// Validation

struct ValidationReport {
  std::vector<std::string> problems;
  bool ok() const { return problems.empty(); }
};

inline std::string format_time(double t) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", t);
  return buf;
}

inline ValidationReport validate_demo(const Demonstration& d) {
  ValidationReport rep;
  if (d.meta.control_hz != 10 || d.meta.imu_hz != 30 || d.meta.sonar_hz != 20) {
    rep.problems.push_back("unexpected rates in metadata");
  }
  if (d.records.empty()) {
    rep.problems.push_back("no records");
    return rep;
  }
  for (std::size_t i = 0; i < d.records.size(); ++i) {
    const auto& r = d.records[i];
    if (i > 0 && r.tick != d.records[i - 1].tick + 1) {
      rep.problems.push_back("t=" + format_time(r.t()) + ": timestamp does not advance by 0.1 s");
    }
    if (!is_valid(r.action)) rep.problems.push_back("t=" + format_time(r.t()) + ": action out of range");
    if (!is_valid(r.obs)) rep.problems.push_back("t=" + format_time(r.t()) + ": observation out of range");
  }
  if (!is_idle(d.records.front().action)) {
    rep.problems.push_back("t=" + format_time(d.records.front().t()) + ": first record is not idle " +
                           to_string(d.records.front().action));
  }
  if (!is_idle(d.records.back().action)) {
    rep.problems.push_back("t=" + format_time(d.records.back().t()) + ": last record is not idle " +
                           to_string(d.records.back().action));
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Editing

namespace detail {

inline std::int64_t grid_tick(double t, const char* what) {
  const double scaled = t * 10.0;
  const auto k = std::llround(scaled);
  if (!std::isfinite(t) || std::fabs(scaled - static_cast<double>(k)) > 1e-6) {
    throw RangeError(std::string(what) + " is not on the 0.1 s control grid");
  }
  return k;
}

// Provenance entries covering records [lo, hi] of a demo.
inline std::vector<Provenance> slice_provenance(const std::vector<Provenance>& segs, std::int64_t lo,
                                                std::int64_t hi) {
  std::vector<Provenance> out;
  std::int64_t offset = 0;
  for (const auto& s : segs) {
    const std::int64_t len = s.to - s.from;
    const std::int64_t a = std::max(lo, offset);
    const std::int64_t b = std::min(hi + 1, offset + len);
    if (a < b) out.push_back({s.scenario, s.seed, s.from + (a - offset), s.from + (b - offset)});
    offset += len;
  }
  return out;
}

inline void append_provenance(std::vector<Provenance>& out, const Provenance& p) {
  if (!out.empty() && out.back().scenario == p.scenario && out.back().seed == p.seed && out.back().to == p.from) {
    out.back().to = p.to;
  } else {
    out.push_back(p);
  }
}

}  // namespace detail

// Sub-demo over [t0, t1] (inclusive, seconds from the demo start), rebased to
// start at zero. Both boundary records must be idle.
inline Demonstration trim(const Demonstration& d, double t0, double t1) {
  if (d.records.empty()) throw SizeError("trim: empty demonstration");
  if (!(t0 < t1)) throw RangeError("trim: t0 must be earlier than t1");
  const std::int64_t base = d.records.front().tick;
  const std::int64_t k0 = detail::grid_tick(t0, "trim: t0") - base;
  const std::int64_t k1 = detail::grid_tick(t1, "trim: t1") - base;
  const auto n = static_cast<std::int64_t>(d.records.size());
  if (k0 < 0 || k1 >= n) {
    throw RangeError("trim: [" + format_time(t0) + ", " + format_time(t1) + "] lies outside the demonstration");
  }
  for (std::int64_t k : {k0, k1}) {
    const auto& r = d.records[static_cast<std::size_t>(k)];
    if (!is_idle(r.action)) {
      throw BoundaryError("trim: boundary record at t=" + format_time(r.t()) + " is not idle " +
                          to_string(r.action));
    }
  }
  Demonstration out;
  out.meta = d.meta;
  out.meta.segments = detail::slice_provenance(d.meta.segments, k0, k1);
  out.records.assign(d.records.begin() + k0, d.records.begin() + k1 + 1);
  for (std::size_t i = 0; i < out.records.size(); ++i) out.records[i].tick = static_cast<std::int64_t>(i);
  return out;
}

inline Demonstration merge(std::span<const Demonstration> segments) {
  if (segments.empty()) throw SizeError("merge: no segments");
  if (segments.size() == 1) return segments.front();
  const auto& first = segments.front().meta;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const auto& s = segments[i];
    if (s.records.empty()) throw SizeError("merge: segment " + std::to_string(i) + " is empty");
    if (s.meta.kind != first.kind) throw DomainError("merge: segment " + std::to_string(i) + " has a different controller kind");
    if (s.meta.control_hz != first.control_hz || s.meta.imu_hz != first.imu_hz || s.meta.sonar_hz != first.sonar_hz) {
      throw DomainError("merge: segment " + std::to_string(i) + " has different rates");
    }
  }
  for (std::size_t j = 0; j + 1 < segments.size(); ++j) {
    const auto& end = segments[j].records.back();
    const auto& start = segments[j + 1].records.front();
    if (!is_idle(end.action) || !is_idle(start.action)) {
      throw JunctionError(j, "merge: junction " + std::to_string(j) + " is not idle (segment " + std::to_string(j) +
                                 " ends with " + to_string(end.action) + ", segment " + std::to_string(j + 1) +
                                 " starts with " + to_string(start.action) + ")");
    }
  }
  Demonstration out;
  out.meta = first;
  out.meta.segments.clear();
  for (const auto& s : segments) {
    if (s.meta.created_by != first.created_by) out.meta.created_by = "mixed";
    out.meta.complete = out.meta.complete && s.meta.complete;
    for (const auto& p : s.meta.segments) detail::append_provenance(out.meta.segments, p);
    for (const auto& r : s.records) {
      DemoRecord rr = r;
      rr.tick = static_cast<std::int64_t>(out.records.size());
      out.records.push_back(rr);
    }
  }
  return out;
}

inline Demonstration merge(std::initializer_list<Demonstration> segments) {
  return merge(std::span<const Demonstration>(segments.begin(), segments.size()));
}

// ---------------------------------------------------------------------------
// Datasets

struct WindowedDataset {
  int m = 0;
  std::vector<Observation> windows;  // size() * m rows, sample-major
  std::vector<int> labels;
  std::array<int, kNumActions> class_counts{};

  std::size_t size() const { return labels.size(); }
  std::span<const Observation> window(std::size_t i) const {
    return {windows.data() + i * static_cast<std::size_t>(m), static_cast<std::size_t>(m)};
  }

  void add(std::span<const Observation> x, int label) {
    if (static_cast<int>(x.size()) != m) throw ShapeError("window has wrong length");
    check_action_id(label);
    windows.insert(windows.end(), x.begin(), x.end());
    labels.push_back(label);
    ++class_counts[static_cast<std::size_t>(label)];
  }
};

using ClassWeights = std::array<double, kNumActions>;

inline WindowedDataset window(const Demonstration& d, int m) {
  if (m < 1) throw SizeError("window: m must be positive");
  if (d.records.size() < static_cast<std::size_t>(m)) {
    throw SizeError("window: demonstration has " + std::to_string(d.records.size()) + " records, fewer than m=" +
                    std::to_string(m));
  }
  WindowedDataset ds;
  ds.m = m;
  std::vector<Observation> obs;
  obs.reserve(d.records.size());
  for (const auto& r : d.records) obs.push_back(r.obs);
  for (std::size_t t = static_cast<std::size_t>(m) - 1; t < d.records.size(); ++t) {
    ds.add(std::span<const Observation>(obs).subspan(t + 1 - static_cast<std::size_t>(m), static_cast<std::size_t>(m)),
           encode_action(d.records[t].action).value);
  }
  return ds;
}

// Inverse-frequency balancing: every present class carries the same total
// weight, absent classes weigh zero.
inline ClassWeights class_weights(const WindowedDataset& ds) {
  if (ds.size() == 0) throw SizeError("class_weights: empty dataset");
  int present = 0;
  for (int c : ds.class_counts) present += c > 0 ? 1 : 0;
  ClassWeights w{};
  const double total = static_cast<double>(ds.size());
  for (std::size_t c = 0; c < w.size(); ++c) {
    if (ds.class_counts[c] > 0) w[c] = total / (present * static_cast<double>(ds.class_counts[c]));
  }
  return w;
}

}  // namespace trackbc
