#pragma once

#include <cmath>
#include <deque>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include "trackbc/domain.hpp"
#include "trackbc/error.hpp"

namespace trackbc {

// First-order IIR section: y[n] = b0 x[n] + b1 x[n-1] - a1 y[n-1].
struct FilterCoeffs {
  double b0 = 1.0;
  double b1 = 0.0;
  double a1 = 0.0;
};

struct FilterState {
  double prev_input = 0.0;
  double prev_output = 0.0;
};

struct TimedSample {
  double t = 0.0;
  double value = 0.0;
};

struct TimedObservation {
  double t = 0.0;
  Observation obs;
};

inline constexpr double kTimeEps = 1e-9;

// Butterworth low-pass of order one via the prewarped bilinear transform.
// A cutoff at or above Nyquist has no realizable design and returns the
// identity filter.
inline FilterCoeffs design_lowpass(double cutoff_hz, double sample_hz) {
  if (!(cutoff_hz > 0.0) || !(sample_hz > 0.0)) {
    throw DomainError("design_lowpass: frequencies must be positive");
  }
  if (cutoff_hz >= sample_hz / 2.0) return FilterCoeffs{1.0, 0.0, 0.0};
  const double k = std::tan(std::numbers::pi * cutoff_hz / sample_hz);
  const double b = k / (1.0 + k);
  return FilterCoeffs{b, b, (k - 1.0) / (k + 1.0)};
}

inline double filter_step(FilterState& state, double x, const FilterCoeffs& c) {
  const double y = c.b0 * x + c.b1 * state.prev_input - c.a1 * state.prev_output;
  state.prev_input = x;
  state.prev_output = y;
  return y;
}

// Zero-order-hold resampler for the four observation channels. Samples must
// be pushed in time order per stream.
class RateAligner {
 public:
  enum Stream { kYaw = 0, kPitch = 1, kRoll = 2, kDistance = 3 };

  void push(Stream s, TimedSample sample) {
    auto& q = pending_[s];
    const double last = !q.empty() ? q.back().t : (latest_[s] ? latest_[s]->t : -1.0);
    if (sample.t < 0.0 || sample.t <= last) {
      throw AlignmentError("samples must be non-negative and strictly increasing in time");
    }
    q.push_back(sample);
  }

  // Observation held at time t, or nothing while some stream has no sample
  // at-or-before t yet.
  std::optional<Observation> at(double t) {
    for (int s = 0; s < 4; ++s) {
      auto& q = pending_[s];
      while (!q.empty() && q.front().t <= t + kTimeEps) {
        latest_[s] = q.front();
        q.pop_front();
      }
    }
    for (const auto& l : latest_) {
      if (!l) return std::nullopt;
    }
    return Observation{latest_[kYaw]->value, latest_[kPitch]->value, latest_[kRoll]->value,
                       latest_[kDistance]->value};
  }

 private:
  std::deque<TimedSample> pending_[4];
  std::optional<TimedSample> latest_[4];
};

inline std::vector<TimedObservation> align_to_control_rate(std::span<const TimedSample> yaw,
                                                           std::span<const TimedSample> pitch,
                                                           std::span<const TimedSample> roll,
                                                           std::span<const TimedSample> sonar,
                                                           double control_hz = 10.0) {
  const std::span<const TimedSample> streams[4] = {yaw, pitch, roll, sonar};
  double end = 0.0;
  bool first = true;
  for (const auto& s : streams) {
    if (s.empty()) throw AlignmentError("align_to_control_rate: empty input stream");
    end = first ? s.back().t : std::min(end, s.back().t);
    first = false;
  }
  RateAligner aligner;
  for (int s = 0; s < 4; ++s) {
    for (const auto& sample : streams[s]) aligner.push(static_cast<RateAligner::Stream>(s), sample);
  }
  std::vector<TimedObservation> out;
  for (long k = 0;; ++k) {
    const double t = static_cast<double>(k) / control_hz;
    if (t > end + kTimeEps) break;
    if (auto o = aligner.at(t)) out.push_back({t, *o});
  }
  return out;
}

// Online pipeline used by the recorder, controller and teleop session: the
// IMU channels go through the low-pass filter, sonar passes through as-is,
// and everything is held to the control ticks.
class StreamConditioner {
 public:
  explicit StreamConditioner(double cutoff_hz = 15.0, double imu_hz = 30.0)
      : coeffs_(design_lowpass(cutoff_hz, imu_hz)) {}

  void push_imu(double t, double yaw, double pitch, double roll) {
    if (!primed_) {
      // Start the filter at rest on the first sample so there is no step
      // transient from zero.
      state_[0] = FilterState{yaw, yaw};
      state_[1] = FilterState{pitch, pitch};
      state_[2] = FilterState{roll, roll};
      primed_ = true;
    }
    aligner_.push(RateAligner::kYaw, {t, filter_step(state_[0], yaw, coeffs_)});
    aligner_.push(RateAligner::kPitch, {t, filter_step(state_[1], pitch, coeffs_)});
    aligner_.push(RateAligner::kRoll, {t, filter_step(state_[2], roll, coeffs_)});
  }

  void push_sonar(double t, double distance) {
    aligner_.push(RateAligner::kDistance, {t, distance});
  }

  std::optional<Observation> at(double t) { return aligner_.at(t); }

  const FilterCoeffs& coeffs() const { return coeffs_; }

 private:
  FilterCoeffs coeffs_;
  FilterState state_[3];
  bool primed_ = false;
  RateAligner aligner_;
};

}  // namespace trackbc
