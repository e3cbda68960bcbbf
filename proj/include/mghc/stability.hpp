#pragma once

// Stable/Unstable classification from the oscillation envelopes of genset
// speed and torque after islanding, plus trip and frequency checks.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "mghc/engine.hpp"
#include "mghc/errors.hpp"

namespace mghc {

enum class Outcome { kStable, kUnstable };

enum class Reason {
  kNone,
  kGrowingOscillation,
  kSustainedOscillation,
  kFrequencyTrip,
  kVoltageTrip,
  kDeviceTrip,
  kSolverDivergence,
};

inline const char* to_string(Outcome o) { return o == Outcome::kStable ? "Stable" : "Unstable"; }

inline const char* to_string(Reason r) {
  switch (r) {
    case Reason::kNone: return "NONE";
    case Reason::kGrowingOscillation: return "GROWING_OSCILLATION";
    case Reason::kSustainedOscillation: return "SUSTAINED_OSCILLATION";
    case Reason::kFrequencyTrip: return "FREQUENCY_TRIP";
    case Reason::kVoltageTrip: return "VOLTAGE_TRIP";
    case Reason::kDeviceTrip: return "DEVICE_TRIP";
    case Reason::kSolverDivergence: return "SOLVER_DIVERGENCE";
  }
  return "?";
}

struct Thresholds {
  double settle_s = 0.5;
  double window_s = 1.0;
  double r_damped = 0.5;
  double r_growing = 1.1;
  double freq_tol_hz = 0.1;
  /// Peak-to-peak amplitudes below this count as no oscillation at all.
  double amplitude_floor = 1e-6;

  void validate() const {
    if (!(settle_s >= 0.0)) throw InvalidConfig("stability.settle_s must be >= 0");
    if (!(window_s > 0.0)) throw InvalidConfig("stability.window_s must be > 0");
    if (!(r_damped > 0.0 && r_damped < r_growing)) {
      throw InvalidConfig("stability.r_damped must be in (0, r_growing)");
    }
    if (!(freq_tol_hz > 0.0)) throw InvalidConfig("stability.freq_tol_hz must be > 0");
    if (!(amplitude_floor >= 0.0)) throw InvalidConfig("stability.amplitude_floor must be >= 0");
  }
};

struct Verdict {
  Outcome outcome = Outcome::kStable;
  Reason reason = Reason::kNone;
  double r_speed = 0.0;
  double r_torque = 0.0;
  double f_final_hz = kNominalHz;

  bool stable() const { return outcome == Outcome::kStable; }
  double ratio() const { return std::max(r_speed, r_torque); }
};

/// Peak-to-peak amplitude of each full `window_s` window of [t_start, end].
inline std::vector<double> envelope(std::span<const double> time, std::span<const double> values,
                                    double t_start, double window_s) {
  if (time.size() != values.size()) throw InvalidArgument("time and values differ in length");
  if (!(window_s > 0.0)) throw InvalidArgument("window_s must be > 0");
  if (time.empty()) throw InsufficientData("empty series");
  constexpr double kTol = 1e-9;
  const double span = time.back() - t_start;
  const auto n = span > 0.0 ? static_cast<std::size_t>(std::floor(span / window_s + kTol)) : 0;
  if (n < 2) throw InsufficientData("fewer than 2 full windows after t=" + std::to_string(t_start));
  std::vector<double> amp(n, 0.0);
  std::vector<double> lo(n, std::numeric_limits<double>::infinity());
  std::vector<double> hi(n, -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < time.size(); ++i) {
    const double rel = (time[i] - t_start) / window_s;
    if (rel < -kTol) continue;
    auto k = static_cast<std::size_t>(std::max(0.0, std::floor(rel + kTol)));
    // The closing sample of the last window belongs to it.
    if (k == n && std::abs(rel - static_cast<double>(n)) <= kTol) k = n - 1;
    if (k >= n) continue;
    lo[k] = std::min(lo[k], values[i]);
    hi[k] = std::max(hi[k], values[i]);
  }
  for (std::size_t k = 0; k < n; ++k) amp[k] = hi[k] >= lo[k] ? hi[k] - lo[k] : 0.0;
  return amp;
}

/// Last-window over first-window amplitude.
inline double envelope_ratio(const std::vector<double>& amp, double floor) {
  const double first = amp.front();
  const double last = amp.back();
  if (last <= floor) return 0.0;
  if (first <= floor) return std::numeric_limits<double>::infinity();
  return last / first;
}

inline Verdict classify(const SimResult& res, const Thresholds& th = {}) {
  th.validate();
  for (auto name : {channel::kGenSpeed, channel::kGenTorque}) {
    if (!res.has(name)) throw InvalidArgument("missing channel " + std::string(name));
  }
  Verdict v;
  const auto& speed = res.channel(channel::kGenSpeed);
  const auto& torque = res.channel(channel::kGenTorque);
  if (!speed.empty()) v.f_final_hz = speed.back() * kNominalHz;

  auto unstable = [&](Reason r) {
    v.outcome = Outcome::kUnstable;
    v.reason = r;
    return v;
  };
  if (res.termination != Termination::kCompleted) return unstable(Reason::kSolverDivergence);

  const double t0 = (res.islanded ? res.islanding_time_s : 0.0) + th.settle_s;
  v.r_speed = envelope_ratio(envelope(res.time, speed, t0, th.window_s), th.amplitude_floor);
  v.r_torque = envelope_ratio(envelope(res.time, torque, t0, th.window_s), th.amplitude_floor);

  if (res.pv_ride_through_trip || res.genset_frequency_trip) return unstable(Reason::kDeviceTrip);
  const double r = v.ratio();
  if (r > th.r_growing) return unstable(Reason::kGrowingOscillation);
  if (r > th.r_damped) return unstable(Reason::kSustainedOscillation);
  if (std::abs(v.f_final_hz - kNominalHz) > th.freq_tol_hz) return unstable(Reason::kFrequencyTrip);
  return v;
}

}  // namespace mghc
