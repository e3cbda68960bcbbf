#pragma once

// Synthetic genset traces for classifier checks.

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "mghc/stability.hpp"

namespace synthetic {

/// Speed and torque offset by `dev(t - t_isl)` after islanding, zero before.
inline mghc::SimResult result(const std::function<double(double)>& dev, double t_isl = 3.0,
                              double t_end = 10.0, double dt = 1e-3) {
  using namespace mghc;
  SimResult r;
  r.names = {std::string(channel::kGenSpeed), std::string(channel::kGenTorque)};
  r.data.resize(2);
  const auto n = static_cast<std::size_t>(std::llround(t_end / dt));
  for (std::size_t i = 0; i <= n; ++i) {
    const double t = static_cast<double>(i) * dt;
    const double x = t >= t_isl ? dev(t - t_isl) : 0.0;
    r.time.push_back(t);
    r.data[0].push_back(1.0 + x);
    r.data[1].push_back(0.3 + 2.0 * x);
  }
  r.islanded = true;
  r.islanding_time_s = t_isl;
  r.t_end_s = t_end;
  return r;
}

struct Case {
  double sigma;  ///< envelope exponent, 1/s
  double hz;
  mghc::Outcome outcome;
  mghc::Reason reason;
};

inline mghc::SimResult oscillation(const Case& c) {
  return result([c](double t) { return 0.01 * std::exp(c.sigma * t) * std::sin(2.0 * mghc::kPi * c.hz * t); });
}

/// Decaying, growing and constant-amplitude oscillations.
inline std::vector<Case> grid() {
  using mghc::Outcome;
  using mghc::Reason;
  return {{-1.0, 1.0, Outcome::kStable, Reason::kNone},
          {-0.5, 2.0, Outcome::kStable, Reason::kNone},
          {-0.3, 1.5, Outcome::kStable, Reason::kNone},
          {-0.8, 3.0, Outcome::kStable, Reason::kNone},
          {0.1, 1.0, Outcome::kUnstable, Reason::kGrowingOscillation},
          {0.3, 2.0, Outcome::kUnstable, Reason::kGrowingOscillation},
          {0.5, 1.5, Outcome::kUnstable, Reason::kGrowingOscillation},
          {0.0, 1.0, Outcome::kUnstable, Reason::kSustainedOscillation},
          {0.0, 2.0, Outcome::kUnstable, Reason::kSustainedOscillation},
          {0.0, 3.0, Outcome::kUnstable, Reason::kSustainedOscillation}};
}

}  // namespace synthetic
