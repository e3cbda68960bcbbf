#pragma once

// Diesel generator: classical swing equation, droop governor with an
// isochronous integrator that engages once islanded, integral AVR, and the
// OFFLINE -> STARTING -> ONLINE start-up sequence.

#include <algorithm>
#include <cmath>
#include <complex>
#include <optional>
#include <string>

#include "mghc/errors.hpp"
#include "mghc/netmodel.hpp"

namespace mghc {

inline constexpr double kNominalHz = 60.0;
inline constexpr double kOmegaSync = 2.0 * kPi * kNominalHz;

enum class GensetMode { kOffline, kStarting, kOnline };

inline const char* to_string(GensetMode m) {
  switch (m) {
    case GensetMode::kOffline: return "OFFLINE";
    case GensetMode::kStarting: return "STARTING";
    case GensetMode::kOnline: return "ONLINE";
  }
  return "?";
}

/// Machine constants are on the machine base (`rated_mva`).
struct GensetParams {
  double rated_mva = 3.5;
  double H = 1.233;          ///< inertia constant, s
  double D = 0.5373;         ///< pu torque per pu speed deviation
  double Xd_t = 0.3;         ///< transient reactance, pu
  double R_droop = 0.06538;  ///< governor droop, pu
  double Tg = 0.6155;        ///< governor time constant, s
  double Ki_iso = 9.811;     ///< isochronous integral gain, 1/s
  double Ta = 0.5;           ///< AVR time constant, s
  double Ka = 50.0;          ///< AVR gain
  double v_set = 1.0;        ///< AVR terminal voltage set point, pu
  double p_ref_mw = 2.0;     ///< scheduled output when initially online
  double start_delay_s = 0.1;
  double eq_min = 0.5;
  double eq_max = 2.0;
  /// Fastest rise of mechanical torque, pu/s (engine load acceptance).
  double tm_rate_up = 0.9588;

  void validate() const {
    auto fail = [](const std::string& f, const std::string& why) {
      throw InvalidConfig("genset." + f + " " + why);
    };
    if (!(rated_mva > 0.0)) fail("rated_mva", "must be > 0");
    if (!(H > 0.0)) fail("H", "must be > 0");
    if (!(Tg > 0.0)) fail("Tg", "must be > 0");
    if (!(Ta > 0.0)) fail("Ta", "must be > 0");
    if (!(R_droop > 0.0 && R_droop <= 0.1)) fail("R_droop", "must be in (0, 0.1]");
    if (!(start_delay_s >= 0.0)) fail("start_delay_s", "must be >= 0");
    if (!(Xd_t > 0.0)) fail("Xd_t", "must be > 0");
    if (D < 0.0) fail("D", "must be >= 0");
    if (Ki_iso < 0.0) fail("Ki_iso", "must be >= 0");
    if (p_ref_mw < 0.0) fail("p_ref_mw", "must be >= 0");
    if (!(eq_min > 0.0 && eq_min < eq_max)) fail("eq_min", "must be in (0, eq_max)");
    if (!(tm_rate_up > 0.0)) fail("tm_rate_up", "must be > 0");
  }
};

struct GensetState {
  GensetMode mode = GensetMode::kOffline;
  double delta = 0.0;  ///< rotor (EMF) angle in the synchronous frame, rad
  double omega = 1.0;  ///< rotor speed, pu
  double tm = 0.0;     ///< mechanical torque, pu
  double x_iso = 0.0;  ///< isochronous integrator, pu
  double eq = 1.0;     ///< EMF magnitude behind Xd_t, pu
  double p_set = 0.0;  ///< governor load reference, pu
};

struct GensetDerivatives {
  double delta = 0.0;
  double omega = 0.0;
  double tm = 0.0;
  double x_iso = 0.0;
  double eq = 0.0;
};

/// `pe` is the electrical output in pu of the machine base and `v_term` the
/// terminal voltage magnitude.
inline GensetDerivatives genset_derivatives(const GensetState& st, const GensetParams& p,
                                            double pe, double v_term, bool islanded) {
  if (st.mode != GensetMode::kOnline) {
    throw ContractViolation(std::string("genset_derivatives called while ") + to_string(st.mode));
  }
  const double dw = st.omega - 1.0;
  const double te = pe / st.omega;
  GensetDerivatives d;
  d.delta = kOmegaSync * dw;
  d.omega = (st.tm - te - p.D * dw) / (2.0 * p.H);
  d.tm = std::min((st.p_set - dw / p.R_droop + st.x_iso - st.tm) / p.Tg, p.tm_rate_up);
  d.x_iso = islanded ? -p.Ki_iso * dw : 0.0;
  d.eq = p.Ka * (p.v_set - v_term) / p.Ta;
  if ((st.eq >= p.eq_max && d.eq > 0.0) || (st.eq <= p.eq_min && d.eq < 0.0)) d.eq = 0.0;
  return d;
}

/// Electrical torque for a given output, `te * omega == pe`.
inline double genset_torque(const GensetState& st, double pe) { return pe / st.omega; }

/// Injection (machine base) of the EMF `eq∠delta` behind `Xd_t` into a
/// terminal at `v_term`. Zero unless ONLINE.
inline Complex genset_injection(const GensetState& st, const GensetParams& p, Complex v_term) {
  if (st.mode != GensetMode::kOnline) return {};
  const Complex e = std::polar(st.eq, st.delta);
  const Complex i = (e - v_term) / Complex(0.0, p.Xd_t);
  return v_term * std::conj(i);
}

struct GensetLifecycleContext {
  std::optional<double> islanding_time;
  /// Angle the rotor is aligned to when it comes online (terminal bus angle).
  double bus_angle = 0.0;
};

inline constexpr double kEventTimeTol = 1e-9;

/// Applies every start-up transition due at time `t`.
inline GensetState genset_lifecycle(GensetState st, const GensetParams& p, double t,
                                    const GensetLifecycleContext& ctx) {
  if (!ctx.islanding_time) return st;
  const double t_isl = *ctx.islanding_time;
  if (st.mode == GensetMode::kOffline && t + kEventTimeTol >= t_isl) {
    st.mode = GensetMode::kStarting;
  }
  if (st.mode == GensetMode::kStarting && t + kEventTimeTol >= t_isl + p.start_delay_s) {
    st.mode = GensetMode::kOnline;
    st.omega = 1.0;
    st.tm = 0.0;
    st.x_iso = 0.0;
    st.p_set = 0.0;
    st.delta = ctx.bus_angle;
    st.eq = p.v_set;
  }
  return st;
}

/// Grid-paralleled equilibrium from a solved terminal voltage and the
/// machine's injection there, both on the system base.
inline GensetState genset_equilibrium(const GensetParams& p, Complex v_term, Complex s_sys,
                                      double s_base_mva) {
  const double x_sys = p.Xd_t * s_base_mva / p.rated_mva;
  const Complex i = std::conj(s_sys / v_term);
  const Complex e = v_term + Complex(0.0, x_sys) * i;
  GensetState st;
  st.mode = GensetMode::kOnline;
  st.delta = std::arg(e);
  st.eq = std::abs(e);
  st.omega = 1.0;
  st.tm = s_sys.real() * s_base_mva / p.rated_mva;
  st.p_set = st.tm;
  st.x_iso = 0.0;
  return st;
}

}  // namespace mghc
