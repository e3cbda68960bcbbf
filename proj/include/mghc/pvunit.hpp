#pragma once

// Reduced-order grid-following PV unit: second-order PLL, phase-error
// modulated power injection and the synchronization-source state machine.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>

#include "mghc/errors.hpp"
#include "mghc/genset.hpp"
#include "mghc/netmodel.hpp"

namespace mghc {

enum class PvMode { kSyncGrid, kOffline, kSyncDiesel, kRamping };
enum class PvSource { kGrid, kDiesel, kNone };

inline const char* to_string(PvMode m) {
  switch (m) {
    case PvMode::kSyncGrid: return "SYNC_GRID";
    case PvMode::kOffline: return "OFFLINE";
    case PvMode::kSyncDiesel: return "SYNC_DIESEL";
    case PvMode::kRamping: return "RAMPING";
  }
  return "?";
}

struct Window {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double x) const { return x >= lo && x <= hi; }
};

struct PvParams {
  double p_max_mw = 0.0;
  double pll_wn = 10.74;   ///< rad/s
  double pll_zeta = 0.8;
  double i_max_pu = 1.2;   ///< current limit, multiple of rated current
  double trip_delay_cycles = 3.0;
  Window vt_window{0.8, 1.2};    ///< pu
  Window ft_window{57.0, 63.0};  ///< Hz
  double ramp_rate_pu_s = 0.5;   ///< system-base pu per second
  double resync_delay_s = 0.2;
  /// Linear sensitivity of output to the PLL phase error; 0 gives a pure
  /// cos(error) dependence.
  double phase_gain = 3.413;

  double trip_delay_s() const { return trip_delay_cycles / kNominalHz; }

  void validate() const {
    auto fail = [](const std::string& f, const std::string& why) {
      throw InvalidConfig("pv." + f + " " + why);
    };
    if (!(p_max_mw >= 0.0)) fail("p_max_mw", "must be >= 0");
    if (!(pll_zeta > 0.0)) fail("pll_zeta", "must be > 0");
    if (!(pll_wn > 0.0)) fail("pll_wn", "must be > 0");
    if (!(trip_delay_cycles >= 0.0)) fail("trip_delay_cycles", "must be >= 0");
    if (!(i_max_pu > 0.0)) fail("i_max_pu", "must be > 0");
    if (!(ramp_rate_pu_s > 0.0)) fail("ramp_rate_pu_s", "must be > 0");
    if (!(resync_delay_s >= 0.0)) fail("resync_delay_s", "must be >= 0");
    if (!(vt_window.lo < vt_window.hi)) fail("vt_window", "must be increasing");
    if (!(ft_window.lo < ft_window.hi)) fail("ft_window", "must be increasing");
    if (phase_gain < 0.0) fail("phase_gain", "must be >= 0");
  }
};

struct PvState {
  PvMode mode = PvMode::kSyncGrid;
  PvSource source = PvSource::kGrid;
  double theta_pll = 0.0;
  double omega_pll = 1.0;
  double p_out_pu = 0.0;                ///< last injected active power
  double ramp_start = 0.0;              ///< time RAMPING began
  std::optional<double> outside_since;  ///< start of a ride-through excursion
  bool tripped = false;                 ///< ride-through trip, permanent
};

/// Wraps an angle to (-pi, pi].
inline double wrap_angle(double a) {
  a = std::remainder(a, 2.0 * kPi);
  return a <= -kPi ? a + 2.0 * kPi : a;
}

struct PllDerivatives {
  double theta = 0.0;
  double omega = 0.0;
};

inline PllDerivatives pll_derivatives(const PvState& st, double theta_bus, const PvParams& p) {
  if (st.mode == PvMode::kOffline) return {};
  const double e = wrap_angle(theta_bus - st.theta_pll);
  return {kOmegaSync * (st.omega_pll - 1.0) + 2.0 * p.pll_zeta * p.pll_wn * e,
          p.pll_wn * p.pll_wn * e / kOmegaSync};
}

/// Frequency seen by the PLL, Hz.
inline double pll_frequency_hz(const PvState& st) { return st.omega_pll * kNominalHz; }

/// Available power reference at time `t` in system pu: ramps after a resync.
inline double pv_power_reference(const PvState& st, const PvParams& p, double t,
                                 double s_base_mva) {
  const double p_max = p.p_max_mw / s_base_mva;
  if (st.mode == PvMode::kOffline) return 0.0;
  if (st.mode == PvMode::kRamping) {
    return std::clamp(p.ramp_rate_pu_s * (t - st.ramp_start), 0.0, p_max);
  }
  return p_max;
}

/// Injection at terminal voltage `v`∠`theta_bus` with partials, system pu.
/// `p_ref` is the available power (see `pv_power_reference`), `p_rated` the
/// unit's rated power that scales the current limit.
inline DeviceInjection pv_device_injection(const PvState& st, const PvParams& p, double v,
                                           double theta_bus, double p_ref, double p_rated) {
  DeviceInjection out;
  if (st.mode == PvMode::kOffline || p_ref <= 0.0) return out;
  const double e = wrap_angle(theta_bus - st.theta_pll);
  const double c = std::cos(e);
  const double s = std::sin(e);
  double shape = c * (1.0 + p.phase_gain * s);
  double dshape = -s * (1.0 + p.phase_gain * s) + c * p.phase_gain * c;
  if (shape >= 1.0) {
    shape = 1.0;
    dshape = 0.0;
  }
  double pw = p_ref * shape;
  double dp_dth = p_ref * dshape;
  double dp_dv = 0.0;
  const double limit = v * p.i_max_pu * p_rated;
  if (limit < pw) {
    pw = limit;
    dp_dth = 0.0;
    dp_dv = p.i_max_pu * p_rated;
  }
  if (pw <= 0.0) return out;
  out.p = pw;
  out.dp_dtheta = dp_dth;
  out.dp_dv = dp_dv;
  return out;
}

/// (P, Q) in system pu; reactive output is held at zero.
inline Complex pv_injection(const PvState& st, const PvParams& p, double v, double theta_bus,
                            double p_ref, double p_rated) {
  return {pv_device_injection(st, p, v, theta_bus, p_ref, p_rated).p, 0.0};
}

struct PvTransitionContext {
  std::optional<double> islanding_time;
  GensetMode genset_mode = GensetMode::kOffline;
  std::optional<double> genset_online_time;
  bool energized = true;   ///< terminal bus has a voltage source behind it
  double v_term = 1.0;     ///< pu
  double theta_bus = 0.0;  ///< rad, used to re-lock the PLL on resync
  double omega_bus = 1.0;  ///< pu, network frequency
  double p_ref = 0.0;      ///< current available power, system pu
  double p_max = 0.0;      ///< system pu
};

/// Applies every mode transition due at time `t`.
inline PvState pv_mode_transition(PvState st, const PvParams& p, double t,
                                  const PvTransitionContext& ctx) {
  const bool islanded = ctx.islanding_time && t + kEventTimeTol >= *ctx.islanding_time;
  if (st.mode == PvMode::kSyncGrid && islanded) {
    if (ctx.genset_mode == GensetMode::kOnline) {
      st.mode = PvMode::kSyncDiesel;
      st.source = PvSource::kDiesel;
    } else if (t + kEventTimeTol >= *ctx.islanding_time + p.trip_delay_s()) {
      st.mode = PvMode::kOffline;
      st.source = PvSource::kNone;
      st.p_out_pu = 0.0;
      st.outside_since.reset();
    }
  }
  if (st.mode == PvMode::kOffline && !st.tripped && ctx.genset_mode == GensetMode::kOnline &&
      ctx.genset_online_time && t + kEventTimeTol >= *ctx.genset_online_time + p.resync_delay_s) {
    st.mode = PvMode::kRamping;
    st.source = PvSource::kDiesel;
    st.ramp_start = t;
    st.theta_pll = ctx.theta_bus;
    st.omega_pll = ctx.omega_bus;
  }
  if (st.mode == PvMode::kRamping && ctx.p_ref >= ctx.p_max) st.mode = PvMode::kSyncDiesel;

  const bool synced = st.mode == PvMode::kSyncGrid || st.mode == PvMode::kSyncDiesel;
  if (synced && ctx.energized) {
    const bool outside = !p.vt_window.contains(ctx.v_term) ||
                         !p.ft_window.contains(pll_frequency_hz(st));
    if (!outside) {
      st.outside_since.reset();
    } else if (!st.outside_since) {
      st.outside_since = t;
    } else if (t - *st.outside_since > p.trip_delay_s() + kEventTimeTol) {
      st.mode = PvMode::kOffline;
      st.source = PvSource::kNone;
      st.p_out_pu = 0.0;
      st.tripped = true;
    }
  } else {
    st.outside_since.reset();
  }
  return st;
}

}  // namespace mghc
