#pragma once

// Fixed-step simulation of the genset + PV + network system: event schedule,
// RK4 over the concatenated device states with the network re-solved at every
// stage, and a decimating multi-channel recorder.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mghc/errors.hpp"
#include "mghc/genset.hpp"
#include "mghc/netmodel.hpp"
#include "mghc/pvunit.hpp"
#include "mghc/rk4.hpp"

namespace mghc {

inline constexpr double kLowLoadMw = 1.0;
inline constexpr double kHighLoadMw = 2.8;

enum class DieselStatus { kOff, kOn };

inline const char* to_string(DieselStatus d) { return d == DieselStatus::kOn ? "ON" : "OFF"; }

enum class EventKind { kIslanding, kPvTrip, kGensetOnline, kPvResyncStart, kLoadStep };

inline const char* to_string(EventKind k) {
  switch (k) {
    case EventKind::kIslanding: return "ISLANDING";
    case EventKind::kPvTrip: return "PV_TRIP";
    case EventKind::kGensetOnline: return "GENSET_ONLINE";
    case EventKind::kPvResyncStart: return "PV_RESYNC_START";
    case EventKind::kLoadStep: return "LOAD_STEP";
  }
  return "?";
}

struct Event {
  double time_s = 0.0;
  EventKind kind = EventKind::kIslanding;
  double value = 0.0;  ///< new total load in MW for LOAD_STEP

  friend bool operator==(const Event&, const Event&) = default;
};

struct SimConfig {
  double t_end_s = 10.0;
  double dt_s = 1e-3;
  std::optional<double> islanding_time_s = 3.0;
  double load_mw = kLowLoadMw;
  DieselStatus diesel_initial = DieselStatus::kOn;
  double pv_fraction = 0.0;
  bool pv_present = true;
  Network network = bcm_network();
  int genset_bus = 103;
  int pv_bus = 103;
  double grid_v_pu = 1.0;
  double grid_x_pu = 0.02;
  GensetParams genset;
  PvParams pv;  ///< p_max_mw is derived from load_mw * pv_fraction
  std::vector<int> record_buses{104};
  int record_every = 10;
  PowerFlowOptions power_flow;
  std::vector<Event> extra_events;

  double pv_p_max_mw() const { return load_mw * pv_fraction; }
  bool pv_active() const { return pv_present && pv_p_max_mw() > 0.0; }

  void validate() const {
    if (!(dt_s > 0.0 && dt_s <= 0.01)) throw InvalidConfig("engine.dt_s must be in (0, 0.01]");
    if (!(t_end_s > 0.0)) throw InvalidConfig("engine.t_end_s must be > 0");
    if (islanding_time_s && !(*islanding_time_s < t_end_s)) {
      throw InvalidConfig("engine.islanding_time_s must be < engine.t_end_s");
    }
    if (islanding_time_s && *islanding_time_s < 0.0) {
      throw InvalidConfig("engine.islanding_time_s must be >= 0");
    }
    if (!(pv_fraction >= 0.0)) throw InvalidConfig("pv_fraction must be >= 0");
    if (!(load_mw > 0.0)) throw InvalidConfig("load must be > 0 MW");
    if (record_every < 1) throw InvalidConfig("engine.record_every must be >= 1");
    if (!(grid_x_pu > 0.0)) throw InvalidConfig("engine.grid_x_pu must be > 0");
    if (!network.has_bus(genset_bus)) throw InvalidConfig("genset.bus not in network");
    if (!network.has_bus(pv_bus)) throw InvalidConfig("pv.bus not in network");
    for (int b : record_buses) {
      if (!network.has_bus(b)) {
        throw InvalidConfig("engine.record_buses: unknown bus " + std::to_string(b));
      }
    }
    genset.validate();
    PvParams p = pv;
    p.p_max_mw = pv_p_max_mw();
    p.validate();
  }
};

/// Ordered event list for a configuration. Events of equal time keep the
/// order ISLANDING, PV_TRIP, GENSET_ONLINE, PV_RESYNC_START.
inline std::vector<Event> schedule_events(const SimConfig& cfg) {
  std::vector<Event> ev;
  if (cfg.islanding_time_s) {
    const double ti = *cfg.islanding_time_s;
    ev.push_back({ti, EventKind::kIslanding});
    if (cfg.diesel_initial == DieselStatus::kOff) {
      const double t_on = ti + cfg.genset.start_delay_s;
      ev.push_back({t_on, EventKind::kGensetOnline});
      if (cfg.pv_active()) {
        ev.push_back({ti + cfg.pv.trip_delay_s(), EventKind::kPvTrip});
        ev.push_back({t_on + cfg.pv.resync_delay_s, EventKind::kPvResyncStart});
      }
    }
  }
  for (const auto& e : cfg.extra_events) ev.push_back(e);
  std::stable_sort(ev.begin(), ev.end(), [](const Event& a, const Event& b) {
    if (a.time_s != b.time_s) return a.time_s < b.time_s;
    return static_cast<int>(a.kind) < static_cast<int>(b.kind);
  });
  return ev;
}

enum class Termination { kCompleted, kSolverDivergence, kNumericOverflow };

inline const char* to_string(Termination t) {
  switch (t) {
    case Termination::kCompleted: return "completed";
    case Termination::kSolverDivergence: return "solver-divergence";
    case Termination::kNumericOverflow: return "numeric-overflow";
  }
  return "?";
}

namespace channel {
inline constexpr std::string_view kGenP = "gen_p_mw";
inline constexpr std::string_view kGenQ = "gen_q_mvar";
inline constexpr std::string_view kGenSpeed = "gen_speed_pu";
inline constexpr std::string_view kGenTorque = "gen_torque_pu";
inline constexpr std::string_view kPvP = "pv_p_mw";
inline constexpr std::string_view kPvQ = "pv_q_mvar";
inline constexpr std::string_view kGridP = "grid_p_mw";
inline constexpr std::string_view kLoadP = "load_p_mw";
inline constexpr std::string_view kLossP = "loss_p_mw";
inline constexpr std::string_view kPllHz = "pv_pll_hz";

inline std::string bus_p(int bus) { return "bus" + std::to_string(bus) + "_p_mw"; }
inline std::string bus_q(int bus) { return "bus" + std::to_string(bus) + "_q_mvar"; }
}  // namespace channel

/// Recorded run. Every channel shares `time`.
struct SimResult {
  std::vector<double> time;
  std::vector<std::string> names;
  std::vector<std::vector<double>> data;

  double islanding_time_s = 0.0;
  bool islanded = false;
  double t_end_s = 0.0;
  GensetMode final_genset_mode = GensetMode::kOffline;
  PvMode final_pv_mode = PvMode::kOffline;
  bool pv_ride_through_trip = false;
  bool genset_frequency_trip = false;
  Termination termination = Termination::kCompleted;
  std::string message;

  bool has(std::string_view name) const {
    return std::find(names.begin(), names.end(), name) != names.end();
  }
  const std::vector<double>& channel(std::string_view name) const {
    auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw InvalidArgument("no channel " + std::string(name));
    return data[static_cast<std::size_t>(it - names.begin())];
  }
};

/// Genset frequency band outside of which the machine counts as tripped, Hz.
inline constexpr Window kGensetFrequencyBand{55.0, 65.0};

class Simulation {
 public:
  static constexpr std::size_t kStates = 7;
  using Vec = std::array<double, kStates>;
  enum Index : std::size_t { kDelta, kOmega, kTm, kXiso, kEq, kThetaPll, kOmegaPll };

  /// Algebraic solution at one instant, system pu.
  struct Outputs {
    bool energized = false;
    double frequency = 1.0;
    Complex gen;
    double gen_v = 0.0;
    double gen_theta = 0.0;
    Complex pv;
    double pv_v = 0.0;
    double pv_theta = 0.0;
    double pv_ref = 0.0;
    Complex grid;
    Complex load;
    Complex losses;
    std::optional<NetworkSolution> solution;
  };

  explicit Simulation(SimConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    cfg_.pv.p_max_mw = cfg_.pv_p_max_mw();
    events_ = schedule_events(cfg_);
    load_mw_ = cfg_.load_mw;
    build_networks();
    initialize();
  }

  const SimConfig& config() const { return cfg_; }
  const std::vector<Event>& events() const { return events_; }
  double time() const { return t_; }
  const GensetState& genset() const { return gen_; }
  const PvState& pv() const { return pv_; }
  bool islanded() const { return islanded_; }
  bool pv_tripped() const { return pv_.tripped; }
  bool genset_frequency_trip() const { return gen_trip_; }
  std::optional<double> genset_online_time() const { return gen_online_time_; }

  Vec state() const {
    return {gen_.delta, gen_.omega, gen_.tm, gen_.x_iso, gen_.eq, pv_.theta_pll, pv_.omega_pll};
  }

  /// Time derivative of the continuous state `x` under the present discrete
  /// modes, network re-solved at `x`.
  Vec state_derivative(const Vec& x) { return derivatives(x, algebraic(t_, x, false)); }

  /// Algebraic outputs at the current time and state.
  const Outputs& outputs() {
    if (!cached_) cached_ = algebraic(t_, state(), true);
    return *cached_;
  }

  /// Advances by `h` seconds with RK4, splitting the step at any scheduled
  /// event inside it and applying discrete transitions at each boundary.
  void advance(double h) {
    if (!(h > 0.0)) throw InvalidArgument("step size must be positive");
    const double target = t_ + h;
    while (t_ < target - kEventTimeTol) {
      double t_next = target;
      for (std::size_t k = next_event_; k < events_.size(); ++k) {
        const double te = events_[k].time_s;
        if (te > t_ + kEventTimeTol && te < t_next - kEventTimeTol) {
          t_next = te;
          break;
        }
      }
      integrate(t_next - t_);
      t_ = std::abs(t_next - target) <= kEventTimeTol ? target : t_next;
      apply_transitions();
    }
  }

  /// Records every `record_every` steps of `dt_s` until `t_end_s`.
  SimResult run() {
    SimResult res;
    res.islanding_time_s = cfg_.islanding_time_s.value_or(cfg_.t_end_s);
    res.t_end_s = cfg_.t_end_s;
    res.names = channel_names(cfg_);
    res.data.assign(res.names.size(), {});
    const auto steps = static_cast<std::int64_t>(std::llround(cfg_.t_end_s / cfg_.dt_s));
    try {
      apply_transitions();
      record(res, 0.0);
      for (std::int64_t n = 0; n < steps; ++n) {
        const double t_next = static_cast<double>(n + 1) * cfg_.dt_s;
        advance(t_next - t_);
        t_ = t_next;
        if ((n + 1) % cfg_.record_every == 0) record(res, t_);
      }
    } catch (const SolverDivergence& e) {
      res.termination = Termination::kSolverDivergence;
      res.message = e.what();
    } catch (const NumericOverflow& e) {
      res.termination = Termination::kNumericOverflow;
      res.message = e.what();
    }
    res.islanded = islanded_;
    res.final_genset_mode = gen_.mode;
    res.final_pv_mode = pv_.mode;
    res.pv_ride_through_trip = pv_.tripped;
    res.genset_frequency_trip = gen_trip_;
    return res;
  }

  static std::vector<std::string> channel_names(const SimConfig& cfg) {
    std::vector<std::string> n{std::string(channel::kGenP), std::string(channel::kGenQ),
                               std::string(channel::kGenSpeed), std::string(channel::kGenTorque),
                               std::string(channel::kPvP), std::string(channel::kPvQ)};
    for (int b : cfg.record_buses) {
      n.push_back(channel::bus_p(b));
      n.push_back(channel::bus_q(b));
    }
    n.emplace_back(channel::kGridP);
    n.emplace_back(channel::kLoadP);
    n.emplace_back(channel::kLossP);
    n.emplace_back(channel::kPllHz);
    return n;
  }

  class NumericOverflow : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
  };

 private:
  enum Phase : std::size_t { kGridGen, kGrid, kIsland, kDead };

  static constexpr int kGridNode = -1;
  static constexpr int kGenNode = -2;

  void build_networks() {
    feeder_ = cfg_.network.with_total_load(load_mw_);
    const double x_gen = cfg_.genset.Xd_t * feeder_.s_base_mva() / cfg_.genset.rated_mva;
    const Network with_grid = feeder_.with_source_node(kGridNode, feeder_.pcc_bus(),
                                                       cfg_.grid_x_pu);
    const Network with_both = with_grid.with_source_node(kGenNode, cfg_.genset_bus, x_gen);
    const Network island = feeder_.with_source_node(kGenNode, cfg_.genset_bus, x_gen);
    flows_.clear();
    flows_.emplace_back(with_both, std::vector<Slack>{{kGridNode, cfg_.grid_v_pu, 0.0},
                                                      {kGenNode, 1.0, 0.0}});
    flows_.emplace_back(with_grid, std::vector<Slack>{{kGridNode, cfg_.grid_v_pu, 0.0}});
    flows_.emplace_back(island, std::vector<Slack>{{kGenNode, 1.0, 0.0}});
    for (auto& w : warm_) w.reset();
    pv_index_ = feeder_.bus_index(cfg_.pv_bus);
    gen_index_ = feeder_.bus_index(cfg_.genset_bus);
    cached_.reset();
  }

  void initialize() {
    const double sb = feeder_.s_base_mva();
    const double p_pv = cfg_.pv_active() ? cfg_.pv.p_max_mw / sb : 0.0;
    std::vector<Injection> inj;
    if (p_pv > 0.0) inj.push_back({cfg_.pv_bus, p_pv, 0.0});

    const Network with_grid = feeder_.with_source_node(kGridNode, feeder_.pcc_bus(),
                                                       cfg_.grid_x_pu);
    NetworkSolution sol;
    try {
      if (cfg_.diesel_initial == DieselStatus::kOn) {
        PowerFlow pf(with_grid, {{kGridNode, cfg_.grid_v_pu, 0.0}},
                     {{cfg_.genset_bus, cfg_.genset.p_ref_mw / sb, cfg_.genset.v_set}});
        sol = pf.solve(inj, NoDevices{}, nullptr, 1.0, cfg_.power_flow);
        const auto k = sol.index_of(cfg_.genset_bus);
        const Complex s_gen = sol.injection[k] - Complex(p_pv, 0.0);
        gen_ = genset_equilibrium(cfg_.genset, sol.voltage(cfg_.genset_bus), s_gen, sb);
      } else {
        PowerFlow pf(with_grid, {{kGridNode, cfg_.grid_v_pu, 0.0}});
        sol = pf.solve(inj, NoDevices{}, nullptr, 1.0, cfg_.power_flow);
        gen_ = GensetState{};
        gen_.eq = cfg_.genset.v_set;
      }
    } catch (const SolverDivergence& e) {
      throw InvalidConfig(std::string("infeasible initial power flow: ") + e.what());
    }
    last_gen_angle_ = sol.va[sol.index_of(cfg_.genset_bus)];

    pv_ = PvState{};
    if (cfg_.pv_active()) {
      pv_.mode = PvMode::kSyncGrid;
      pv_.source = PvSource::kGrid;
      pv_.theta_pll = sol.va[sol.index_of(cfg_.pv_bus)];
      pv_.omega_pll = 1.0;
      pv_.p_out_pu = p_pv;
    } else {
      pv_.mode = PvMode::kOffline;
      pv_.source = PvSource::kNone;
    }
    t_ = 0.0;
    islanded_ = false;
    next_event_ = 0;
  }

  Phase phase() const {
    const bool online = gen_.mode == GensetMode::kOnline;
    if (!islanded_) return online ? kGridGen : kGrid;
    return online ? kIsland : kDead;
  }

  Outputs algebraic(double t, const Vec& x, bool keep_solution) {
    Outputs o;
    const Phase ph = phase();
    if (ph == kDead) return o;
    PowerFlow& pf = flows_[ph];
    if (ph == kGridGen) pf.set_slack_voltage(1, x[kEq], x[kDelta]);
    if (ph == kIsland) pf.set_slack_voltage(0, x[kEq], x[kDelta]);
    o.frequency = islanded_ ? x[kOmega] : 1.0;

    const double sb = feeder_.s_base_mva();
    const double p_rated = cfg_.pv.p_max_mw / sb;
    PvState pv = pv_;
    pv.theta_pll = x[kThetaPll];
    pv.omega_pll = x[kOmegaPll];
    const bool pv_on = cfg_.pv_active() && pv.mode != PvMode::kOffline;
    o.pv_ref = pv_on ? pv_power_reference(pv, cfg_.pv, t, sb) : 0.0;
    const std::size_t pv_index = pv_index_;
    const double p_ref = o.pv_ref;
    auto hook = [&](std::size_t k, double v, double th) -> DeviceInjection {
      if (!pv_on || k != pv_index) return {};
      return pv_device_injection(pv, cfg_.pv, v, th, p_ref, p_rated);
    };
    const NetworkSolution* warm = warm_[ph] ? &*warm_[ph] : nullptr;
    NetworkSolution sol = pf.solve({}, hook, warm, o.frequency, cfg_.power_flow);

    o.energized = true;
    if (ph == kGridGen) {
      o.grid = sol.slack_injection[0];
      o.gen = sol.slack_injection[1];
    } else if (ph == kGrid) {
      o.grid = sol.slack_injection[0];
    } else {
      o.gen = sol.slack_injection[0];
    }
    o.gen_v = sol.vm[gen_index_];
    o.gen_theta = sol.va[gen_index_];
    o.pv = sol.injection[pv_index_];
    o.pv_v = sol.vm[pv_index_];
    o.pv_theta = sol.va[pv_index_];
    o.load = sol.total_load();
    o.losses = sol.losses;
    if (keep_solution) {
      warm_[ph] = sol;
      o.solution = std::move(sol);
    }
    return o;
  }

  Vec derivatives(const Vec& x, const Outputs& o) const {
    Vec d{};
    if (gen_.mode == GensetMode::kOnline) {
      GensetState g = gen_;
      g.delta = x[kDelta];
      g.omega = x[kOmega];
      g.tm = x[kTm];
      g.x_iso = x[kXiso];
      g.eq = x[kEq];
      const double pe = o.gen.real() * feeder_.s_base_mva() / cfg_.genset.rated_mva;
      const auto gd = genset_derivatives(g, cfg_.genset, pe, o.gen_v, islanded_);
      d[kDelta] = gd.delta;
      d[kOmega] = gd.omega;
      d[kTm] = gd.tm;
      d[kXiso] = gd.x_iso;
      d[kEq] = gd.eq;
    }
    if (cfg_.pv_active() && pv_.mode != PvMode::kOffline && o.energized) {
      PvState pv = pv_;
      pv.theta_pll = x[kThetaPll];
      pv.omega_pll = x[kOmegaPll];
      const auto pd = pll_derivatives(pv, o.pv_theta, cfg_.pv);
      d[kThetaPll] = pd.theta;
      d[kOmegaPll] = pd.omega;
    }
    return d;
  }

  void integrate(double h) {
    const Vec x0 = state();
    const Vec k1 = derivatives(x0, outputs());
    auto f = [this](double t, const Vec& x) { return derivatives(x, algebraic(t, x, false)); };
    const Vec x1 = rk4_step(f, t_, x0, h, k1);
    for (double v : x1) {
      if (!std::isfinite(v)) throw NumericOverflow("non-finite state at t=" + std::to_string(t_));
    }
    gen_.delta = x1[kDelta];
    gen_.omega = x1[kOmega];
    gen_.tm = x1[kTm];
    gen_.x_iso = x1[kXiso];
    gen_.eq = x1[kEq];
    pv_.theta_pll = x1[kThetaPll];
    pv_.omega_pll = x1[kOmegaPll];
    cached_.reset();
  }

  /// Fires due events and mode transitions at the current time.
  void apply_transitions() {
    bool load_changed = false;
    while (next_event_ < events_.size() && events_[next_event_].time_s <= t_ + kEventTimeTol) {
      const Event& e = events_[next_event_++];
      if (e.kind == EventKind::kIslanding) islanded_ = true;
      if (e.kind == EventKind::kLoadStep) {
        load_mw_ = e.value;
        load_changed = true;
      }
    }
    if (load_changed) build_networks();

    const auto gen_before = gen_.mode;
    GensetLifecycleContext gctx;
    if (islanded_) gctx.islanding_time = cfg_.islanding_time_s;
    gctx.bus_angle = last_gen_angle_;
    gen_ = genset_lifecycle(gen_, cfg_.genset, t_, gctx);
    if (gen_.mode != gen_before) {
      cached_.reset();
      if (gen_.mode == GensetMode::kOnline) gen_online_time_ = t_;
    }

    if (cfg_.pv_active()) {
      const auto& o = outputs();
      PvTransitionContext pctx;
      if (islanded_) pctx.islanding_time = cfg_.islanding_time_s;
      pctx.genset_mode = gen_.mode;
      pctx.genset_online_time = gen_online_time_;
      pctx.energized = o.energized;
      pctx.v_term = o.pv_v;
      pctx.theta_bus = o.pv_theta;
      pctx.omega_bus = o.frequency;
      pctx.p_ref = o.pv_ref;
      pctx.p_max = cfg_.pv.p_max_mw / feeder_.s_base_mva();
      const PvState before = pv_;
      pv_ = pv_mode_transition(pv_, cfg_.pv, t_, pctx);
      if (pv_.mode != before.mode || pv_.theta_pll != before.theta_pll ||
          pv_.omega_pll != before.omega_pll) {
        cached_.reset();
      }
    }
    const auto& o = outputs();
    if (o.energized) last_gen_angle_ = o.gen_theta;
    pv_.p_out_pu = o.pv.real();
    if (gen_.mode == GensetMode::kOnline &&
        !kGensetFrequencyBand.contains(gen_.omega * kNominalHz)) {
      gen_trip_ = true;
    }
  }

  void record(SimResult& res, double t) {
    const auto& o = outputs();
    const double sb = feeder_.s_base_mva();
    const bool online = gen_.mode == GensetMode::kOnline;
    const double pe_machine = o.gen.real() * sb / cfg_.genset.rated_mva;
    std::size_t c = 0;
    auto put = [&](double v) { res.data[c++].push_back(v); };
    res.time.push_back(t);
    put(o.gen.real() * sb);
    put(o.gen.imag() * sb);
    put(gen_.omega);
    put(online ? genset_torque(gen_, pe_machine) : 0.0);
    put(o.pv.real() * sb);
    put(o.pv.imag() * sb);
    for (int b : cfg_.record_buses) {
      const Complex s = o.solution ? bus_flow(*o.solution, feeder_, b) : Complex{};
      put(s.real() * sb);
      put(s.imag() * sb);
    }
    put(-o.grid.real() * sb);  // export at the PCC
    put(o.load.real() * sb);
    put(o.losses.real() * sb);
    put(cfg_.pv_active() && pv_.mode != PvMode::kOffline ? pll_frequency_hz(pv_) : 0.0);
  }

  SimConfig cfg_;
  std::vector<Event> events_;
  std::size_t next_event_ = 0;
  double load_mw_ = 0.0;
  Network feeder_ = bcm_network();
  std::vector<PowerFlow> flows_;
  std::array<std::optional<NetworkSolution>, 3> warm_;
  std::size_t pv_index_ = 0;
  std::size_t gen_index_ = 0;

  double t_ = 0.0;
  bool islanded_ = false;
  GensetState gen_;
  PvState pv_;
  bool gen_trip_ = false;
  std::optional<double> gen_online_time_;
  double last_gen_angle_ = 0.0;
  std::optional<Outputs> cached_;
};

inline SimResult run(const SimConfig& cfg) { return Simulation(cfg).run(); }

}  // namespace mghc
