#pragma once

// Scenario matrix (load level x initial diesel status x PV penetration),
// hosting-capacity rule, optional bisection refinement and report rendering.

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "mghc/engine.hpp"
#include "mghc/errors.hpp"
#include "mghc/stability.hpp"

namespace mghc {

struct ScenarioSpec {
  std::string id;     ///< e.g. "low_off"
  std::string label;  ///< column heading, e.g. "Low OFF"
  double load_mw = kLowLoadMw;
  DieselStatus diesel = DieselStatus::kOff;
};

inline std::vector<ScenarioSpec> default_scenarios() {
  return {{"low_off", "Low OFF", kLowLoadMw, DieselStatus::kOff},
          {"low_on", "Low ON", kLowLoadMw, DieselStatus::kOn},
          {"high_off", "High OFF", kHighLoadMw, DieselStatus::kOff},
          {"high_on", "High ON", kHighLoadMw, DieselStatus::kOn}};
}

inline ScenarioSpec scenario_by_id(const std::string& id) {
  for (auto& s : default_scenarios()) {
    if (s.id == id) return s;
  }
  throw InvalidArgument("unknown scenario '" + id + "' (expected low_off, low_on, high_off or high_on)");
}

inline std::vector<double> default_fractions() { return {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7}; }

inline double penetration_mw(double load_mw, double fraction) {
  if (!(fraction >= 0.0)) throw InvalidArgument("penetration fraction must be >= 0");
  return load_mw * fraction;
}

struct Cell {
  double fraction = 0.0;
  double p_mw = 0.0;
  Verdict verdict;
  std::optional<SimResult> series;
};

struct HostingCapacity {
  std::optional<double> fraction;  ///< empty when no tested level is stable
  bool sweep_limited = false;      ///< every tested level was stable
};

inline HostingCapacity hosting_capacity(const std::vector<Cell>& cells) {
  if (cells.empty()) throw InvalidArgument("hosting capacity of an empty verdict list");
  HostingCapacity hc;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (!cells[i].verdict.stable()) {
      if (i > 0) hc.fraction = cells[i - 1].fraction;
      return hc;
    }
  }
  hc.fraction = cells.back().fraction;
  hc.sweep_limited = true;
  return hc;
}

struct ScenarioResult {
  ScenarioSpec spec;
  std::vector<Cell> cells;  ///< ascending fraction
  HostingCapacity capacity;
};

struct HostingReport {
  std::vector<ScenarioResult> scenarios;
  double dt_s = 0.0;
  Thresholds thresholds;
  std::string parameter_hash;
  std::string resolved_config;  ///< canonical configuration text, may be empty
};

struct SweepOptions {
  int threads = 0;  ///< 0 = one per hardware thread
  bool keep_series = false;
};

/// Worker count from `MGHC_THREADS` (0 or unset = auto).
inline int threads_from_env() {
  const char* env = std::getenv("MGHC_THREADS");
  if (env == nullptr || *env == '\0') return 0;
  int n = 0;
  const char* end = env + std::char_traits<char>::length(env);
  auto [p, ec] = std::from_chars(env, end, n);
  if (ec != std::errc() || p != end || n < 0) {
    throw InvalidConfig("MGHC_THREADS must be a non-negative integer, got '" + std::string(env) + "'");
  }
  return n;
}

inline SimConfig cell_config(const SimConfig& base, const ScenarioSpec& s, double fraction) {
  SimConfig c = base;
  c.load_mw = s.load_mw;
  c.diesel_initial = s.diesel;
  c.pv_fraction = fraction;
  return c;
}

inline std::string fraction_label(double fraction) {
  std::ostringstream os;
  os << std::round(fraction * 1e6) / 1e4 << '%';
  return os.str();
}

inline Cell run_cell(const SimConfig& base, const ScenarioSpec& s, double fraction,
                     const Thresholds& th, bool keep_series) {
  Cell cell;
  cell.fraction = fraction;
  cell.p_mw = penetration_mw(s.load_mw, fraction);
  try {
    SimResult res = run(cell_config(base, s, fraction));
    cell.verdict = classify(res, th);
    if (keep_series) cell.series = std::move(res);
  } catch (const InvalidConfig& e) {
    throw InvalidConfig("cell " + s.id + " at " + fraction_label(fraction) + ": " + e.what());
  }
  return cell;
}

/// Runs every (scenario, fraction) cell; cells are independent, so they are
/// spread over worker threads and reassembled in input order.
inline HostingReport run_sweep(const SimConfig& base, const std::vector<ScenarioSpec>& scenarios,
                               const std::vector<double>& fractions, const Thresholds& th = {},
                               const SweepOptions& opt = {}) {
  if (scenarios.empty()) throw InvalidArgument("no scenarios to sweep");
  if (fractions.empty()) throw InvalidArgument("no fractions to sweep");
  for (std::size_t i = 0; i < fractions.size(); ++i) {
    if (!(fractions[i] >= 0.0)) throw InvalidArgument("fractions must be >= 0");
    if (i > 0 && !(fractions[i] > fractions[i - 1])) {
      throw InvalidArgument("fractions must be strictly increasing");
    }
  }
  base.validate();
  th.validate();

  HostingReport rep;
  rep.dt_s = base.dt_s;
  rep.thresholds = th;
  for (const auto& s : scenarios) rep.scenarios.push_back({s, std::vector<Cell>(fractions.size()), {}});

  const std::size_t total = scenarios.size() * fractions.size();
  std::size_t workers = opt.threads > 0 ? static_cast<std::size_t>(opt.threads)
                                        : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, total);

  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto work = [&] {
    for (;;) {
      const std::size_t k = next.fetch_add(1);
      if (k >= total) return;
      const std::size_t si = k / fractions.size();
      const std::size_t fi = k % fractions.size();
      try {
        rep.scenarios[si].cells[fi] =
            run_cell(base, scenarios[si], fractions[fi], th, opt.keep_series);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(total);
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t i = 0; i < workers; ++i) pool.emplace_back(work);
  }
  if (error) std::rethrow_exception(error);
  for (auto& sr : rep.scenarios) sr.capacity = hosting_capacity(sr.cells);
  return rep;
}

/// Bisects between the hosting capacity and the first unstable fraction
/// down to `resolution`, adding the probed cells. Assumes verdicts are
/// monotone in penetration between the two bracketing levels.
inline void refine(ScenarioResult& sr, const SimConfig& base, double resolution,
                   const Thresholds& th = {}, bool keep_series = false) {
  if (!(resolution > 0.0)) throw InvalidArgument("refine resolution must be > 0");
  if (sr.cells.empty()) return;
  sr.capacity = hosting_capacity(sr.cells);
  if (!sr.capacity.fraction || sr.capacity.sweep_limited) return;
  double lo = *sr.capacity.fraction;
  auto first_unstable = std::find_if(sr.cells.begin(), sr.cells.end(),
                                     [](const Cell& c) { return !c.verdict.stable(); });
  double hi = first_unstable->fraction;
  while (true) {
    const auto steps = static_cast<long long>(std::llround((hi - lo) / resolution));
    if (steps <= 1) break;
    const double mid = std::round((lo + static_cast<double>(steps / 2) * resolution) * 1e9) / 1e9;
    Cell cell = run_cell(base, sr.spec, mid, th, keep_series);
    const bool stable = cell.verdict.stable();
    auto pos = std::lower_bound(sr.cells.begin(), sr.cells.end(), mid,
                                [](const Cell& c, double f) { return c.fraction < f; });
    sr.cells.insert(pos, std::move(cell));
    (stable ? lo : hi) = mid;
  }
  sr.capacity = hosting_capacity(sr.cells);
}

enum class ReportFormat { kText, kCsv };

/// Row label: percentages, with 0.7 after 0.6 standing for "above 60%".
inline std::string row_label(const std::vector<double>& fractions, std::size_t i) {
  if (i > 0 && std::abs(fractions[i] - 0.7) < 1e-12 && std::abs(fractions[i - 1] - 0.6) < 1e-12) {
    return ">60%";
  }
  return fraction_label(fractions[i]);
}

inline std::string format_mw(double mw) {
  std::ostringstream os;
  os << std::round(mw * 1e6) / 1e6;
  return os.str();
}

namespace detail {
inline std::string pad(std::string s, std::size_t w) {
  if (s.size() < w) s.append(w - s.size(), ' ');
  return s;
}

/// Union of every scenario's fractions, ascending.
inline std::vector<double> all_fractions(const HostingReport& rep) {
  std::vector<double> f;
  for (const auto& sr : rep.scenarios) {
    for (const auto& c : sr.cells) f.push_back(c.fraction);
  }
  std::sort(f.begin(), f.end());
  f.erase(std::unique(f.begin(), f.end()), f.end());
  return f;
}

inline const Cell* find_cell(const ScenarioResult& sr, double f) {
  for (const auto& c : sr.cells) {
    if (c.fraction == f) return &c;
  }
  return nullptr;
}

inline std::string capacity_text(const HostingCapacity& hc) {
  if (!hc.fraction) return "NONE";
  return fraction_label(*hc.fraction) + (hc.sweep_limited ? "*" : "");
}
}  // namespace detail

inline std::string render_table(const HostingReport& rep, ReportFormat fmt) {
  const auto fr = detail::all_fractions(rep);
  std::ostringstream os;
  if (fmt == ReportFormat::kText) {
    constexpr std::size_t kFirst = 22;
    constexpr std::size_t kCol = 12;
    bool limited = false;
    os << "Stability after islanding, by PV penetration level\n\n";
    os << detail::pad("PV penetration", kFirst);
    for (const auto& sr : rep.scenarios) os << detail::pad(sr.spec.label, kCol);
    os << '\n';
    for (std::size_t i = 0; i < fr.size(); ++i) {
      os << detail::pad(row_label(fr, i), kFirst);
      for (const auto& sr : rep.scenarios) {
        const Cell* c = detail::find_cell(sr, fr[i]);
        os << detail::pad(c ? to_string(c->verdict.outcome) : "-", kCol);
      }
      os << '\n';
    }
    os << '\n' << detail::pad("Hosting capacity", kFirst);
    for (const auto& sr : rep.scenarios) {
      os << detail::pad(detail::capacity_text(sr.capacity), kCol);
      limited = limited || sr.capacity.sweep_limited;
    }
    os << '\n' << detail::pad("Hosting capacity MW", kFirst);
    for (const auto& sr : rep.scenarios) {
      const auto& hc = sr.capacity;
      os << detail::pad(hc.fraction ? format_mw(penetration_mw(sr.spec.load_mw, *hc.fraction)) : "-",
                        kCol);
    }
    os << '\n';
    if (limited) os << "* sweep-limited: every tested level was stable\n";
    os << detail::pad("Parameter set", kFirst) << rep.parameter_hash << '\n';
    const auto& th = rep.thresholds;
    os << detail::pad("Settings", kFirst) << "dt " << format_mw(rep.dt_s) << " s, settle "
       << format_mw(th.settle_s) << " s, window " << format_mw(th.window_s) << " s, r_damped "
       << format_mw(th.r_damped) << ", r_growing " << format_mw(th.r_growing) << ", freq_tol "
       << format_mw(th.freq_tol_hz) << " Hz\n";
  } else {
    os << "fraction";
    for (const auto& sr : rep.scenarios) os << ',' << sr.spec.id;
    os << '\n';
    for (double f : fr) {
      os << format_mw(f);
      for (const auto& sr : rep.scenarios) {
        const Cell* c = detail::find_cell(sr, f);
        os << ',' << (c ? to_string(c->verdict.outcome) : "");
      }
      os << '\n';
    }
    os << "hosting_capacity";
    for (const auto& sr : rep.scenarios) {
      const auto& hc = sr.capacity;
      os << ',' << (hc.fraction ? format_mw(*hc.fraction) : "NONE");
    }
    os << "\nhosting_capacity_mw";
    for (const auto& sr : rep.scenarios) {
      const auto& hc = sr.capacity;
      os << ',' << (hc.fraction ? format_mw(penetration_mw(sr.spec.load_mw, *hc.fraction)) : "");
    }
    os << "\nsweep_limited";
    for (const auto& sr : rep.scenarios) os << ',' << (sr.capacity.sweep_limited ? "yes" : "no");
    os << "\nparameter_set," << rep.parameter_hash << '\n';
    os << "dt_s," << format_mw(rep.dt_s) << '\n';
  }
  if (!rep.resolved_config.empty()) {
    os << "\n# resolved configuration\n";
    std::istringstream in(rep.resolved_config);
    for (std::string line; std::getline(in, line);) os << "# " << line << '\n';
  }
  return os.str();
}

/// Verdict grid read back from the CSV rendering: one row per fraction.
struct ReportGrid {
  std::vector<std::string> scenario_ids;
  std::vector<double> fractions;
  std::vector<std::vector<std::string>> verdicts;
  std::vector<std::string> capacities;
  std::string parameter_hash;
};

inline ReportGrid parse_report_csv(const std::string& text) {
  ReportGrid g;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : s) {
      if (ch == ',') {
        out.push_back(cur);
        cur.clear();
      } else {
        cur += ch;
      }
    }
    out.push_back(cur);
    return out;
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    auto f = split(line);
    if (lineno == 1) {
      if (f.empty() || f[0] != "fraction") throw ParseError("expected 'fraction' header", lineno);
      g.scenario_ids.assign(f.begin() + 1, f.end());
      continue;
    }
    if (f[0] == "hosting_capacity") {
      g.capacities.assign(f.begin() + 1, f.end());
    } else if (f[0] == "parameter_set") {
      g.parameter_hash = f.size() > 1 ? f[1] : "";
    } else if (f[0] == "hosting_capacity_mw" || f[0] == "sweep_limited" || f[0] == "dt_s") {
      continue;
    } else {
      double v = 0.0;
      auto [p, ec] = std::from_chars(f[0].data(), f[0].data() + f[0].size(), v);
      if (ec != std::errc() || p != f[0].data() + f[0].size()) {
        throw ParseError("bad fraction '" + f[0] + "'", lineno);
      }
      if (f.size() != g.scenario_ids.size() + 1) throw ParseError("wrong column count", lineno);
      g.fractions.push_back(v);
      g.verdicts.emplace_back(f.begin() + 1, f.end());
    }
  }
  return g;
}

}  // namespace mghc
