#pragma once

// Key = value configuration with [sections]. Keys before the first section
// belong to [scenario]. Every key is optional; unknown keys are errors.
//
//   load = HIGH          # LOW, HIGH or MW
//   diesel = OFF
//   pv_fraction = 0.3
//   [network]
//   bus = 101, 13.8                    # repeated; replaces the default table
//   branch = 101, 102, 0.01, 0.05
//   load = 104, 0.5, 0.1, 0, 0, 1, 0   # bus, MW, Mvar, z, i, p, freq_coeff

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "mghc/csv.hpp"
#include "mghc/engine.hpp"
#include "mghc/errors.hpp"
#include "mghc/stability.hpp"
#include "mghc/sweep.hpp"

namespace mghc {

struct SweepSettings {
  std::vector<double> fractions = default_fractions();
  std::vector<std::string> scenarios{"low_off", "low_on", "high_off", "high_on"};
  double refine = 0.0;  ///< bisection resolution, 0 = off
};

struct AppConfig {
  SimConfig sim;
  Thresholds stability;
  SweepSettings sweep;

  void validate() const {
    sim.validate();
    stability.validate();
    for (std::size_t i = 0; i < sweep.fractions.size(); ++i) {
      if (!(sweep.fractions[i] >= 0.0)) throw InvalidConfig("sweep.fractions must be >= 0");
      if (i > 0 && !(sweep.fractions[i] > sweep.fractions[i - 1])) {
        throw InvalidConfig("sweep.fractions must be strictly increasing");
      }
    }
    if (sweep.fractions.empty()) throw InvalidConfig("sweep.fractions must not be empty");
    for (const auto& s : sweep.scenarios) {
      try {
        scenario_by_id(s);
      } catch (const InvalidArgument& e) {
        throw InvalidConfig(std::string("sweep.scenarios: ") + e.what());
      }
    }
    if (!(sweep.refine >= 0.0)) throw InvalidConfig("sweep.refine must be >= 0");
  }
};

namespace config_detail {

inline std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

inline std::string upper(std::string s) {
  for (char& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

inline std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : v) {
    if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

inline std::string fmt(double v) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

struct Reader {
  int line = 0;
  std::string key;

  [[noreturn]] void fail(const std::string& why) const { throw ParseError(key + ": " + why, line); }

  double number(const std::string& v) const {
    double x = 0.0;
    if (!parse_double(v, x) || !std::isfinite(x)) fail("expected a number, got '" + v + "'");
    return x;
  }
  int integer(const std::string& v) const {
    int x = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
    if (v.empty() || ec != std::errc() || p != v.data() + v.size()) {
      fail("expected an integer, got '" + v + "'");
    }
    return x;
  }
  bool boolean(const std::string& v) const {
    const auto u = upper(v);
    if (u == "TRUE" || u == "YES" || u == "1") return true;
    if (u == "FALSE" || u == "NO" || u == "0") return false;
    fail("expected true or false, got '" + v + "'");
  }
  std::vector<double> numbers(const std::string& v, std::size_t min_n, std::size_t max_n) const {
    std::vector<double> out;
    for (const auto& item : split_list(v)) out.push_back(number(item));
    if (out.size() < min_n || out.size() > max_n) {
      fail("expected " + (min_n == max_n ? std::to_string(min_n)
                                         : std::to_string(min_n) + " to " + std::to_string(max_n)) +
           " comma-separated values");
    }
    return out;
  }
};

using Setter = std::function<void(AppConfig&, const Reader&, const std::string&)>;
using Getter = std::function<std::string(const AppConfig&)>;

struct Field {
  std::string section;
  std::string key;
  Setter set;
  Getter get;
};

template <class Access>
Field num(std::string section, std::string key, Access access) {
  return {std::move(section), std::move(key),
          [access](AppConfig& c, const Reader& r, const std::string& v) { access(c) = r.number(v); },
          [access](const AppConfig& c) { return fmt(access(const_cast<AppConfig&>(c))); }};
}

template <class Access>
Field window(std::string section, std::string key, Access access) {
  return {std::move(section), std::move(key),
          [access](AppConfig& c, const Reader& r, const std::string& v) {
            const auto x = r.numbers(v, 2, 2);
            access(c) = Window{x[0], x[1]};
          },
          [access](const AppConfig& c) {
            const Window w = access(const_cast<AppConfig&>(c));
            return fmt(w.lo) + ", " + fmt(w.hi);
          }};
}

inline std::string load_text(double mw) {
  if (mw == kLowLoadMw) return "LOW";
  if (mw == kHighLoadMw) return "HIGH";
  return fmt(mw);
}

inline const std::vector<Field>& fields() {
  static const std::vector<Field> f = [] {
    std::vector<Field> v;
    // scenario
    v.push_back({"scenario", "load",
                 [](AppConfig& c, const Reader& r, const std::string& s) {
                   const auto u = upper(s);
                   if (u == "LOW") {
                     c.sim.load_mw = kLowLoadMw;
                   } else if (u == "HIGH") {
                     c.sim.load_mw = kHighLoadMw;
                   } else {
                     c.sim.load_mw = r.number(s);
                   }
                 },
                 [](const AppConfig& c) { return load_text(c.sim.load_mw); }});
    v.push_back({"scenario", "diesel",
                 [](AppConfig& c, const Reader& r, const std::string& s) {
                   const auto u = upper(s);
                   if (u == "ON") {
                     c.sim.diesel_initial = DieselStatus::kOn;
                   } else if (u == "OFF") {
                     c.sim.diesel_initial = DieselStatus::kOff;
                   } else {
                     r.fail("expected ON or OFF, got '" + s + "'");
                   }
                 },
                 [](const AppConfig& c) { return std::string(to_string(c.sim.diesel_initial)); }});
    v.push_back(num("scenario", "pv_fraction", [](AppConfig& c) -> double& { return c.sim.pv_fraction; }));

    // engine
    v.push_back(num("engine", "t_end_s", [](AppConfig& c) -> double& { return c.sim.t_end_s; }));
    v.push_back(num("engine", "dt_s", [](AppConfig& c) -> double& { return c.sim.dt_s; }));
    v.push_back({"engine", "islanding_time_s",
                 [](AppConfig& c, const Reader& r, const std::string& s) {
                   if (upper(s) == "NONE") {
                     c.sim.islanding_time_s.reset();
                   } else {
                     c.sim.islanding_time_s = r.number(s);
                   }
                 },
                 [](const AppConfig& c) {
                   return c.sim.islanding_time_s ? fmt(*c.sim.islanding_time_s) : std::string("none");
                 }});
    v.push_back({"engine", "record_every",
                 [](AppConfig& c, const Reader& r, const std::string& s) {
                   c.sim.record_every = r.integer(s);
                 },
                 [](const AppConfig& c) { return std::to_string(c.sim.record_every); }});
    v.push_back({"engine", "record_buses",
                 [](AppConfig& c, const Reader& r, const std::string& s) {
                   c.sim.record_buses.clear();
                   for (const auto& item : split_list(s)) c.sim.record_buses.push_back(r.integer(item));
                 },
                 [](const AppConfig& c) {
                   std::string out;
                   for (int b : c.sim.record_buses) out += (out.empty() ? "" : ", ") + std::to_string(b);
                   return out;
                 }});
    v.push_back(num("engine", "grid_v_pu", [](AppConfig& c) -> double& { return c.sim.grid_v_pu; }));
    v.push_back(num("engine", "grid_x_pu", [](AppConfig& c) -> double& { return c.sim.grid_x_pu; }));
    v.push_back(num("engine", "pf_tol", [](AppConfig& c) -> double& { return c.sim.power_flow.tol; }));
    v.push_back({"engine", "pf_max_iterations",
                 [](AppConfig& c, const Reader& r, const std::string& s) {
                   c.sim.power_flow.max_iterations = r.integer(s);
                 },
                 [](const AppConfig& c) { return std::to_string(c.sim.power_flow.max_iterations); }});

    // genset
    auto g = [&v](const char* key, double GensetParams::*m) {
      v.push_back(num("genset", key, [m](AppConfig& c) -> double& { return c.sim.genset.*m; }));
    };
    v.push_back({"genset", "bus",
                 [](AppConfig& c, const Reader& r, const std::string& s) { c.sim.genset_bus = r.integer(s); },
                 [](const AppConfig& c) { return std::to_string(c.sim.genset_bus); }});
    g("rated_mva", &GensetParams::rated_mva);
    g("H", &GensetParams::H);
    g("D", &GensetParams::D);
    g("Xd_t", &GensetParams::Xd_t);
    g("R_droop", &GensetParams::R_droop);
    g("Tg", &GensetParams::Tg);
    g("Ki_iso", &GensetParams::Ki_iso);
    g("Ka", &GensetParams::Ka);
    g("Ta", &GensetParams::Ta);
    g("v_set", &GensetParams::v_set);
    g("p_ref_mw", &GensetParams::p_ref_mw);
    g("start_delay_s", &GensetParams::start_delay_s);
    g("eq_min", &GensetParams::eq_min);
    g("eq_max", &GensetParams::eq_max);
    g("tm_rate_up", &GensetParams::tm_rate_up);

    // pv
    auto p = [&v](const char* key, double PvParams::*m) {
      v.push_back(num("pv", key, [m](AppConfig& c) -> double& { return c.sim.pv.*m; }));
    };
    v.push_back({"pv", "bus",
                 [](AppConfig& c, const Reader& r, const std::string& s) { c.sim.pv_bus = r.integer(s); },
                 [](const AppConfig& c) { return std::to_string(c.sim.pv_bus); }});
    v.push_back({"pv", "present",
                 [](AppConfig& c, const Reader& r, const std::string& s) { c.sim.pv_present = r.boolean(s); },
                 [](const AppConfig& c) { return std::string(c.sim.pv_present ? "true" : "false"); }});
    p("pll_wn", &PvParams::pll_wn);
    p("pll_zeta", &PvParams::pll_zeta);
    p("i_max_pu", &PvParams::i_max_pu);
    p("trip_delay_cycles", &PvParams::trip_delay_cycles);
    v.push_back(window("pv", "vt_window", [](AppConfig& c) -> Window& { return c.sim.pv.vt_window; }));
    v.push_back(window("pv", "ft_window", [](AppConfig& c) -> Window& { return c.sim.pv.ft_window; }));
    p("ramp_rate_pu_s", &PvParams::ramp_rate_pu_s);
    p("resync_delay_s", &PvParams::resync_delay_s);
    p("phase_gain", &PvParams::phase_gain);

    // stability
    auto s = [&v](const char* key, double Thresholds::*m) {
      v.push_back(num("stability", key, [m](AppConfig& c) -> double& { return c.stability.*m; }));
    };
    s("settle_s", &Thresholds::settle_s);
    s("window_s", &Thresholds::window_s);
    s("r_damped", &Thresholds::r_damped);
    s("r_growing", &Thresholds::r_growing);
    s("freq_tol_hz", &Thresholds::freq_tol_hz);
    s("amplitude_floor", &Thresholds::amplitude_floor);

    // sweep
    v.push_back({"sweep", "fractions",
                 [](AppConfig& c, const Reader& r, const std::string& s) {
                   c.sweep.fractions = r.numbers(s, 1, 1000);
                 },
                 [](const AppConfig& c) {
                   std::string out;
                   for (double f : c.sweep.fractions) out += (out.empty() ? "" : ", ") + fmt(f);
                   return out;
                 }});
    v.push_back({"sweep", "scenarios",
                 [](AppConfig& c, const Reader&, const std::string& s) { c.sweep.scenarios = split_list(s); },
                 [](const AppConfig& c) {
                   std::string out;
                   for (const auto& id : c.sweep.scenarios) out += (out.empty() ? "" : ", ") + id;
                   return out;
                 }});
    v.push_back(num("sweep", "refine", [](AppConfig& c) -> double& { return c.sweep.refine; }));
    return v;
  }();
  return f;
}

inline const std::set<std::string>& sections() {
  static const std::set<std::string> s{"scenario", "engine", "network", "genset", "pv", "stability", "sweep"};
  return s;
}

}  // namespace config_detail

inline AppConfig parse_config(std::istream& in) {
  using namespace config_detail;
  AppConfig cfg;
  const Network& def = cfg.sim.network;
  double s_base = def.s_base_mva();
  double f_nom = def.f_nominal_hz();
  int pcc = def.pcc_bus();
  std::vector<Bus> buses;
  std::vector<Branch> branches;
  std::vector<LoadSpec> loads;
  bool have_buses = false;
  bool have_branches = false;
  bool have_loads = false;
  bool network_touched = false;

  std::string section = "scenario";
  std::set<std::string> seen;
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string line = raw;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if ((line[i] == '#' || line[i] == ';') &&
          (i == 0 || std::isspace(static_cast<unsigned char>(line[i - 1])))) {
        line.resize(i);
        break;
      }
    }
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError("unterminated section header", lineno);
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      if (!sections().contains(section)) throw ParseError("unknown section '" + section + "'", lineno);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("expected key = value, got '" + line + "'", lineno);
    Reader r{lineno, trim(std::string_view(line).substr(0, eq))};
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    if (r.key.empty()) throw ParseError("missing key before '='", lineno);
    if (value.empty()) r.fail("missing value");

    if (section == "network") {
      network_touched = true;
      if (r.key == "bus") {
        const auto x = r.numbers(value, 2, 2);
        buses.push_back({static_cast<int>(x[0]), x[1]});
        have_buses = true;
        continue;
      }
      if (r.key == "branch") {
        const auto x = r.numbers(value, 4, 4);
        branches.push_back({static_cast<int>(x[0]), static_cast<int>(x[1]), x[2], x[3]});
        have_branches = true;
        continue;
      }
      if (r.key == "load") {
        const auto x = r.numbers(value, 3, 7);
        if (x.size() != 3 && x.size() != 6 && x.size() != 7) {
          r.fail("expected bus, MW, Mvar[, z, i, p[, freq_coeff]]");
        }
        LoadSpec l{static_cast<int>(x[0]), x[1], x[2], {}, 0.0};
        if (x.size() >= 6) l.zip = {x[3], x[4], x[5]};
        if (x.size() == 7) l.freq_coeff = x[6];
        loads.push_back(l);
        have_loads = true;
        continue;
      }
      if (!seen.insert("network." + r.key).second) r.fail("duplicate key");
      if (r.key == "s_base_mva") {
        s_base = r.number(value);
      } else if (r.key == "f_nominal_hz") {
        f_nom = r.number(value);
      } else if (r.key == "pcc_bus") {
        pcc = r.integer(value);
      } else {
        throw ParseError("unknown key '" + r.key + "' in [network]", lineno);
      }
      continue;
    }
    const auto& fs = fields();
    auto it = std::find_if(fs.begin(), fs.end(), [&](const Field& f) {
      return f.section == section && f.key == r.key;
    });
    if (it == fs.end()) throw ParseError("unknown key '" + r.key + "' in [" + section + "]", lineno);
    if (!seen.insert(section + "." + r.key).second) r.fail("duplicate key");
    it->set(cfg, r, value);
  }

  if (network_touched) {
    if (!have_buses) buses = def.buses();
    if (!have_branches) branches = def.branches();
    if (!have_loads) loads = def.loads();
    try {
      cfg.sim.network = Network(buses, branches, loads, pcc, s_base, f_nom);
    } catch (const InvalidConfig& e) {
      throw InvalidConfig(std::string("network: ") + e.what());
    }
  }
  cfg.validate();
  return cfg;
}

inline AppConfig parse_config_text(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

inline AppConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidConfig("cannot open config file '" + path + "'");
  return parse_config(in);
}

/// Canonical text of a resolved configuration; parses back to the same values.
inline std::string render_config(const AppConfig& cfg) {
  using namespace config_detail;
  std::ostringstream os;
  std::string section;
  auto emit_section = [&](const std::string& s) {
    if (s == section) return;
    section = s;
    os << '[' << s << "]\n";
  };
  for (const auto& f : fields()) {
    if (f.section == "engine" && section == "scenario") {
      const Network& n = cfg.sim.network;
      emit_section("network");
      os << "s_base_mva = " << fmt(n.s_base_mva()) << '\n';
      os << "f_nominal_hz = " << fmt(n.f_nominal_hz()) << '\n';
      os << "pcc_bus = " << n.pcc_bus() << '\n';
      for (const auto& b : n.buses()) os << "bus = " << b.id << ", " << fmt(b.nominal_kv) << '\n';
      for (const auto& b : n.branches()) {
        os << "branch = " << b.from_bus << ", " << b.to_bus << ", " << fmt(b.r_pu) << ", "
           << fmt(b.x_pu) << '\n';
      }
      for (const auto& l : n.loads()) {
        os << "load = " << l.bus << ", " << fmt(l.p_mw) << ", " << fmt(l.q_mvar) << ", "
           << fmt(l.zip.z) << ", " << fmt(l.zip.i) << ", " << fmt(l.zip.p) << ", "
           << fmt(l.freq_coeff) << '\n';
      }
    }
    emit_section(f.section);
    os << f.key << " = " << f.get(cfg) << '\n';
  }
  return os.str();
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Hash of everything except the scenario selection, so one value identifies
/// the parameter set shared by all cells of a sweep.
inline std::string parameter_hash(const AppConfig& cfg) {
  AppConfig c = cfg;
  c.sim.load_mw = kLowLoadMw;
  c.sim.diesel_initial = DieselStatus::kOn;
  c.sim.pv_fraction = 0.0;
  c.sweep = SweepSettings{};
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(render_config(c))));
  return std::string("fnv1a64:") + buf;
}

}  // namespace mghc
