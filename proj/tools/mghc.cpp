// mghc: simulate one islanding run, sweep the hosting-capacity matrix, or
// re-plot a saved time series.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "mghc/mghc.hpp"

namespace fs = std::filesystem;
using namespace mghc;

namespace {

constexpr int kExitError = 1;
constexpr int kExitUnstable = 2;

void write_file(const fs::path& p, const std::string& text, const std::vector<fs::path>& inputs) {
  for (const auto& in : inputs) {
    std::error_code ec;
    if (fs::exists(p) && fs::equivalent(p, in, ec)) {
      throw InvalidArgument("refusing to overwrite input '" + in.string() + "'");
    }
  }
  std::ofstream out(p, std::ios::binary);
  if (!out) throw InvalidArgument("cannot write '" + p.string() + "'");
  out << text;
  if (!out) throw InvalidArgument("error writing '" + p.string() + "'");
}

/// "0,0.05,...,0.6" expands the "..." with the step of the first two values.
std::vector<double> parse_fractions(const std::string& text) {
  std::vector<std::string> items;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    items.push_back(item);
  }
  std::vector<double> out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (items[i] == "...") {
      if (out.size() < 2 || i + 1 >= items.size()) {
        throw InvalidArgument("'...' needs two values before it and one after");
      }
      const double step = out[1] - out[0];
      double last = 0.0;
      if (!parse_double(items[i + 1], last)) throw InvalidArgument("bad fraction '" + items[i + 1] + "'");
      if (!(step > 0.0)) throw InvalidArgument("'...' needs an increasing start");
      const double start = out.back();
      for (int k = 1;; ++k) {
        const double v = std::round((start + k * step) * 1e9) / 1e9;
        if (v >= last - 1e-9) break;
        out.push_back(v);
      }
      continue;
    }
    double v = 0.0;
    if (!parse_double(items[i], v)) throw InvalidArgument("bad fraction '" + items[i] + "'");
    out.push_back(v);
  }
  return out;
}

std::vector<std::string> config_footer(const AppConfig& cfg) {
  std::vector<std::string> lines{"parameter_set: " + parameter_hash(cfg), "resolved configuration:"};
  std::istringstream in(render_config(cfg));
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  return lines;
}

std::string verdict_text(const Verdict& v, const SimResult& res) {
  std::ostringstream os;
  os << "verdict: " << to_string(v.outcome) << '\n'
     << "reason: " << to_string(v.reason) << '\n'
     << "r_speed: " << format_double(v.r_speed) << '\n'
     << "r_torque: " << format_double(v.r_torque) << '\n'
     << "f_final_hz: " << format_double(v.f_final_hz) << '\n'
     << "pv_ride_through_trip: " << (res.pv_ride_through_trip ? "yes" : "no") << '\n'
     << "genset_frequency_trip: " << (res.genset_frequency_trip ? "yes" : "no") << '\n'
     << "termination: " << to_string(res.termination) << '\n';
  if (!res.message.empty()) os << "message: " << res.message << '\n';
  return os.str();
}

Timeseries series_with_footer(const SimResult& res, const Verdict& v, const AppConfig& cfg) {
  Timeseries ts = to_timeseries(res);
  ts.footer.push_back(std::string("verdict: ") + to_string(v.outcome) + " " + to_string(v.reason));
  for (auto& line : config_footer(cfg)) ts.footer.push_back(std::move(line));
  return ts;
}

int cmd_simulate(const std::string& config_path, const std::string& out_dir, bool plot) {
  const AppConfig cfg = load_config(config_path);
  fs::create_directories(out_dir);
  const SimResult res = run(cfg.sim);
  const Verdict v = classify(res, cfg.stability);
  const fs::path dir(out_dir);
  const std::vector<fs::path> inputs{config_path};
  const Timeseries ts = series_with_footer(res, v, cfg);
  write_file(dir / "timeseries.csv", render_csv(ts), inputs);
  std::string vt = verdict_text(v, res);
  for (const auto& line : config_footer(cfg)) vt += "# " + line + '\n';
  write_file(dir / "verdict.txt", vt, inputs);
  if (plot) write_file(dir / "run.svg", render_svg(ts), inputs);
  std::cout << to_string(v.outcome);
  if (!v.stable()) std::cout << " (" << to_string(v.reason) << ")";
  std::cout << '\n';
  return v.stable() ? 0 : kExitUnstable;
}

std::string cell_file_name(const std::string& scenario, double fraction) {
  return scenario + "_" + format_mw(fraction) + ".csv";
}

int cmd_sweep(const std::string& config_path, const std::string& out_dir,
              const std::string& fractions, const std::string& scenarios, double refine_res,
              bool keep_series) {
  AppConfig cfg = load_config(config_path);
  if (!fractions.empty()) cfg.sweep.fractions = parse_fractions(fractions);
  if (!scenarios.empty()) {
    cfg.sweep.scenarios.clear();
    std::stringstream ss(scenarios);
    for (std::string id; std::getline(ss, id, ',');) cfg.sweep.scenarios.push_back(id);
  }
  if (refine_res > 0.0) cfg.sweep.refine = refine_res;
  cfg.validate();

  std::vector<ScenarioSpec> specs;
  for (const auto& id : cfg.sweep.scenarios) specs.push_back(scenario_by_id(id));
  SweepOptions opt;
  opt.threads = threads_from_env();
  opt.keep_series = keep_series;
  HostingReport rep = run_sweep(cfg.sim, specs, cfg.sweep.fractions, cfg.stability, opt);
  if (cfg.sweep.refine > 0.0) {
    for (auto& sr : rep.scenarios) refine(sr, cfg.sim, cfg.sweep.refine, cfg.stability, keep_series);
  }
  rep.parameter_hash = parameter_hash(cfg);
  rep.resolved_config = render_config(cfg);

  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  const std::vector<fs::path> inputs{config_path};
  write_file(dir / "hosting_report.txt", render_table(rep, ReportFormat::kText), inputs);
  write_file(dir / "hosting_report.csv", render_table(rep, ReportFormat::kCsv), inputs);
  if (keep_series) {
    for (const auto& sr : rep.scenarios) {
      for (const auto& cell : sr.cells) {
        if (!cell.series) continue;
        AppConfig cell_cfg = cfg;
        cell_cfg.sim = cell_config(cfg.sim, sr.spec, cell.fraction);
        write_file(dir / cell_file_name(sr.spec.id, cell.fraction),
                   render_csv(series_with_footer(*cell.series, cell.verdict, cell_cfg)), inputs);
      }
    }
  }
  rep.resolved_config.clear();
  std::cout << render_table(rep, ReportFormat::kText);
  return 0;
}

int cmd_plot(const std::string& csv_path, const std::string& svg_path) {
  std::ifstream in(csv_path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open '" + csv_path + "'");
  const Timeseries ts = parse_csv(in);
  write_file(svg_path, render_svg(ts), {csv_path});
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Microgrid islanding simulator and PV hosting-capacity sweep"};
  app.require_subcommand(1);

  std::string config;
  std::string out = ".";
  bool plot = false;
  auto* sim = app.add_subcommand("simulate", "run one simulation and classify it");
  sim->add_option("--config", config, "configuration file")->required();
  sim->add_option("--out", out, "output directory");
  sim->add_flag("--plot", plot, "also write run.svg");

  std::string fractions;
  std::string scenarios;
  double refine_res = 0.0;
  bool keep = false;
  auto* sweep = app.add_subcommand("sweep", "run the scenario x penetration matrix");
  sweep->add_option("--config", config, "configuration file")->required();
  sweep->add_option("--out", out, "output directory");
  sweep->add_option("--fractions", fractions, "comma-separated penetration fractions");
  sweep->add_option("--scenarios", scenarios, "comma-separated: low_off,low_on,high_off,high_on");
  sweep->add_option("--refine", refine_res, "bisect the stability boundary to this resolution");
  sweep->add_flag("--keep-series", keep, "write every cell's time series");

  std::string csv_in;
  std::string svg_out;
  auto* plt = app.add_subcommand("plot", "render a saved time series as SVG");
  plt->add_option("csv", csv_in, "time-series CSV")->required();
  plt->add_option("svg", svg_out, "output SVG")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitError;
  }

  try {
    if (sim->parsed()) return cmd_simulate(config, out, plot);
    if (sweep->parsed()) return cmd_sweep(config, out, fractions, scenarios, refine_res, keep);
    if (plt->parsed()) return cmd_plot(csv_in, svg_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
  return kExitError;
}
