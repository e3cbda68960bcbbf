#pragma once

// Per-unit radial feeder model and the quasi-static Newton-Raphson power
// flow solved at every integration stage.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mghc/errors.hpp"

namespace mghc {

using Complex = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;

/// MW (or Mvar) to per-unit on `s_base_mva`.
inline double to_per_unit(double value_mw, double s_base_mva) {
  if (!(s_base_mva > 0.0)) {
    throw InvalidConfig("s_base_mva must be positive, got " + std::to_string(s_base_mva));
  }
  return value_mw / s_base_mva;
}

struct Bus {
  int id = 0;
  double nominal_kv = 13.8;
};

struct Branch {
  int from_bus = 0;
  int to_bus = 0;
  double r_pu = 0.0;
  double x_pu = 0.0;

  bool zero_impedance() const { return r_pu == 0.0 && x_pu == 0.0; }
};

/// Constant impedance / current / power fractions of a load.
struct ZipWeights {
  double z = 0.0;
  double i = 0.0;
  double p = 1.0;
};

struct LoadSpec {
  int bus = 0;
  double p_mw = 0.0;
  double q_mvar = 0.0;
  ZipWeights zip{};
  /// Fractional change of active demand per fractional change of frequency.
  double freq_coeff = 0.0;
};

/// Consumed power of `load` in per-unit at voltage `v` and frequency `f_pu`.
inline Complex load_power(const LoadSpec& load, double s_base_mva, double v, double f_pu) {
  const double shape = load.zip.z * v * v + load.zip.i * v + load.zip.p;
  const double p = load.p_mw / s_base_mva * shape * (1.0 + load.freq_coeff * (f_pu - 1.0));
  const double q = load.q_mvar / s_base_mva * shape;
  return {p, q};
}

/// Immutable, validated feeder description: buses, branches, loads and bases.
class Network {
 public:
  Network(std::vector<Bus> buses, std::vector<Branch> branches, std::vector<LoadSpec> loads,
          int pcc_bus, double s_base_mva = 10.0, double f_nominal_hz = 60.0)
      : buses_(std::move(buses)),
        branches_(std::move(branches)),
        loads_(std::move(loads)),
        pcc_bus_(pcc_bus),
        s_base_mva_(s_base_mva),
        f_nominal_hz_(f_nominal_hz) {
    validate();
  }

  const std::vector<Bus>& buses() const { return buses_; }
  const std::vector<Branch>& branches() const { return branches_; }
  const std::vector<LoadSpec>& loads() const { return loads_; }
  int pcc_bus() const { return pcc_bus_; }
  double s_base_mva() const { return s_base_mva_; }
  double f_nominal_hz() const { return f_nominal_hz_; }

  bool has_bus(int id) const { return index_.contains(id); }

  std::size_t bus_index(int id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw InvalidArgument("unknown bus " + std::to_string(id));
    return it->second;
  }

  double total_load_mw() const {
    double total = 0.0;
    for (const auto& l : loads_) total += l.p_mw;
    return total;
  }

  /// Same network with every load scaled so that nominal active demand sums
  /// to `total_mw` (reactive demand scales by the same factor).
  Network with_total_load(double total_mw) const {
    if (total_mw < 0.0) throw InvalidConfig("total load must be non-negative");
    const double current = total_load_mw();
    if (current <= 0.0) {
      if (total_mw == 0.0) return *this;
      throw InvalidConfig("network has no active load to scale");
    }
    Network out = *this;
    const double k = total_mw / current;
    for (auto& l : out.loads_) {
      l.p_mw *= k;
      l.q_mvar *= k;
    }
    return out;
  }

  /// Adds an internal source node `node_id` tied to `attach_bus` through a
  /// pure reactance `x_pu` (an EMF-behind-reactance equivalent).
  Network with_source_node(int node_id, int attach_bus, double x_pu) const {
    std::vector<Bus> buses = buses_;
    std::vector<Branch> branches = branches_;
    buses.push_back({node_id, nominal_kv_of(attach_bus)});
    branches.push_back({attach_bus, node_id, 0.0, x_pu});
    return Network(std::move(buses), std::move(branches), loads_, pcc_bus_, s_base_mva_,
                   f_nominal_hz_);
  }

  double nominal_kv_of(int id) const { return buses_[bus_index(id)].nominal_kv; }

 private:
  void validate() {
    if (!(s_base_mva_ > 0.0)) throw InvalidConfig("s_base_mva must be positive");
    if (!(f_nominal_hz_ > 0.0)) throw InvalidConfig("f_nominal_hz must be positive");
    if (buses_.empty()) throw InvalidConfig("network has no buses");
    index_.clear();
    for (std::size_t k = 0; k < buses_.size(); ++k) {
      const auto& b = buses_[k];
      if (!(b.nominal_kv > 0.0)) {
        throw InvalidConfig("bus " + std::to_string(b.id) + ": nominal_kv must be positive");
      }
      if (!index_.emplace(b.id, k).second) {
        throw InvalidConfig("duplicate bus id " + std::to_string(b.id));
      }
    }
    auto require_bus = [&](int id, const std::string& what) {
      if (!index_.contains(id)) {
        throw InvalidConfig(what + " references unknown bus " + std::to_string(id));
      }
    };
    require_bus(pcc_bus_, "pcc");
    for (const auto& br : branches_) {
      require_bus(br.from_bus, "branch");
      require_bus(br.to_bus, "branch");
      if (br.from_bus == br.to_bus) {
        throw InvalidConfig("branch connects bus " + std::to_string(br.from_bus) + " to itself");
      }
      if (br.x_pu < 0.0 || br.r_pu < 0.0) {
        throw InvalidConfig("branch " + std::to_string(br.from_bus) + "-" +
                            std::to_string(br.to_bus) + ": negative impedance");
      }
    }
    for (const auto& l : loads_) {
      require_bus(l.bus, "load");
      if (l.p_mw < 0.0) throw InvalidConfig("load at bus " + std::to_string(l.bus) + ": p_mw < 0");
      const auto& w = l.zip;
      if (w.z < 0.0 || w.i < 0.0 || w.p < 0.0 || std::abs(w.z + w.i + w.p - 1.0) > 1e-9) {
        throw InvalidConfig("load at bus " + std::to_string(l.bus) +
                            ": zip weights must be non-negative and sum to 1");
      }
    }
    // Radial: n - 1 branches and connected.
    if (branches_.size() + 1 != buses_.size()) {
      throw InvalidConfig("network must be radial: expected " +
                          std::to_string(buses_.size() - 1) + " branches, got " +
                          std::to_string(branches_.size()));
    }
    std::vector<std::size_t> parent(buses_.size());
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    auto find = [&](std::size_t x) {
      while (parent[x] != x) x = parent[x] = parent[parent[x]];
      return x;
    };
    for (const auto& br : branches_) {
      auto a = find(index_.at(br.from_bus));
      auto b = find(index_.at(br.to_bus));
      if (a == b) throw InvalidConfig("network must be radial: branch set contains a loop");
      parent[a] = b;
    }
  }

  std::vector<Bus> buses_;
  std::vector<Branch> branches_;
  std::vector<LoadSpec> loads_;
  int pcc_bus_ = 0;
  double s_base_mva_ = 10.0;
  double f_nominal_hz_ = 60.0;
  std::unordered_map<int, std::size_t> index_;
};

/// Stand-in topology of the hosting feeder: PCC 101 -> 102 -> 103 -> 104 -> 105,
/// 13.8 kV, 10 MVA base, loads split evenly between 104 and 105.
inline Network bcm_network() {
  std::vector<Bus> buses;
  for (int id : {101, 102, 103, 104, 105}) buses.push_back({id, 13.8});
  std::vector<Branch> branches{{101, 102, 0.01, 0.05},
                               {102, 103, 0.01, 0.05},
                               {103, 104, 0.01, 0.05},
                               {104, 105, 0.01, 0.05}};
  std::vector<LoadSpec> loads{{104, 0.5, 0.1, ZipWeights{}, 3.655},
                              {105, 0.5, 0.1, ZipWeights{}, 3.655}};
  return Network(std::move(buses), std::move(branches), std::move(loads), 101, 10.0, 60.0);
}

/// Fixed-voltage bus (angle reference / voltage source).
struct Slack {
  int bus = 0;
  double v = 1.0;
  double theta = 0.0;
};

/// Bus with specified active injection and voltage magnitude (PV bus).
struct VoltageControl {
  int bus = 0;
  double p = 0.0;
  double v = 1.0;
};

/// Constant per-unit injection at a bus (generation positive).
struct Injection {
  int bus = 0;
  double p = 0.0;
  double q = 0.0;
};

/// Voltage-dependent injection reported by a device hook, with its partials
/// with respect to the local voltage magnitude and angle.
struct DeviceInjection {
  double p = 0.0;
  double q = 0.0;
  double dp_dv = 0.0;
  double dp_dtheta = 0.0;
  double dq_dv = 0.0;
  double dq_dtheta = 0.0;
};

/// Hook type that contributes nothing.
struct NoDevices {
  DeviceInjection operator()(std::size_t, double, double) const { return {}; }
};

struct BranchFlow {
  int from_bus = 0;
  int to_bus = 0;
  Complex s_from;  ///< power entering the branch at the from end
  Complex s_to;    ///< power entering the branch at the to end
};

struct NetworkSolution {
  std::vector<int> bus_ids;
  std::vector<double> vm;
  std::vector<double> va;
  std::vector<Complex> load;       ///< consumed per bus
  std::vector<Complex> injection;  ///< all non-load injection per bus, slack included
  std::vector<BranchFlow> flows;
  std::vector<Complex> slack_injection;  ///< one per slack, in the order given
  Complex losses;
  double frequency_pu = 1.0;
  int iterations = 0;
  double mismatch = 0.0;

  std::size_t index_of(int bus) const {
    auto it = std::find(bus_ids.begin(), bus_ids.end(), bus);
    if (it == bus_ids.end()) throw InvalidArgument("unknown bus " + std::to_string(bus));
    return static_cast<std::size_t>(it - bus_ids.begin());
  }
  Complex voltage(int bus) const {
    const auto k = index_of(bus);
    return std::polar(vm[k], va[k]);
  }
  Complex total_load() const { return std::accumulate(load.begin(), load.end(), Complex{}); }
};

struct PowerFlowOptions {
  double tol = 1e-8;
  int max_iterations = 30;
};

/// Newton-Raphson solver in polar form, prepared once per topology and slack
/// set. Buses joined by zero-impedance branches are solved as one node.
/// Instances keep scratch storage, so each simulation owns its own.
class PowerFlow {
 public:
  PowerFlow(Network net, std::vector<Slack> slacks, std::vector<VoltageControl> controls = {})
      : net_(std::move(net)), slacks_(std::move(slacks)), controls_(std::move(controls)) {
    prepare();
  }

  const Network& network() const { return net_; }
  const std::vector<Slack>& slacks() const { return slacks_; }

  /// Replaces the fixed voltage of slack `k` without re-preparing.
  void set_slack_voltage(std::size_t k, double v, double theta) {
    slacks_.at(k).v = v;
    slacks_.at(k).theta = theta;
  }

  template <class DeviceFn = NoDevices>
  NetworkSolution solve(std::span<const Injection> injections, DeviceFn&& devices = {},
                        const NetworkSolution* warm = nullptr, double frequency_pu = 1.0,
                        const PowerFlowOptions& opt = {}) {
    const std::size_t n = net_.buses().size();
    const double sb = net_.s_base_mva();

    spec_.assign(n, Complex{});
    for (const auto& inj : injections) spec_[net_.bus_index(inj.bus)] += Complex(inj.p, inj.q);
    for (const auto& c : controls_) spec_[net_.bus_index(c.bus)] += Complex(c.p, 0.0);

    // Initial node voltages.
    for (std::size_t s = 0; s < m_; ++s) {
      vm_[s] = 1.0;
      va_[s] = slacks_.front().theta;
    }
    if (warm != nullptr && warm->bus_ids.size() == n) {
      for (std::size_t k = 0; k < n; ++k) {
        if (warm->vm[k] > 0.0) {
          vm_[super_[k]] = warm->vm[k];
          va_[super_[k]] = warm->va[k];
        }
      }
    }
    for (const auto& s : slacks_) {
      const auto node = super_[net_.bus_index(s.bus)];
      vm_[node] = s.v;
      va_[node] = s.theta;
    }
    for (const auto& c : controls_) vm_[super_[net_.bus_index(c.bus)]] = c.v;

    int iter = 0;
    double norm = 0.0;
    bool converged = false;
    for (;;) {
      evaluate(devices, frequency_pu, sb);
      norm = nx_ == 0 ? 0.0 : mis_.head(nx_).cwiseAbs().maxCoeff();
      if (!std::isfinite(norm)) break;
      if (norm < opt.tol) {
        converged = true;
        // One extra correction drives the residual to round-off.
        if (norm < 1e-12 || iter >= opt.max_iterations) break;
      } else if (converged || iter >= opt.max_iterations) {
        converged = norm < opt.tol;
        break;
      }
      if (nx_ == 0) break;
      jacobian(devices, frequency_pu, sb);
      lu_.compute(jac_.topLeftCorner(nx_, nx_));
      dx_.head(nx_) = lu_.solve(-mis_.head(nx_));
      for (std::size_t s = 0; s < m_; ++s) {
        if (theta_col_[s] >= 0) va_[s] += dx_[theta_col_[s]];
        if (v_col_[s] >= 0) vm_[s] += dx_[v_col_[s]];
      }
      ++iter;
      if (converged) {
        evaluate(devices, frequency_pu, sb);
        norm = nx_ == 0 ? 0.0 : mis_.head(nx_).cwiseAbs().maxCoeff();
        converged = std::isfinite(norm) && norm < opt.tol;
        break;
      }
    }
    if (!converged) {
      throw SolverDivergence("power flow did not converge after " + std::to_string(iter) +
                             " iterations (mismatch " + std::to_string(norm) + " pu)");
    }
    return assemble(devices, frequency_pu, sb, iter, norm);
  }

 private:
  enum class Kind { kPQ, kPV, kSlack };

  void prepare() {
    const auto& buses = net_.buses();
    const std::size_t n = buses.size();
    if (slacks_.empty()) throw InvalidArgument("power flow needs at least one slack bus");

    // Supernodes from zero-impedance branches.
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    auto find = [&](std::size_t x) {
      while (parent[x] != x) x = parent[x] = parent[parent[x]];
      return x;
    };
    for (const auto& br : net_.branches()) {
      if (br.zero_impedance()) {
        parent[find(net_.bus_index(br.from_bus))] = find(net_.bus_index(br.to_bus));
      }
    }
    super_.assign(n, 0);
    std::unordered_map<std::size_t, std::size_t> root_to_node;
    for (std::size_t k = 0; k < n; ++k) {
      auto [it, inserted] = root_to_node.emplace(find(k), root_to_node.size());
      super_[k] = it->second;
    }
    m_ = root_to_node.size();

    kind_.assign(m_, Kind::kPQ);
    for (const auto& s : slacks_) {
      auto node = super_[net_.bus_index(s.bus)];
      if (kind_[node] != Kind::kPQ) {
        throw InvalidArgument("two fixed-voltage buses share node of bus " + std::to_string(s.bus));
      }
      kind_[node] = Kind::kSlack;
    }
    for (const auto& c : controls_) {
      auto node = super_[net_.bus_index(c.bus)];
      if (kind_[node] != Kind::kPQ) {
        throw InvalidArgument("voltage-controlled bus " + std::to_string(c.bus) +
                              " collides with another fixed bus");
      }
      kind_[node] = Kind::kPV;
    }

    ybus_ = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(m_), static_cast<Eigen::Index>(m_));
    for (const auto& br : net_.branches()) {
      if (br.zero_impedance()) continue;
      const auto a = static_cast<Eigen::Index>(super_[net_.bus_index(br.from_bus)]);
      const auto b = static_cast<Eigen::Index>(super_[net_.bus_index(br.to_bus)]);
      const Complex y = 1.0 / Complex(br.r_pu, br.x_pu);
      ybus_(a, a) += y;
      ybus_(b, b) += y;
      ybus_(a, b) -= y;
      ybus_(b, a) -= y;
    }
    g_ = ybus_.real();
    b_ = ybus_.imag();

    theta_col_.assign(m_, -1);
    v_col_.assign(m_, -1);
    p_row_.assign(m_, -1);
    q_row_.assign(m_, -1);
    int col = 0;
    for (std::size_t s = 0; s < m_; ++s) {
      if (kind_[s] != Kind::kSlack) {
        theta_col_[s] = col;
        p_row_[s] = col;
        ++col;
      }
    }
    for (std::size_t s = 0; s < m_; ++s) {
      if (kind_[s] == Kind::kPQ) {
        v_col_[s] = col;
        q_row_[s] = col;
        ++col;
      }
    }
    nx_ = static_cast<Eigen::Index>(col);
    const auto cap = std::max<Eigen::Index>(nx_, 1);
    jac_ = Eigen::MatrixXd::Zero(cap, cap);
    mis_ = Eigen::VectorXd::Zero(cap);
    dx_ = Eigen::VectorXd::Zero(cap);
    vm_.assign(m_, 1.0);
    va_.assign(m_, 0.0);
    pcalc_.assign(m_, 0.0);
    qcalc_.assign(m_, 0.0);
    dev_.assign(n, DeviceInjection{});

    members_.assign(m_, {});
    for (std::size_t k = 0; k < n; ++k) members_[super_[k]].push_back(k);
    loads_at_.assign(n, {});
    for (std::size_t l = 0; l < net_.loads().size(); ++l) {
      loads_at_[net_.bus_index(net_.loads()[l].bus)].push_back(l);
    }

    // Tree order for zero-impedance branch flows (post-order from bus 0).
    parent_branch_.assign(n, -1);
    order_.clear();
    std::vector<std::vector<std::size_t>> adj(n);
    for (std::size_t b = 0; b < net_.branches().size(); ++b) {
      const auto& br = net_.branches()[b];
      adj[net_.bus_index(br.from_bus)].push_back(b);
      adj[net_.bus_index(br.to_bus)].push_back(b);
    }
    std::vector<bool> seen(n, false);
    std::vector<std::size_t> stack{0};
    seen[0] = true;
    while (!stack.empty()) {
      auto u = stack.back();
      stack.pop_back();
      order_.push_back(u);
      for (auto b : adj[u]) {
        const auto& br = net_.branches()[b];
        auto v = net_.bus_index(br.from_bus) == u ? net_.bus_index(br.to_bus)
                                                   : net_.bus_index(br.from_bus);
        if (seen[v]) continue;
        seen[v] = true;
        parent_branch_[v] = static_cast<long>(b);
        stack.push_back(v);
      }
    }
  }

  Complex node_load(std::size_t s, double f_pu, double sb, double* dp_dv, double* dq_dv) const {
    Complex total{};
    double dp = 0.0;
    double dq = 0.0;
    const double v = vm_[s];
    for (auto k : members_[s]) {
      for (auto l : loads_at_[k]) {
        const auto& ld = net_.loads()[l];
        total += load_power(ld, sb, v, f_pu);
        const double dshape = 2.0 * ld.zip.z * v + ld.zip.i;
        dp += ld.p_mw / sb * dshape * (1.0 + ld.freq_coeff * (f_pu - 1.0));
        dq += ld.q_mvar / sb * dshape;
      }
    }
    if (dp_dv != nullptr) *dp_dv = dp;
    if (dq_dv != nullptr) *dq_dv = dq;
    return total;
  }

  template <class DeviceFn>
  void evaluate(DeviceFn& devices, double f_pu, double sb) {
    for (std::size_t k = 0; k < dev_.size(); ++k) {
      const auto s = super_[k];
      dev_[k] = devices(k, vm_[s], va_[s]);
    }
    for (std::size_t i = 0; i < m_; ++i) {
      double p = 0.0;
      double q = 0.0;
      for (std::size_t k = 0; k < m_; ++k) {
        const double gik = g_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
        const double bik = b_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
        if (gik == 0.0 && bik == 0.0) continue;
        const double th = va_[i] - va_[k];
        const double c = std::cos(th);
        const double s = std::sin(th);
        p += vm_[k] * (gik * c + bik * s);
        q += vm_[k] * (gik * s - bik * c);
      }
      pcalc_[i] = vm_[i] * p;
      qcalc_[i] = vm_[i] * q;
    }
    for (std::size_t i = 0; i < m_; ++i) {
      if (kind_[i] == Kind::kSlack) continue;
      Complex inj{};
      for (auto k : members_[i]) inj += spec_[k] + Complex(dev_[k].p, dev_[k].q);
      const Complex ld = node_load(i, f_pu, sb, nullptr, nullptr);
      mis_[p_row_[i]] = pcalc_[i] + ld.real() - inj.real();
      if (q_row_[i] >= 0) mis_[q_row_[i]] = qcalc_[i] + ld.imag() - inj.imag();
    }
  }

  template <class DeviceFn>
  void jacobian(DeviceFn&, double f_pu, double sb) {
    jac_.setZero();
    for (std::size_t i = 0; i < m_; ++i) {
      if (kind_[i] == Kind::kSlack) continue;
      const auto ii = static_cast<Eigen::Index>(i);
      const auto pr = p_row_[i];
      const auto qr = q_row_[i];
      for (std::size_t k = 0; k < m_; ++k) {
        if (k == i) continue;
        const auto kk = static_cast<Eigen::Index>(k);
        const double gik = g_(ii, kk);
        const double bik = b_(ii, kk);
        if (gik == 0.0 && bik == 0.0) continue;
        const double th = va_[i] - va_[k];
        const double c = std::cos(th);
        const double s = std::sin(th);
        if (theta_col_[k] >= 0) {
          jac_(pr, theta_col_[k]) = vm_[i] * vm_[k] * (gik * s - bik * c);
          if (qr >= 0) jac_(qr, theta_col_[k]) = -vm_[i] * vm_[k] * (gik * c + bik * s);
        }
        if (v_col_[k] >= 0) {
          jac_(pr, v_col_[k]) = vm_[i] * (gik * c + bik * s);
          if (qr >= 0) jac_(qr, v_col_[k]) = vm_[i] * (gik * s - bik * c);
        }
      }
      double dpl = 0.0;
      double dql = 0.0;
      node_load(i, f_pu, sb, &dpl, &dql);
      DeviceInjection d{};
      for (auto k : members_[i]) {
        d.dp_dv += dev_[k].dp_dv;
        d.dp_dtheta += dev_[k].dp_dtheta;
        d.dq_dv += dev_[k].dq_dv;
        d.dq_dtheta += dev_[k].dq_dtheta;
      }
      const double v = vm_[i];
      const double gii = g_(ii, ii);
      const double bii = b_(ii, ii);
      jac_(pr, theta_col_[i]) = -qcalc_[i] - bii * v * v - d.dp_dtheta;
      if (qr >= 0) jac_(qr, theta_col_[i]) = pcalc_[i] - gii * v * v - d.dq_dtheta;
      if (v_col_[i] >= 0) {
        jac_(pr, v_col_[i]) = pcalc_[i] / v + gii * v + dpl - d.dp_dv;
        jac_(qr, v_col_[i]) = qcalc_[i] / v - bii * v + dql - d.dq_dv;
      }
    }
  }

  template <class DeviceFn>
  NetworkSolution assemble(DeviceFn&, double f_pu, double sb, int iter, double norm) const {
    const auto& buses = net_.buses();
    const std::size_t n = buses.size();
    NetworkSolution sol;
    sol.frequency_pu = f_pu;
    sol.iterations = iter;
    sol.mismatch = norm;
    sol.bus_ids.resize(n);
    sol.vm.resize(n);
    sol.va.resize(n);
    sol.load.assign(n, Complex{});
    sol.injection.assign(n, Complex{});
    for (std::size_t k = 0; k < n; ++k) {
      sol.bus_ids[k] = buses[k].id;
      sol.vm[k] = vm_[super_[k]];
      sol.va[k] = va_[super_[k]];
      for (auto l : loads_at_[k]) sol.load[k] += load_power(net_.loads()[l], sb, sol.vm[k], f_pu);
      sol.injection[k] = spec_[k] + Complex(dev_[k].p, dev_[k].q);
    }
    // Fixed-voltage buses absorb the residual of their node.
    auto fixed_bus_injection = [&](int bus) {
      const auto k = net_.bus_index(bus);
      const auto s = super_[k];
      Complex need(pcalc_[s], qcalc_[s]);
      for (auto j : members_[s]) need += sol.load[j] - (j == k ? Complex{} : sol.injection[j]);
      return need;
    };
    for (const auto& sl : slacks_) {
      const auto k = net_.bus_index(sl.bus);
      const Complex s = fixed_bus_injection(sl.bus);
      sol.slack_injection.push_back(s);
      sol.injection[k] = s;
    }
    for (const auto& c : controls_) {
      const auto k = net_.bus_index(c.bus);
      sol.injection[k] = fixed_bus_injection(c.bus);
    }

    const auto& brs = net_.branches();
    sol.flows.resize(brs.size());
    for (std::size_t b = 0; b < brs.size(); ++b) {
      const auto& br = brs[b];
      sol.flows[b].from_bus = br.from_bus;
      sol.flows[b].to_bus = br.to_bus;
      if (br.zero_impedance()) continue;
      const auto f = net_.bus_index(br.from_bus);
      const auto t = net_.bus_index(br.to_bus);
      const Complex vf = std::polar(sol.vm[f], sol.va[f]);
      const Complex vt = std::polar(sol.vm[t], sol.va[t]);
      const Complex i = (vf - vt) / Complex(br.r_pu, br.x_pu);
      sol.flows[b].s_from = vf * std::conj(i);
      sol.flows[b].s_to = vt * std::conj(-i);
    }
    // Zero-impedance branches carry whatever their subtree needs.
    for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
      const auto v = *it;
      const long pb = parent_branch_[v];
      if (pb < 0 || !brs[static_cast<std::size_t>(pb)].zero_impedance()) continue;
      Complex into = sol.load[v] - sol.injection[v];
      for (std::size_t b = 0; b < brs.size(); ++b) {
        if (static_cast<long>(b) == pb) continue;
        if (net_.bus_index(brs[b].from_bus) == v) into += sol.flows[b].s_from;
        if (net_.bus_index(brs[b].to_bus) == v) into += sol.flows[b].s_to;
      }
      auto& fl = sol.flows[static_cast<std::size_t>(pb)];
      if (net_.bus_index(brs[static_cast<std::size_t>(pb)].to_bus) == v) {
        fl.s_from = into;
        fl.s_to = -into;
      } else {
        fl.s_to = into;
        fl.s_from = -into;
      }
    }
    for (const auto& fl : sol.flows) sol.losses += fl.s_from + fl.s_to;
    return sol;
  }

  Network net_;
  std::vector<Slack> slacks_;
  std::vector<VoltageControl> controls_;

  std::size_t m_ = 0;
  std::vector<std::size_t> super_;
  std::vector<Kind> kind_;
  std::vector<std::vector<std::size_t>> members_;
  std::vector<std::vector<std::size_t>> loads_at_;
  Eigen::MatrixXcd ybus_;
  Eigen::MatrixXd g_;
  Eigen::MatrixXd b_;
  std::vector<int> theta_col_;
  std::vector<int> v_col_;
  std::vector<int> p_row_;
  std::vector<int> q_row_;
  Eigen::Index nx_ = 0;
  std::vector<long> parent_branch_;
  std::vector<std::size_t> order_;

  // scratch
  std::vector<Complex> spec_;
  std::vector<DeviceInjection> dev_;
  std::vector<double> vm_;
  std::vector<double> va_;
  std::vector<double> pcalc_;
  std::vector<double> qcalc_;
  Eigen::MatrixXd jac_;
  Eigen::VectorXd mis_;
  Eigen::VectorXd dx_;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
};

/// One-shot solve with a single slack bus.
inline NetworkSolution solve_network(const Network& net, std::span<const Injection> injections,
                                     const Slack& slack, double frequency_pu = 1.0,
                                     const PowerFlowOptions& opt = {}) {
  PowerFlow pf(net, {slack});
  return pf.solve(injections, NoDevices{}, nullptr, frequency_pu, opt);
}

/// Net power carried through `bus` toward the load side: local consumption
/// plus the sending-end flows of branches leading away from the PCC. Only
/// branches of `feeder` are considered, so internal source nodes added for
/// the solve do not count.
inline Complex bus_flow(const NetworkSolution& sol, const Network& feeder, int bus) {
  if (!feeder.has_bus(bus)) throw InvalidArgument("unknown bus " + std::to_string(bus));
  // Walk the feeder tree from the PCC to orient branches.
  const auto& brs = feeder.branches();
  std::vector<int> depth(feeder.buses().size(), -1);
  depth[feeder.bus_index(feeder.pcc_bus())] = 0;
  bool changed = true;
  while (changed) {
    changed = false;
    for (const auto& br : brs) {
      auto a = feeder.bus_index(br.from_bus);
      auto b = feeder.bus_index(br.to_bus);
      if (depth[a] >= 0 && depth[b] < 0) {
        depth[b] = depth[a] + 1;
        changed = true;
      } else if (depth[b] >= 0 && depth[a] < 0) {
        depth[a] = depth[b] + 1;
        changed = true;
      }
    }
  }
  const auto k = sol.index_of(bus);
  Complex total = sol.load[k];
  const int d = depth[feeder.bus_index(bus)];
  for (const auto& br : brs) {
    const bool from_here = br.from_bus == bus;
    const bool to_here = br.to_bus == bus;
    if (!from_here && !to_here) continue;
    const int other = from_here ? br.to_bus : br.from_bus;
    if (depth[feeder.bus_index(other)] <= d) continue;  // upstream branch
    for (const auto& fl : sol.flows) {
      if (fl.from_bus == br.from_bus && fl.to_bus == br.to_bus) {
        total += from_here ? fl.s_from : fl.s_to;
        break;
      }
    }
  }
  return total;
}

}  // namespace mghc
