#include <gtest/gtest.h>

#include "mghc/netmodel.hpp"
#include "oracles.hpp"

using namespace mghc;

namespace {

Network three_bus(double load_mw, double s_base = 10.0, double scale_z = 1.0) {
  return Network({{1, 13.8}, {2, 13.8}, {3, 13.8}},
                 {{1, 2, 0.01 * scale_z, 0.05 * scale_z}, {2, 3, 0.01 * scale_z, 0.05 * scale_z}},
                 {{3, load_mw, 0.0, ZipWeights{}, 0.0}}, 1, s_base);
}

}  // namespace

TEST(PerUnit, DividesByBase) {
  EXPECT_DOUBLE_EQ(to_per_unit(1.0, 10.0), 0.1);
  EXPECT_DOUBLE_EQ(to_per_unit(0.0, 10.0), 0.0);
  EXPECT_DOUBLE_EQ(to_per_unit(2.8, 10.0), 0.28);
  EXPECT_THROW(to_per_unit(1.0, 0.0), InvalidConfig);
  EXPECT_THROW(to_per_unit(1.0, -5.0), InvalidConfig);
}

TEST(SolveNetwork, ZeroImpedanceBranchIsLossless) {
  Network net({{1, 13.8}, {2, 13.8}}, {{1, 2, 0.0, 0.0}}, {{2, 1.0, 0.0, ZipWeights{}, 0.0}}, 1);
  auto sol = solve_network(net, {}, {1, 1.0, 0.0});
  EXPECT_NEAR(sol.slack_injection[0].real(), 0.1, 1e-12);
  EXPECT_NEAR(sol.slack_injection[0].imag(), 0.0, 1e-12);
  EXPECT_NEAR(sol.vm[0], 1.0, 1e-12);
  EXPECT_NEAR(sol.vm[1], 1.0, 1e-12);
  EXPECT_NEAR(bus_flow(sol, net, 1).real(), 0.1, 1e-12);
}

TEST(SolveNetwork, EmptyNetworkSitsAtSlackVoltage) {
  Network net({{1, 13.8}, {2, 13.8}, {3, 13.8}}, {{1, 2, 0.01, 0.05}, {2, 3, 0.01, 0.05}}, {}, 1);
  auto sol = solve_network(net, {}, {1, 1.02, 0.1});
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_NEAR(sol.vm[k], 1.02, 1e-12);
    EXPECT_NEAR(sol.va[k], 0.1, 1e-12);
  }
  for (const auto& f : sol.flows) {
    EXPECT_NEAR(std::abs(f.s_from), 0.0, 1e-12);
    EXPECT_NEAR(std::abs(f.s_to), 0.0, 1e-12);
  }
}

TEST(SolveNetwork, ThreeBusMatchesGaussSeidel) {
  const Network net = three_bus(1.0);
  auto sol = solve_network(net, {}, {1, 1.0, 0.0});

  oracle::GaussSeidel gs{{1, 2, 3}, {{1, 2, {0.01, 0.05}}, {2, 3, {0.01, 0.05}}}};
  const auto v = gs.solve({0.0, 0.0, -0.1}, 1.0);
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_NEAR(sol.vm[k], std::abs(v[k]), 1e-9);
    EXPECT_NEAR(sol.va[k], std::arg(v[k]), 1e-9);
  }
  const auto f12 = oracle::GaussSeidel::line_flow(v, 0, 1, {0.01, 0.05});
  const auto f21 = oracle::GaussSeidel::line_flow(v, 1, 0, {0.01, 0.05});
  EXPECT_NEAR(sol.flows[0].s_from.real(), f12.real(), 1e-9);
  EXPECT_NEAR(sol.flows[0].s_from.imag(), f12.imag(), 1e-9);
  EXPECT_NEAR(sol.flows[0].s_to.real(), f21.real(), 1e-9);
  EXPECT_NEAR(sol.slack_injection[0].real(), f12.real(), 1e-9);
}

TEST(SolveNetwork, PowerBalanceHolds) {
  Network net = bcm_network();
  std::vector<Injection> inj{{103, 0.2, 0.0}, {103, 0.01, 0.0}};
  auto sol = solve_network(net, inj, {101, 1.0, 0.0});
  const double load = sol.total_load().real();
  EXPECT_LT(std::abs(sol.slack_injection[0].real() - (load + sol.losses.real() - 0.21)), 1e-6);
}

TEST(SolveNetwork, DivergenceIsReported) {
  const Network net = three_bus(200.0);
  EXPECT_THROW(solve_network(net, {}, {1, 1.0, 0.0}), SolverDivergence);
}

TEST(SolveNetwork, ZipConstantPowerAtNominalVoltage) {
  LoadSpec l{1, 0.7, 0.2, ZipWeights{0.0, 0.0, 1.0}, 0.0};
  const Complex s = load_power(l, 10.0, 1.0, 1.0);
  EXPECT_DOUBLE_EQ(s.real(), 0.07);
  EXPECT_DOUBLE_EQ(s.imag(), 0.02);
  LoadSpec z{1, 1.0, 0.0, ZipWeights{1.0, 0.0, 0.0}, 0.0};
  EXPECT_NEAR(load_power(z, 10.0, 0.9, 1.0).real(), 0.1 * 0.81, 1e-15);
}

TEST(SolveNetwork, ScalingBaseLeavesPhysicalResultsUnchanged) {
  const double k = 2.5;
  const Network a = three_bus(1.0, 10.0, 1.0);
  const Network b = three_bus(1.0, 10.0 * k, k);
  auto sa = solve_network(a, std::vector<Injection>{{2, 0.03, 0.01}}, {1, 1.0, 0.0});
  auto sb = solve_network(b, std::vector<Injection>{{2, 0.03 / k, 0.01 / k}}, {1, 1.0, 0.0});
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_NEAR(sa.vm[i], sb.vm[i], 1e-9);
    EXPECT_NEAR(sa.va[i], sb.va[i], 1e-9);
  }
  EXPECT_NEAR(sa.slack_injection[0].real() * 10.0, sb.slack_injection[0].real() * 10.0 * k, 1e-9);
  EXPECT_NEAR(sa.losses.real() * 10.0, sb.losses.real() * 10.0 * k, 1e-9);
}

TEST(NetworkValidation, RejectsMalformedTopologies) {
  EXPECT_THROW(Network({{1, 13.8}, {2, 13.8}}, {{1, 3, 0.01, 0.05}}, {}, 1), InvalidConfig);
  EXPECT_THROW(Network({{1, 13.8}, {2, 13.8}}, {{1, 2, 0.01, 0.05}}, {{7, 1.0, 0.0, {}, 0.0}}, 1),
               InvalidConfig);
  EXPECT_THROW(Network({{1, 13.8}, {2, 13.8}}, {{1, 2, 0.01, 0.05}}, {}, 9), InvalidConfig);
  EXPECT_THROW(Network({{1, 13.8}, {2, 13.8}, {3, 13.8}}, {{1, 2, 0.01, 0.05}}, {}, 1),
               InvalidConfig);
  EXPECT_THROW(Network({{1, 13.8}, {2, 13.8}, {3, 13.8}, {4, 13.8}},
                       {{1, 2, 0.01, 0.05}, {2, 3, 0.01, 0.05}, {3, 1, 0.01, 0.05}}, {}, 1),
               InvalidConfig);
  EXPECT_THROW(Network({{1, 13.8}, {1, 13.8}}, {{1, 1, 0.01, 0.05}}, {}, 1), InvalidConfig);
}

TEST(BusFlow, LeafBusCarriesItsLoad) {
  const Network net = three_bus(1.0);
  auto sol = solve_network(net, {}, {1, 1.0, 0.0});
  const Complex s = bus_flow(sol, net, 3);
  EXPECT_NEAR(s.real(), 0.1, 1e-12);
  EXPECT_NEAR(s.imag(), 0.0, 1e-12);
  EXPECT_THROW(bus_flow(sol, net, 42), InvalidArgument);
}

TEST(BusFlow, PassThroughBusReportsOutgoingFlow) {
  const Network net = three_bus(1.0);
  auto sol = solve_network(net, {}, {1, 1.0, 0.0});
  const Complex s = bus_flow(sol, net, 2);
  EXPECT_NEAR(s.real(), sol.flows[1].s_from.real(), 1e-15);
  EXPECT_NEAR(s.imag(), sol.flows[1].s_from.imag(), 1e-15);
}

TEST(BusFlow, Bus104MatchesOracleWithTwoSources) {
  const Network net = bcm_network();
  std::vector<Injection> inj{{103, 0.2, 0.0}, {103, 0.01, 0.0}};
  auto sol = solve_network(net, inj, {101, 1.0, 0.0});

  oracle::GaussSeidel gs{{101, 102, 103, 104, 105},
                         {{101, 102, {0.01, 0.05}},
                          {102, 103, {0.01, 0.05}},
                          {103, 104, {0.01, 0.05}},
                          {104, 105, {0.01, 0.05}}}};
  const auto v = gs.solve({0.0, 0.0, 0.21, {-0.05, -0.01}, {-0.05, -0.01}}, 1.0);
  const oracle::C expect = oracle::C(0.05, 0.01) + oracle::GaussSeidel::line_flow(v, 3, 4, {0.01, 0.05});
  const Complex got = bus_flow(sol, net, 104);
  EXPECT_NEAR(got.real(), expect.real(), 1e-9);
  EXPECT_NEAR(got.imag(), expect.imag(), 1e-9);
}
