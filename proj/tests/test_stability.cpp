#include <gtest/gtest.h>

#include <cmath>
#include <tuple>

#include "mghc/stability.hpp"
#include "synthetic.hpp"

using namespace mghc;

TEST(Envelope, DecayingSinusoidRatio) {
  std::vector<double> t, v;
  for (int i = 0; i <= 3000; ++i) {
    t.push_back(i * 1e-3);
    v.push_back(std::exp(-t.back()) * std::sin(4.0 * kPi * t.back()));
  }
  const auto amp = envelope(t, v, 0.0, 1.0);
  ASSERT_EQ(amp.size(), 3u);
  const double r = amp[1] / amp[0];
  EXPECT_NEAR(r, std::exp(-1.0), 0.05 * std::exp(-1.0));
}

TEST(Envelope, ConstantSignalHasZeroAmplitude) {
  std::vector<double> t, v;
  for (int i = 0; i <= 500; ++i) {
    t.push_back(i * 0.01);
    v.push_back(0.7);
  }
  const auto amp = envelope(t, v, 0.5, 1.0);
  EXPECT_EQ(amp.size(), 4u);
  for (double a : amp) EXPECT_EQ(a, 0.0);
  EXPECT_EQ(envelope_ratio(amp, 1e-6), 0.0);
}

TEST(Envelope, NeedsTwoFullWindows) {
  std::vector<double> t{0.0, 0.5, 1.0, 1.5};
  std::vector<double> v{0.0, 1.0, 0.0, 1.0};
  EXPECT_THROW(envelope(t, v, 0.0, 1.0), InsufficientData);
  EXPECT_THROW(envelope({}, {}, 0.0, 1.0), InsufficientData);
  EXPECT_THROW(envelope(t, std::vector<double>{1.0}, 0.0, 1.0), InvalidArgument);
}

TEST(EnvelopeRatio, FloorHandling) {
  EXPECT_EQ(envelope_ratio({0.0, 0.5}, 1e-6), std::numeric_limits<double>::infinity());
  EXPECT_DOUBLE_EQ(envelope_ratio({0.4, 0.1}, 1e-6), 0.25);
}

class ClassifyGrid : public ::testing::TestWithParam<synthetic::Case> {};

TEST_P(ClassifyGrid, MatchesEnvelopeTrend) {
  const auto c = GetParam();
  const Verdict v = classify(synthetic::oscillation(c));
  EXPECT_EQ(v.outcome, c.outcome) << "sigma=" << c.sigma << " R=" << v.ratio();
  EXPECT_EQ(v.reason, c.reason);
}

INSTANTIATE_TEST_SUITE_P(DecayingGrowingConstant, ClassifyGrid, ::testing::ValuesIn(synthetic::grid()));

TEST(Classify, RatioBoundaries) {
  // Windows start 0.5 s after islanding; the last one ends 7 s after it.
  for (auto [sigma, outcome, reason] :
       {std::tuple{-0.2, Outcome::kStable, Reason::kNone},
        std::tuple{-0.1, Outcome::kUnstable, Reason::kSustainedOscillation},
        std::tuple{0.05, Outcome::kUnstable, Reason::kGrowingOscillation}}) {
    const Verdict v = classify(synthetic::oscillation({sigma, 1.5, outcome, reason}));
    EXPECT_EQ(v.outcome, outcome) << sigma;
    EXPECT_EQ(v.reason, reason) << sigma;
  }
}

TEST(Classify, ConstantIsStable) {
  auto res = synthetic::result([](double) { return 0.0; });
  const Verdict v = classify(res);
  EXPECT_TRUE(v.stable());
  EXPECT_EQ(v.r_speed, 0.0);
  EXPECT_NEAR(v.f_final_hz, 60.0, 1e-12);
}

TEST(Classify, FrequencyOffsetIsAFrequencyTrip) {
  auto res = synthetic::result([](double) { return 0.003; });
  const Verdict v = classify(res);
  EXPECT_EQ(v.reason, Reason::kFrequencyTrip);
  EXPECT_NEAR(v.f_final_hz, 60.18, 1e-9);
  res = synthetic::result([](double) { return 0.001; });
  EXPECT_TRUE(classify(res).stable());
}

TEST(Classify, DeviceTripWins) {
  auto res = synthetic::result([](double) { return 0.0; });
  res.pv_ride_through_trip = true;
  EXPECT_EQ(classify(res).reason, Reason::kDeviceTrip);
  res.pv_ride_through_trip = false;
  res.genset_frequency_trip = true;
  EXPECT_EQ(classify(res).reason, Reason::kDeviceTrip);
}

TEST(Classify, SolverDivergenceIsUnstable) {
  auto res = synthetic::result([](double) { return 0.0; });
  res.termination = Termination::kSolverDivergence;
  const Verdict v = classify(res);
  EXPECT_EQ(v.outcome, Outcome::kUnstable);
  EXPECT_EQ(v.reason, Reason::kSolverDivergence);
}

TEST(Classify, MissingChannelIsAnError) {
  auto res = synthetic::result([](double) { return 0.0; });
  res.names[1] = "other";
  EXPECT_THROW(classify(res), InvalidArgument);
}

TEST(Classify, WindowsStartAfterSettling) {
  auto res = synthetic::result([](double t) { return t < 0.5 ? 0.05 * std::sin(20.0 * t) : 0.0; });
  EXPECT_TRUE(classify(res).stable());
}

TEST(Classify, TooShortAfterIslanding) {
  auto res = synthetic::result([](double) { return 0.0; }, 3.0, 4.0);
  EXPECT_THROW(classify(res), InsufficientData);
}

TEST(Labels, Strings) {
  EXPECT_STREQ(to_string(Outcome::kStable), "Stable");
  EXPECT_STREQ(to_string(Outcome::kUnstable), "Unstable");
  EXPECT_STREQ(to_string(Reason::kGrowingOscillation), "GROWING_OSCILLATION");
}
