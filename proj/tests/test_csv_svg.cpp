#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "mghc/csv.hpp"
#include "mghc/svg.hpp"

using namespace mghc;

namespace {

Timeseries short_run() {
  SimConfig c;
  c.t_end_s = 3.5;
  c.diesel_initial = DieselStatus::kOff;
  c.pv_fraction = 0.2;
  Timeseries ts = to_timeseries(run(c));
  ts.footer = {"verdict: Stable NONE", "parameter_set: fnv1a64:0123456789abcdef"};
  return ts;
}

}  // namespace

TEST(Csv, FormatRoundTripsAwkwardDoubles) {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0, -0.0,
                   std::numeric_limits<double>::denorm_min(), std::numeric_limits<double>::max()}) {
    double back = 1.0;
    ASSERT_TRUE(parse_double(format_double(v), back)) << format_double(v);
    EXPECT_EQ(std::signbit(back), std::signbit(v));
    EXPECT_EQ(back, v);
  }
  double x = 0.0;
  EXPECT_TRUE(parse_double("+1.5", x));
  EXPECT_EQ(x, 1.5);
  EXPECT_FALSE(parse_double("1.5x", x));
  EXPECT_FALSE(parse_double("", x));
}

TEST(Csv, RunRoundTripsBitExact) {
  const Timeseries a = short_run();
  const std::string text = render_csv(a);
  const Timeseries b = parse_csv(text);
  EXPECT_EQ(a.names, b.names);
  EXPECT_EQ(a.time, b.time);
  EXPECT_EQ(a.columns, b.columns);
  EXPECT_EQ(a.footer, b.footer);
  EXPECT_EQ(render_csv(b), text);
  EXPECT_EQ(text.rfind("t,gen_p_mw", 0), 0u);
}

TEST(Csv, DiagnosticChannelsAreNotExported) {
  const Timeseries a = short_run();
  EXPECT_FALSE(a.has(channel::kLoadP));
  EXPECT_FALSE(a.has(channel::kPllHz));
  EXPECT_TRUE(a.has("bus104_p_mw"));
}

TEST(Csv, MalformedRowNamesTheRow) {
  try {
    parse_csv("t,a,b\n0,1,2\n0.1,1\n");
    FAIL() << "no error";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("row 2"), std::string::npos) << e.what();
    EXPECT_EQ(e.line(), 3);
  }
  try {
    parse_csv("t,a\n0,1\n0.1,nan?\n");
    FAIL() << "no error";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("column 'a'"), std::string::npos) << e.what();
  }
  EXPECT_THROW(parse_csv(""), ParseError);
  EXPECT_THROW(parse_csv("x,a\n"), ParseError);
}

TEST(Svg, DeterministicAndComplete) {
  const Timeseries ts = short_run();
  const std::string a = render_svg(ts);
  const std::string b = render_svg(parse_csv(render_csv(ts)));
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.rfind("<svg", 0), 0u);
  EXPECT_NE(a.find("</svg>"), std::string::npos);
  for (const char* title : {"Genset real power", "Genset reactive power", "Genset speed", "Genset torque",
                            "PV power", "Bus 104 power"}) {
    EXPECT_NE(a.find(title), std::string::npos) << title;
  }
}

TEST(Svg, MissingColumnIsNamed) {
  Timeseries ts = short_run();
  ts.names.erase(ts.names.begin());
  ts.columns.erase(ts.columns.begin());
  try {
    render_svg(ts);
    FAIL() << "no error";
  } catch (const InvalidArgument& e) {
    EXPECT_NE(std::string(e.what()).find("gen_p_mw"), std::string::npos);
  }
}
