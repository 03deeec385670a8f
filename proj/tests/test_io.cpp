#include <adiaspec/io.hpp>
#include <gtest/gtest.h>

#include <regex>
#include <sstream>

#include "oracles.hpp"

using namespace adiaspec;
using namespace adiaspec::io;

namespace {

Config parse(const std::string &s) {
  std::istringstream in(s);
  return Config::parse(in, "t.cfg");
}

std::string error_of(const std::string &s) {
  try {
    parse(s);
  } catch (const Error &e) {
    return e.what();
  }
  return "";
}

// crude XML balance check: every <tag> closed in order, self-closing allowed
bool balanced_xml(const std::string &s, int &elements) {
  std::vector<std::string> stack;
  elements = 0;
  std::regex tag(R"(<(/?)([A-Za-z]+)[^>]*?(/?)>)");
  for (auto it = std::sregex_iterator(s.begin(), s.end(), tag); it != std::sregex_iterator(); ++it) {
    auto &m = *it;
    ++elements;
    if (m[1] == "/") {
      if (stack.empty() || stack.back() != m[2]) return false;
      stack.pop_back();
    } else if (m[3] != "/") {
      stack.push_back(m[2]);
    }
  }
  return stack.empty();
}

} // namespace

TEST(Config, SectionsArraysAndComments) {
  auto c = parse("# top\n"
                 "alpha = 2.5   # trailing\n"
                 "[potential]\n"
                 "cos = [[1, 16.0],\n"
                 "       [2, 0.5]]\n"
                 "name = \"a # not a comment\"\n"
                 "[spectrum]\n"
                 "epsilon = [0.1, 0.05]\n"
                 "mode = pi\n"
                 "flag = true\n");
  EXPECT_EQ(c.as_arg("alpha"), "2.5");
  EXPECT_EQ(c.as_arg("potential.cos"), "1:16.0,2:0.5");
  EXPECT_EQ(c.at("potential.name").get<std::string>(), "a # not a comment");
  EXPECT_EQ(c.as_arg("spectrum.epsilon"), "0.1,0.05");
  EXPECT_EQ(c.as_arg("spectrum.mode"), "pi");
  EXPECT_EQ(c.as_arg("spectrum.flag"), "true");
  EXPECT_FALSE(c.has("epsilon"));
}

TEST(Config, ErrorsCarryLineNumbers) {
  EXPECT_NE(error_of("a = 1\nbogus line\n").find("t.cfg:2"), std::string::npos);
  EXPECT_NE(error_of("\n\n[oops\n").find("t.cfg:3"), std::string::npos);
  EXPECT_NE(error_of("x = [1, 2\n").find("unbalanced"), std::string::npos);
  EXPECT_NE(error_of("x = \"open\n").find("t.cfg:1"), std::string::npos);
  EXPECT_NE(error_of(" = 3\n").find("empty key"), std::string::npos);
  EXPECT_NE(error_of("x =\n").find("empty value"), std::string::npos);
  EXPECT_THROW(Config::load("/nonexistent/file.cfg"), Error);
}

TEST(Args, Ranges) {
  auto r = parse_range("1.5:6:10", true);
  EXPECT_DOUBLE_EQ(r.lo, 1.5);
  EXPECT_DOUBLE_EQ(r.hi, 6);
  EXPECT_EQ(r.steps, 10);
  auto v = r.values();
  ASSERT_EQ(v.size(), 10u);
  EXPECT_DOUBLE_EQ(v.front(), 1.5);
  EXPECT_DOUBLE_EQ(v.back(), 6);
  EXPECT_EQ(parse_range("2,3", false).steps, 1);
  EXPECT_THROW(parse_range("3:2:4", true), Error);
  EXPECT_THROW(parse_range("1:2:0", true), Error);
  EXPECT_THROW(parse_range("1:2:2.5", true), Error);
  EXPECT_THROW(parse_range("1:2", true), Error);
  EXPECT_THROW(parse_range("1:x", false), Error);
}

TEST(Args, Potential) {
  auto V = parse_potential("1:16,3:-0.25");
  ASSERT_EQ(V.size(), 2u);
  EXPECT_EQ(V[0].m, 1);
  EXPECT_DOUBLE_EQ(V[0].a, 16);
  EXPECT_EQ(V[1].m, 3);
  EXPECT_DOUBLE_EQ(V[1].a, -0.25);
  EXPECT_THROW(parse_potential("0:1"), Error);
  EXPECT_THROW(parse_potential("1.5:1"), Error);
  EXPECT_THROW(parse_potential("1"), Error);
}

TEST(Args, PrintedResolution) {
  auto r = printed_resolution({"0", "3.8571429", "6.8571429", "12.100395", "100.70923", "1.5e2", "7"});
  ASSERT_EQ(r.size(), 7u);
  for (size_t i = 0; i < 5; ++i) EXPECT_NEAR(r[i], oracle::twogap_bounds[i], 1e-20) << i;
  EXPECT_NEAR(r[5], 5, 1e-12);
  EXPECT_NEAR(r[6], 0.5, 1e-12);
}

TEST(Table, CsvHeaderUnitsAndQuoting) {
  Table t({{"E", "energy"}, {"log10_T", "log10"}, {"label", ""}, {"ok", ""}, {"n", ""}});
  t.add({5.0, -3.25, std::string("a,b"), true, 2L});
  t.add({0.1, -std::numeric_limits<double>::infinity(), std::string("say \"hi\""), false, 3L});
  EXPECT_THROW(t.add({1.0}), Error);
  std::ostringstream os;
  t.write_csv(os);
  EXPECT_EQ(os.str(), "E[energy],log10_T[log10],label,ok,n\n"
                      "5,-3.25,\"a,b\",1,2\n"
                      "0.1,-inf,\"say \"\"hi\"\"\",0,3\n");
}

TEST(Table, JsonCarriesUnitsAndNonFiniteAsText) {
  Table t({{"x", "1"}, {"y", ""}});
  t.add({1.5, std::string("p")});
  t.add({std::nan(""), std::string("q")});
  auto j = t.to_json();
  EXPECT_EQ(j["units"]["x"], "1");
  ASSERT_EQ(j["rows"].size(), 2u);
  EXPECT_DOUBLE_EQ(j["rows"][0]["x"].get<double>(), 1.5);
  EXPECT_EQ(j["rows"][1]["x"], "nan");
  // round trip through text stays valid JSON with the same keys in order
  auto back = json::parse(j.dump());
  EXPECT_EQ(back.dump(), j.dump());
}

TEST(Format, NumbersAreStable) {
  EXPECT_EQ(num(0.1), "0.1");
  EXPECT_EQ(num(1.0 / 3), "0.333333333333");
  EXPECT_EQ(num(1e-300), "1e-300");
  EXPECT_NEAR(log10_of_ln(std::log(1e-7)), -7, 1e-12);
}

TEST(Svg, RegionMapIsWellFormed) {
  auto m = snap_to_unit_period(build_finite_gap_model(oracle::twogap_edges), oracle::twogap_bounds);
  auto r = region_map(m, linspace(1.5, 6, 6), linspace(3.5, 8, 7));
  std::ostringstream os;
  write_region_svg(os, r);
  auto s = os.str();
  int elements = 0;
  EXPECT_TRUE(balanced_xml(s, elements));
  EXPECT_EQ(s.rfind("<svg", 0), 0u);
  // one rect per cell, plus background, frame and legend swatches
  std::regex cell(R"(<rect x=)");
  long rects = std::distance(std::sregex_iterator(s.begin(), s.end(), cell), std::sregex_iterator());
  EXPECT_GE(rects, 42);
  // every '<' opens a tag; legend text like Sv0<Sh must be escaped
  for (size_t i = s.find('<'); i != std::string::npos; i = s.find('<', i + 1))
    EXPECT_TRUE(std::isalpha((unsigned char)s[i + 1]) || s[i + 1] == '/') << s.substr(i, 20);
  EXPECT_NE(s.find("Sv0&lt;Sh&lt;Svpi"), std::string::npos);
  RegionMap empty;
  std::ostringstream o2;
  EXPECT_THROW(write_region_svg(o2, empty), Error);
}
