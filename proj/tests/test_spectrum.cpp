#include <adiaspec/spectrum.hpp>
#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"

using namespace adiaspec;

namespace {

const BandModel &twogap() {
  static BandModel m = snap_to_unit_period(build_finite_gap_model(oracle::twogap_edges), oracle::twogap_bounds);
  return m;
}

ProfileFn affine(double a, double b) {
  return [=](double E) {
    ActionProfile p;
    p.E = E;
    p.Phipi = a + b * E;
    p.dPhipi = b;
    p.Phi0 = 3 - b * E;
    p.dPhi0 = -b;
    p.Sh = p.Sv0 = p.Svpi = 1;
    return p;
  };
}

} // namespace

TEST(Ladder, AffinePhaseInvertsExactly) {
  double a = 0.3, b = 0.7, eps = 0.013;
  auto L = quantization_ladder(affine(a, b), 1, 2, eps, Nu::pi);
  ASSERT_FALSE(L.points.empty());
  for (auto &p : L.points) EXPECT_NEAR(p.E, (eps * (oracle::PI / 2 + oracle::PI * p.l) - a) / b, 1e-13);
  int expected = 0;
  for (int l = -100; l < 1000; ++l) {
    double E = (eps * (oracle::PI / 2 + oracle::PI * l) - a) / b;
    expected += E >= 1 && E <= 2;
  }
  EXPECT_EQ((int)L.points.size(), expected);
}

TEST(Ladder, TwoGapCountsResidualsAndOrientation) {
  const auto &m = twogap();
  auto fn = model_profile(m, 2, 1);
  double eps = 0.01;
  auto p0 = fn(4.9), p1 = fn(5.1);
  for (Nu nu : {Nu::pi, Nu::zero}) {
    auto L = quantization_ladder(fn, 4.9, 5.1, eps, nu);
    double dphi = nu == Nu::pi ? p1.Phipi - p0.Phipi : p0.Phi0 - p1.Phi0;
    EXPECT_NEAR((double)L.points.size(), dphi / (oracle::PI * eps), 1.0);
    for (auto &pt : L.points) {
      auto p = fn(pt.E);
      double phi = nu == Nu::pi ? p.Phipi : p.Phi0;
      EXPECT_LT(std::abs(phi - eps * (oracle::PI / 2 + oracle::PI * pt.l)), 1e-12);
    }
    for (size_t i = 1; i < L.points.size(); ++i) {
      EXPECT_GT(L.points[i].E, L.points[i - 1].E);
      if (nu == Nu::zero) EXPECT_LT(L.points[i].l, L.points[i - 1].l);
      else EXPECT_GT(L.points[i].l, L.points[i - 1].l);
    }
  }
}

TEST(Delta0, Examples) {
  std::vector<ActionProfile> g(5);
  for (auto &p : g) p.Sh = 3, p.Sv0 = 2, p.Svpi = 4;
  EXPECT_DOUBLE_EQ(delta0(g), 1.0);
  auto fn = model_profile(twogap(), 2, 1);
  double a = delta0(fn, 4.9, 5.1, 33), b = delta0(fn, 4.9, 5.1, 65);
  EXPECT_GT(a, 0);
  EXPECT_NEAR(a, b, 1e-6);
  auto p = fn(5.0);
  EXPECT_DOUBLE_EQ(delta0(fn, 5.0, 5.0, 1), 0.5 * std::min({p.Sh, p.Sv0, p.Svpi}));
}

TEST(Resonance, Synthetic) {
  EnergyLadder a, b;
  for (int i = 0; i < 10; ++i) {
    a.points.push_back({i, 0.01 * i, 0});
    b.points.push_back({i, 0.01 * i + 0.005, 0});
  }
  double eps = 0.01;
  auto f = classify_resonances(b, a, eps, 20 * eps);
  for (bool x : f.pi) EXPECT_FALSE(x);
  for (bool x : f.zero) EXPECT_FALSE(x);
  b.points[3].E = a.points[3].E;
  f = classify_resonances(b, a, eps, 20 * eps);
  EXPECT_TRUE(f.pi[3]);
  EXPECT_TRUE(f.zero[3]);
  EXPECT_EQ(std::count(f.pi.begin(), f.pi.end(), true), 1);
}

TEST(Resonance, EngineeredEpsilonDetected) {
  // Phi_pi(E*) / Phi_0(E*) = 1/7 makes the l=0 pi point and the m=3 zero
  // point coincide at eps = Phi_pi(E*) / (pi/2)
  const auto &m = twogap();
  auto fn = model_profile(m, 2, 1);
  auto R = [&](double E) {
    auto p = fn(E);
    return p.Phipi / p.Phi0 - 1.0 / 7;
  };
  double lo = 4.9, hi = 5.1;
  ASSERT_LT(R(lo) * R(hi), 0);
  for (int i = 0; i < 80; ++i) {
    double mid = 0.5 * (lo + hi);
    (R(mid) * R(lo) > 0 ? lo : hi) = mid;
  }
  double Es = 0.5 * (lo + hi), eps = fn(Es).Phipi / (oracle::PI / 2);
  auto cat = spectrum_catalog(m, 2, 1, Es - 0.02, Es + 0.02, eps);
  int hits = 0;
  for (auto &e : cat.entries)
    if (e.resonant && std::abs(e.E - Es) < 1e-6) ++hits;
  EXPECT_EQ(hits, 2);
}

TEST(Resonance, LaddersApproachEachOtherUnderEpsScan) {
  const auto &m = twogap();
  auto fn = model_profile(m, 2, 1);
  ProfileCache cache(fn, 4.88, 5.12);
  ProfileFn c = [&](double E) { return cache(E); };
  double best = inf;
  for (int i = 0; i < 400; ++i) {
    double eps = 0.03 + 0.03 * i / 400;
    auto Lp = quantization_ladder(c, 4.9, 5.1, eps, Nu::pi), L0 = quantization_ladder(c, 4.9, 5.1, eps, Nu::zero);
    double d = inf;
    for (auto &p : Lp.points) d = std::min(d, dist_to(L0, p.E));
    best = std::min(best, d / eps);
  }
  EXPECT_LT(best, 0.1);
}

TEST(Cache, MatchesExactProfile) {
  auto fn = model_profile(twogap(), 2, 1);
  ProfileCache c(fn, 4.9, 5.1);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(4.9, 5.1);
  for (int i = 0; i < 20; ++i) {
    double E = U(rng);
    auto a = c(E), b = fn(E);
    EXPECT_NEAR(a.Phipi, b.Phipi, 1e-8);
    EXPECT_NEAR(a.Sh, b.Sh, 1e-8);
    EXPECT_NEAR(a.dPhi0, b.dPhi0, 1e-7);
  }
}

TEST(Refine, TanZeroGivesNoShift) {
  IntervalEntry e;
  e.nu = Nu::pi;
  e.E = 1;
  e.profile.Phi0 = 0;
  e.profile.dPhipi = 1;
  e.profile.Sh = 1;
  e.profile.Svpi = 1;
  refine_entry(e, 0.1, 1);
  EXPECT_EQ(e.shift, 0);
  EXPECT_EQ(e.center, 1);
}

TEST(Refine, TwoGapSignLawBoundAndTrigBracket) {
  const auto &m = twogap();
  for (double eps : {0.05, 0.02}) {
    auto cat = spectrum_catalog(m, 2, 1, 4.9, 5.1, eps);
    int nonres = 0;
    for (auto &e : cat.entries) {
      if (e.resonant) continue;
      ++nonres;
      const auto &p = e.profile;
      double other = e.nu == Nu::pi ? p.Phi0 : p.Phipi;
      double t = std::tan(other / eps);
      int expect = e.nu == Nu::pi ? (t > 0 ? 1 : -1) : (t > 0 ? -1 : 1);
      EXPECT_EQ(e.shift > 0 ? 1 : -1, expect) << "E=" << e.E;
      EXPECT_LT(std::abs(e.shift) + std::exp(e.log_length), 100 * eps * std::exp(-cat.delta0 / eps));
      // (2/pi) d <= |cos x| <= d, d = distance of x to pi/2 + pi Z
      double x = other / eps;
      double d = std::abs(std::remainder(x - oracle::PI / 2, oracle::PI));
      EXPECT_LE(2 / oracle::PI * d, std::abs(std::cos(x)) * (1 + 1e-12));
      EXPECT_LE(std::abs(std::cos(x)), d * (1 + 1e-12));
    }
    EXPECT_GT(nonres, 0);
    EXPECT_DOUBLE_EQ(cat.dos_increment(), eps / (2 * oracle::PI));
  }
}

TEST(Coupling, Examples) {
  EXPECT_EQ(log_lambda_coupling(-1, -2, 0), -inf);
  EXPECT_DOUBLE_EQ(log_lambda_coupling(-3, -3, 0.25), std::log(0.25));
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> U(0, 1);
  for (int i = 0; i < 100; ++i) {
    double tv = -50 * U(rng), th = -50 * U(rng), d = 1e-3 + U(rng);
    EXPECT_NEAR(log_lambda_coupling(tv, th, d), tv - th + std::log(d), 1e-12);
  }
}

TEST(Lyapunov, AsymptoticExamples) {
  EXPECT_EQ(lyapunov_asymptotic(0.5, 0.1), 0);
  EXPECT_EQ(lyapunov_asymptotic(1.0, 0.1), 0);
  double eps = 0.03;
  EXPECT_NEAR(lyapunov_asymptotic_log(10 / eps, eps), 10 / (2 * oracle::PI), 1e-12);
  // log lambda = (S_h - S_v)/eps + log dist; dist = eps^N leaves only bookkeeping
  double Sh = 2, Sv = 0.5, N = 3, lg = (Sh - Sv) / eps + N * std::log(eps);
  double th = lyapunov_asymptotic_log(lg, eps);
  EXPECT_NEAR(th, (Sh - Sv) / (2 * oracle::PI), eps / (2 * oracle::PI) * N * std::abs(std::log(eps)) + 1e-12);
}

TEST(Classify, Examples) {
  double c = 0.05, eps = 0.02;
  EXPECT_EQ(classify_type(2 * c / eps, eps, c, false, true), SpectralType::singular);
  EXPECT_EQ(classify_type(-2 * c / eps, eps, c, true, true), SpectralType::ac_dominated);
  EXPECT_EQ(classify_type(-2 * c / eps, eps, c, false, true), SpectralType::undecided);
  EXPECT_EQ(classify_type(2 * c / eps, eps, c, true, false), SpectralType::undecided);
}

TEST(RegionMap, TwoGapZonesAndBoundary) {
  const auto &m = twogap();
  int NA = 40, NE = 40;
  auto r = region_map(m, linspace(1.5, 6.05, NA), linspace(3.43, 7.98, NE), 2);
  ASSERT_EQ((int)r.cells.size(), NA * NE);
  std::set<ZoneLabel> seen;
  double dE = 4.55 / (NE - 1);
  for (int i = 0; i < NA; ++i) {
    double a = r.alphas[i];
    double first = inf, last = -inf;
    for (int j = 0; j < NE; ++j) {
      auto &c = r.at(i, j);
      ASSERT_NE(c.label, ZoneLabel::invalid) << c.error;
      if (!c.window.tibm_ok) continue;
      EXPECT_TRUE(c.window.T_ok);
      EXPECT_EQ(c.label, zone_of(c.profile.Sh, c.profile.Sv0, c.profile.Svpi));
      seen.insert(c.label);
      first = std::min(first, c.E);
      last = std::max(last, c.E);
    }
    double lo = std::max(m.edge(1) + a, m.edge(3) - a), hi = std::min(m.edge(2) + a, m.edge(4) - a);
    if (hi - lo < 2 * dE) continue;
    EXPECT_LE(std::abs(first - lo), dE) << "alpha=" << a;
    EXPECT_LE(std::abs(last - hi), dE) << "alpha=" << a;
  }
  EXPECT_TRUE(seen.count(ZoneLabel::sv0_sh_svpi));
  EXPECT_TRUE(seen.count(ZoneLabel::svpi_sh_sv0));
}
