// acceptance runner: `acceptance [ids...]`, one PASS/FAIL line per criterion,
// exit status 1 if any selected criterion fails
#include <adiaspec/adiaspec.hpp>

#include <chrono>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>

#include "oracles.hpp"

using namespace adiaspec;

namespace {

struct Verdict {
  bool pass = true;
  std::string detail;
  void fail(const std::string &why) {
    if (pass) detail = why + (detail.empty() ? "" : "; " + detail);
    pass = false;
  }
};

std::string fmt(const char *f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char *f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

const BandModel &twogap() {
  static BandModel m = snap_to_unit_period(build_finite_gap_model(oracle::twogap_edges), oracle::twogap_bounds);
  return m;
}

const double h_golden = (std::sqrt(5.0) - 1) / 2;

// ---------------------------------------------------------------------- 1
Verdict region() {
  Verdict v;
  auto t0 = std::chrono::steady_clock::now();
  // bounding box of the TIBM region for n = 1
  auto r = region_map(twogap(), linspace(1.5, 6.05, 100), linspace(3.43, 7.98, 100));
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  int valid = 0, T_bad = 0, invalid = 0;
  std::map<ZoneLabel, int> zones;
  for (auto &c : r.cells) {
    if (!c.window.tibm_ok) continue;
    ++valid;
    if (c.label == ZoneLabel::invalid) {
      ++invalid;
      continue;
    }
    if (!c.window.T_ok) ++T_bad;
    ++zones[c.label];
  }
  v.detail = fmt("%d TIBM cells, (T) fails at %d, %d errors; zones Sv0<Sh<Svpi=%d Svpi<Sh<Sv0=%d Sh>max=%d Sh<min=%d; %.1f s",
                 valid, T_bad, invalid, zones[ZoneLabel::sv0_sh_svpi], zones[ZoneLabel::svpi_sh_sv0],
                 zones[ZoneLabel::sh_above], zones[ZoneLabel::sh_below], secs);
  if (valid == 0) v.fail("empty region");
  if (T_bad || invalid) v.fail("(T) not satisfied everywhere");
  for (auto z : {ZoneLabel::sv0_sh_svpi, ZoneLabel::svpi_sh_sv0, ZoneLabel::sh_above, ZoneLabel::sh_below})
    if (!zones[z]) v.fail(std::string("zone ") + to_string(z) + " empty");
  if (secs > 300) v.fail("over 5 minutes");
  return v;
}

// ---------------------------------------------------------------------- 2
Verdict identities() {
  Verdict v;
  const auto &m = twogap();
  std::mt19937_64 g(2024);
  std::uniform_real_distribution<double> A(1.5, 6.05), E(3.43, 7.98);
  int done = 0, tries = 0;
  double worst_parity = 0, min_action = inf;
  int sign_bad = 0;
  while (done < 200 && tries < 100000) {
    ++tries;
    double a = A(g), e = E(g);
    auto w = check_tibm(m, e, a);
    if (!w.tibm_ok) continue;
    double margin = *std::min_element(w.margins.begin(), w.margins.end());
    if (margin < 1e-6) continue;
    ++done;
    auto p = action_profile(m, e, a, w.n);
    worst_parity = std::max(worst_parity, std::abs(p.Sh0 - p.Shpi));
    min_action = std::min({min_action, p.Phi0, p.Phipi, p.Sh, p.Sv0, p.Svpi});
    // central differences of the phases themselves
    double d = std::min(1e-5, 0.25 * margin);
    auto lo = action_profile(m, e - d, a, w.n), hi = action_profile(m, e + d, a, w.n);
    double d0 = (hi.Phi0 - lo.Phi0) / (2 * d), dpi = (hi.Phipi - lo.Phipi) / (2 * d);
    if (!(d0 < 0 && dpi > 0)) ++sign_bad;
  }
  v.detail = fmt("%d points: max|Sh0-Shpi|=%.2e, min action=%.3e, derivative sign violations=%d", done,
                 worst_parity, min_action, sign_bad);
  if (done < 200) v.fail("could not sample 200 points");
  if (!(worst_parity < 1e-8)) v.fail("parity");
  if (!(min_action > 0)) v.fail("non-positive action");
  if (sign_bad) v.fail("derivative signs");
  return v;
}

// ---------------------------------------------------------------------- 3
Verdict band_oracle() {
  Verdict v;
  const auto &m = twogap();
  double worst_inc = 0, worst_re = 0;
  int turns_bad = 0;
  for (int j = 1; j <= m.genus(); ++j) {
    worst_inc = std::max(worst_inc, std::abs(band_increment(m, j) - oracle::PI));
    worst_inc = std::max(worst_inc, std::abs(oracle::band_integral(m.edges, m.lambda, j) - oracle::PI));
  }
  for (int n = 1; n <= m.genus(); ++n) {
    double a = m.edge(2 * n), b = m.edge(2 * n + 1);
    std::vector<double> im;
    for (int i = 1; i <= 2000; ++i) {
      auto k = kp(m, a + (b - a) * i / 2001.0);
      worst_re = std::max(worst_re, std::abs(k.real() - oracle::PI * n));
      im.push_back(k.imag());
    }
    int turns = 0;
    for (size_t i = 2; i < im.size(); ++i)
      if ((im[i] - im[i - 1]) * (im[i - 1] - im[i - 2]) < 0) ++turns;
    if (turns != 1) ++turns_bad;
  }
  v.detail = fmt("max|int dk - pi|=%.2e (library and oracle), max|Re k - n pi| on gaps=%.2e, non-unimodal gaps=%d",
                 worst_inc, worst_re, turns_bad);
  if (!(worst_inc < 1e-8)) v.fail("band increments");
  if (!(worst_re < 1e-10)) v.fail("Re k on gaps");
  if (turns_bad) v.fail("Im k not unimodal");
  return v;
}

// ---------------------------------------------------------------------- 4
Verdict theta() {
  Verdict v;
  std::string d;
  for (double A : {0.1, 0.5}) {
    auto m = build_ode_model({{1, A}}, 1e-12, 60);
    double gw = m.edge(3) - m.edge(2);
    auto p = compute_theta_n(m, 1), a = compute_theta_n(m, 1, 0.5 * gw), b = compute_theta_n(m, 1, 0.25 * gw);
    double radius = std::abs(a.l - b.l);
    d += fmt("A=%.1f: theta=%.9f |Im l|=%.1e Lambda-1=%.1e radius change=%.1e; ", A, p.theta, p.err, p.Lambda - 1,
             radius);
    if (!(p.theta > 0) || !(p.err < 1e-4)) v.fail(fmt("theta not real-positive at A=%.1f", A));
    if (!(p.Lambda >= 1 - 1e-9)) v.fail(fmt("Lambda < 1 at A=%.1f", A));
    if (!(radius < 1e-6)) v.fail(fmt("contour dependence at A=%.1f", A));
  }
  v.detail += d;
  return v;
}

// ---------------------------------------------------------------------- 5
Verdict ladders() {
  Verdict v;
  const auto &m = twogap();
  std::string d;
  for (double eps : {0.05, 0.02}) {
    auto cat = spectrum_catalog(m, 2, 1, 4.9, 5.1, eps);
    double worst_res = 0, C = 1;
    for (auto *L : {&cat.ladderpi, &cat.ladder0}) {
      for (auto &pt : L->points) {
        // recomputed from a fresh profile, not the stored residual
        auto p = action_profile(m, pt.E, 2, 1);
        double phi = L->nu == Nu::pi ? p.Phipi : p.Phi0;
        worst_res = std::max(worst_res, std::abs(phi - eps * (oracle::PI / 2 + oracle::PI * pt.l)));
      }
      for (size_t i = 1; i < L->points.size(); ++i) {
        double s = (L->points[i].E - L->points[i - 1].E) / eps;
        C = std::max({C, s, 1 / s});
      }
    }
    int nonres = 0, sign_bad = 0, bound_bad = 0;
    for (auto &e : cat.entries) {
      if (e.resonant) continue;
      ++nonres;
      double other = e.nu == Nu::pi ? e.profile.Phi0 : e.profile.Phipi;
      double t = std::tan(other / eps);
      // type 0 mirrors the pi law with the roles of the phases swapped
      int expect = e.nu == Nu::pi ? (t > 0 ? 1 : -1) : (t > 0 ? -1 : 1);
      if ((e.shift > 0 ? 1 : -1) != expect) ++sign_bad;
      if (!(std::abs(e.shift) + std::exp(e.log_length) < 100 * eps * std::exp(-cat.delta0 / eps))) ++bound_bad;
    }
    d += fmt("eps=%.2f: %zu+%zu ladder points, max residual=%.1e, C=%.2f, %d non-resonant, sign violations=%d, "
             "bound violations=%d; ",
             eps, cat.ladderpi.points.size(), cat.ladder0.points.size(), worst_res, C, nonres, sign_bad, bound_bad);
    if (!(worst_res < 1e-12)) v.fail("ladder residual");
    if (!(C < 10)) v.fail("spacing constant");
    if (nonres == 0) v.fail("no non-resonant points");
    if (sign_bad) v.fail("repulsion sign law");
    if (bound_bad) v.fail("interval bound");
  }
  v.detail += d;
  return v;
}

// ---------------------------------------------------------------------- 6
// real SL(2) with M12 in [0.5, 3.5], bounded away from 0 as the N cocycle needs
std::function<Mat2(double)> random_sl2(std::mt19937_64 &g) {
  std::uniform_real_distribution<double> U(-1, 1);
  double a1 = U(g), a2 = U(g), b1 = 2 + U(g), c1 = U(g);
  return [=](double z) {
    double m11 = a1 + 1.5 * std::cos(2 * oracle::PI * z), m12 = b1 + 0.5 * std::cos(2 * oracle::PI * z + c1),
           m22 = a2 + std::sin(2 * oracle::PI * z);
    return Mat2{m11, m12, (m11 * m22 - 1) / m12, m22};
  };
}

Verdict cocycles() {
  Verdict v;
  std::mt19937_64 g(606);
  std::uniform_real_distribution<double> U(0, 1);
  int bad = 0;
  double worst = 0;
  for (int t = 0; t < 20; ++t) {
    auto M = random_sl2(g);
    auto N = build_N(M, h_golden);
    double z0 = U(g);
    auto x = cocycle_lyapunov(M, h_golden, z0, 200000), y = cocycle_lyapunov(N.M, h_golden, z0, 200000);
    double s = std::abs(x.estimate - y.estimate) / std::hypot(x.stderr_, y.stderr_);
    worst = std::max(worst, s);
    if (!(s <= 3)) ++bad;
  }
  double c = cocycle_lyapunov([](double) { return Mat2{2, 0, 0, 0.5}; }, h_golden, 0.1, 100000).estimate;
  double th = 2 * oracle::PI * 0.3;
  double r = cocycle_lyapunov([=](double) { return Mat2{std::cos(th), -std::sin(th), std::sin(th), std::cos(th)}; },
                              h_golden, 0.1, 100000)
                 .estimate;
  v.detail = fmt("20 cocycles: worst |theta_M - theta_N| = %.2f block SE, failures=%d; constant diag(2,1/2) "
                 "error=%.1e, rotation=%.1e",
                 worst, bad, std::abs(c - std::log(2.0)), std::abs(r));
  if (bad) v.fail("M/N disagreement");
  if (!(std::abs(c - std::log(2.0)) < 1e-6)) v.fail("constant cocycle");
  if (!(std::abs(r) < 1e-6)) v.fail("rotation cocycle");
  return v;
}

// ---------------------------------------------------------------------- 7
Verdict continued_fraction() {
  Verdict v;
  std::mt19937_64 g(77);
  std::uniform_real_distribution<double> U(0, 1);
  int violations = 0, unconverged = 0;
  double tightest = 0;
  for (int t = 0; t < 100; ++t) {
    // v = v0 + v1 e(z): min|v| = |v0| - |v1| exactly; rho = r0 (1 + 0.3 cos) e^{i ph}: max|rho| = 1.3 r0
    cplx v0 = std::polar(1 + 4 * U(g), 2 * oracle::PI * U(g));
    cplx v1 = std::polar(0.6 * std::abs(v0) * U(g), 2 * oracle::PI * U(g));
    double mv = std::abs(v0) - std::abs(v1);
    double r0 = 0.95 * (mv * mv / 4) / 1.3 * U(g), ph = U(g);
    auto vf = [=](double z) { return v0 + v1 * std::exp(cplx(0, 2 * oracle::PI * z)); };
    auto rf = [=](double z) {
      return r0 * (1 + 0.3 * std::cos(2 * oracle::PI * (z + ph))) * std::exp(cplx(0, 2 * oracle::PI * ph));
    };
    double hm = mv / 2, bound = hm - std::sqrt(hm * hm - 1.3 * r0);
    double h = U(g);
    for (double z : {0.0, 0.37, 0.81}) {
      auto r = continued_fraction_G(rf, vf, h, z);
      if (!r.converged) ++unconverged;
      double dev = std::abs(r.value - vf(z));
      if (!(dev <= bound * (1 + 1e-12) + 1e-15)) ++violations;
      if (bound > 0) tightest = std::max(tightest, dev / bound);
    }
  }
  auto zero = continued_fraction_G([](double) { return cplx(0); }, [](double z) { return cplx(3 + std::cos(z), 1); },
                                   h_golden, 0.3);
  bool exact = zero.value == cplx(3 + std::cos(0.3), 1);
  v.detail = fmt("100 pairs x 3 points: violations=%d, unconverged=%d, max |G-v|/bound=%.3f; rho=0 exact=%s", violations,
                 unconverged, tightest, exact ? "yes" : "no");
  if (violations) v.fail("bound violated");
  if (unconverged) v.fail("not converged");
  if (!exact) v.fail("rho=0 case");
  return v;
}

// ---------------------------------------------------------------------- 8
Verdict lyapunov_asymptotics() {
  Verdict v;
  // the finite-gap V behind the printed edges is not available, so a deep
  // cosine with the same two-gap proportions stands in for it
  auto m = build_ode_model({{1, 16.0}}, 1e-12, 120);
  const double alpha = 19.31;
  std::vector<double> rel;
  std::string d;
  for (double eps : {0.05, 0.03, 0.02}) {
    auto cat = spectrum_catalog(m, alpha, 1, 18.95, 19.25, eps);
    const IntervalEntry *best = nullptr;
    for (auto &e : cat.entries)
      if (e.nu == Nu::pi && (!best || e.dist > best->dist)) best = &e;
    if (!best) {
      v.fail(fmt("no pi point at eps=%.2f", eps));
      return v;
    }
    double margin = eps * best->log_lambda;
    double pred = (best->profile.Sh - best->profile.Svpi) / (2 * oracle::PI);
    QuasiPeriodic H{{{1, 16.0}}, alpha, eps, 0.1};
    SimOptions o;
    o.steps_per_unit = 128;
    auto r = schrodinger_lyapunov_avg(H, best->center, 150 * 2 * oracle::PI / eps, 8, o);
    double e_rel = std::abs(r.estimate - pred) / pred;
    rel.push_back(e_rel);
    d += fmt("eps=%.2f E=%.6f eps*log(lambda)=%.3f sim=%.5f+-%.5f pred=%.5f rel=%.5f; ", eps, best->center, margin,
             r.estimate, r.stderr_, pred, e_rel);
    if (!(margin > 0.2)) v.fail(fmt("no clear margin at eps=%.2f", eps));
  }
  v.detail += d;
  if (!(rel.back() < 0.25)) v.fail("relative error at eps=0.02");
  for (size_t i = 1; i < rel.size(); ++i)
    if (!(rel[i] <= rel[i - 1])) v.fail("relative error increases");
  return v;
}

// ---------------------------------------------------------------------- 9
Verdict dos_increment() {
  Verdict v;
  auto m = build_ode_model({{1, 20.0}}, 1e-12, 120);
  const double alpha = 17.869, eps = 0.1;
  auto cat = spectrum_catalog(m, alpha, 1, 14.3, 15.8, eps);
  std::vector<double> all;
  for (auto *L : {&cat.ladder0, &cat.ladderpi})
    for (auto &p : L->points) all.push_back(p.E);
  QuasiPeriodic H{{{1, 20.0}}, alpha, eps, 0};
  double L = 50 * 2 * oracle::PI / eps, want = eps / (2 * oracle::PI);
  int checked = 0, bad = 0;
  std::string d;
  for (auto &e : cat.entries) {
    if (e.resonant) continue;
    double gap = inf;
    for (double x : all)
      if (x != e.E) gap = std::min(gap, std::abs(x - e.E));
    double lo = e.center - gap / 2, hi = e.center + gap / 2;
    long cnt = ids_dirichlet(H, hi, L, 128).count - ids_dirichlet(H, lo, L, 128).count;
    double ratio = cnt / (2 * L) / want;
    ++checked;
    if (!(std::abs(ratio - 1) < 0.3)) ++bad;
    d += fmt("E=%.4f count=%ld ratio=%.3f; ", e.center, cnt, ratio);
  }
  v.detail = fmt("delta0=%.4f, %d non-resonant intervals: ", cat.delta0, checked) + d;
  if (checked == 0) v.fail("no non-resonant interval");
  if (bad) v.fail("DOS mass off by more than 30%");
  return v;
}

// --------------------------------------------------------------------- 10
// brute force ||k x|| >= a e^{-b/eps} / k^2 for k <= K in long double
bool member_brute(double eps, double a, double b, int K) {
  long double x = 2 * 3.141592653589793238462643383279502884L / (long double)eps;
  long double c = a * std::exp(-(long double)b / eps);
  for (int k = 1; k <= K; ++k) {
    long double y = k * x;
    long double d = std::fabs(y - std::nearbyint(y));
    if (d < c / ((long double)k * k)) return false;
  }
  return true;
}

Verdict diophantine() {
  Verdict v;
  std::vector<double> frac;
  int disagree = 0;
  std::string d;
  for (double e : {0.3, 0.1, 0.05, 0.02}) {
    int c = 0;
    for (int i = 0; i < 200; ++i) {
      double eps = e * (1 + 0.1 * (i + 0.5) / 200);
      c += diophantine_member(eps, 1, 0.1).member;
      if (i % 10 == 0 && diophantine_member(eps, 1, 0.1, 1e4).member != member_brute(eps, 1, 0.1, 10000)) ++disagree;
    }
    frac.push_back(c / 200.0);
    d += fmt("eps~%.2f: %.3f; ", e, frac.back());
  }
  int rational_ok = 0;
  for (auto pq : {std::pair{7, 3}, std::pair{22, 7}, std::pair{355, 113}}) {
    auto r = diophantine_member_x(Big(pq.first) / Big(pq.second), 0.1, 1e-3, 0.1);
    if (!r.member && r.worst_k == pq.second) ++rational_ok;
  }
  v.detail = "member fraction (a=1, b=0.1) " + d +
             fmt("brute-force disagreements=%d, rational x rejected at k=q: %d/3", disagree, rational_ok);
  for (size_t i = 1; i < frac.size(); ++i)
    if (!(frac[i] >= frac[i - 1])) v.fail("fraction not increasing");
  if (!(frac.back() > frac.front())) v.fail("no trend");
  if (disagree) v.fail("brute-force mismatch");
  if (rational_ok != 3) v.fail("rational counterexample accepted");
  return v;
}

} // namespace

int main(int argc, char **argv) {
  std::map<int, std::pair<const char *, std::function<Verdict()>>> all = {
      {1, {"region reproduction", region}},
      {2, {"action identities", identities}},
      {3, {"band-structure oracle", band_oracle}},
      {4, {"theta_n / Lambda_n", theta}},
      {5, {"ladder / interval structure", ladders}},
      {6, {"cocycle equivalence", cocycles}},
      {7, {"continued fraction bound", continued_fraction}},
      {8, {"asymptotic Lyapunov cross-check", lyapunov_asymptotics}},
      {9, {"DOS increment", dos_increment}},
      {10, {"Diophantine set", diophantine}},
  };
  std::set<int> pick;
  for (int i = 1; i < argc; ++i) pick.insert(std::atoi(argv[i]));
  if (pick.empty())
    for (auto &[k, _] : all) pick.insert(k);
  int failed = 0;
  for (int k : pick) {
    auto it = all.find(k);
    if (it == all.end()) {
      std::printf("criterion %d: FAIL unknown criterion\n", k);
      ++failed;
      continue;
    }
    Verdict v;
    auto t0 = std::chrono::steady_clock::now();
    try {
      v = it->second.second();
    } catch (const std::exception &e) {
      v.fail(std::string("exception: ") + e.what());
    }
    double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("criterion %d (%s): %s [%.1fs] %s\n", k, it->second.first, v.pass ? "PASS" : "FAIL", s,
                v.detail.c_str());
    std::fflush(stdout);
    failed += !v.pass;
  }
  return failed ? 1 : 0;
}
