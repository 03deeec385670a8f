#pragma once
// Quantization ladders, localization intervals, resonance flags, Lyapunov
// asymptotics, spectral-type labels and (alpha, E) region maps.

#include "actions.hpp"

#include <algorithm>
#include <functional>
#include <thread>

namespace adiaspec {

using ProfileFn = std::function<ActionProfile(double)>;

inline ProfileFn model_profile(const BandModel &m, double alpha, int n, ActionOptions opt = {}) {
  return [&m, alpha, n, opt](double E) { return action_profile(m, E, alpha, n, opt); };
}

// ------------------------------------------------------ Chebyshev cache
// Barycentric interpolation on second-kind Chebyshev points; the degree is
// doubled (nodes are nested) until the interpolant matches the new nodes.
class ProfileCache {
public:
  static constexpr int F = 9; // Phi0 Phipi Sh0 Shpi Sh Sv0 Svpi dPhi0 dPhipi

  ProfileCache(ProfileFn fn, double a, double b, double tol = 1e-9, int max_degree = 512)
      : fn_(std::move(fn)), a_(a), b_(b) {
    if (!(b > a)) throw Error("profile cache: empty interval");
    int N = 8;
    sample(N);
    for (;;) {
      std::vector<std::array<double, F>> fresh;
      std::vector<double> xs;
      for (int j = 1; j < 2 * N; j += 2) {
        double x = node(j, 2 * N);
        xs.push_back(x);
        fresh.push_back(pack(fn_(x)));
      }
      double worst = 0;
      for (size_t i = 0; i < xs.size(); ++i) {
        auto v = eval(xs[i]);
        for (int f = 0; f < F; ++f)
          worst = std::max(worst, std::abs(v[f] - fresh[i][f]) / std::max(1.0, std::abs(fresh[i][f])));
      }
      // merge: the odd nodes of 2N interleave the N grid
      std::vector<std::array<double, F>> merged(2 * N + 1);
      for (int j = 0; j <= N; ++j) merged[2 * j] = values_[j];
      for (int j = 1, i = 0; j < 2 * N; j += 2, ++i) merged[j] = fresh[i];
      values_ = std::move(merged);
      N *= 2;
      residual_ = worst;
      if (worst < tol) break;
      if (N > max_degree) throw Error("profile cache: degree cap reached before the tolerance");
    }
    degree_ = N;
  }

  ActionProfile operator()(double E) const {
    auto v = eval(E);
    ActionProfile p;
    p.E = E;
    p.Phi0 = v[0], p.Phipi = v[1], p.Sh0 = v[2], p.Shpi = v[3], p.Sh = v[4];
    p.Sv0 = v[5], p.Svpi = v[6], p.dPhi0 = v[7], p.dPhipi = v[8];
    return p;
  }
  const ProfileFn &exact() const { return fn_; }
  int degree() const { return degree_; }
  double residual() const { return residual_; }
  double a() const { return a_; }
  double b() const { return b_; }

private:
  ProfileFn fn_;
  double a_, b_;
  int degree_ = 0;
  double residual_ = 0;
  std::vector<std::array<double, F>> values_;

  double node(int j, int N) const { return 0.5 * (a_ + b_) + 0.5 * (b_ - a_) * std::cos(pi * j / N); }
  static std::array<double, F> pack(const ActionProfile &p) {
    return {p.Phi0, p.Phipi, p.Sh0, p.Shpi, p.Sh, p.Sv0, p.Svpi, p.dPhi0, p.dPhipi};
  }
  void sample(int N) {
    values_.clear();
    for (int j = 0; j <= N; ++j) values_.push_back(pack(fn_(node(j, N))));
  }
  std::array<double, F> eval(double x) const {
    int N = (int)values_.size() - 1;
    std::array<double, F> num{};
    double den = 0;
    for (int j = 0; j <= N; ++j) {
      double xj = node(j, N);
      double w = (j % 2 ? -1.0 : 1.0) * ((j == 0 || j == N) ? 0.5 : 1.0);
      if (x == xj) return values_[j];
      double c = w / (x - xj);
      den += c;
      for (int f = 0; f < F; ++f) num[f] += c * values_[j][f];
    }
    for (auto &v : num) v /= den;
    return num;
  }
};

// ------------------------------------------------------------ ladders
struct LadderPoint {
  int l;
  double E;
  double residual; // Phi_nu(E) - eps (pi/2 + pi l), exact profile
};

struct EnergyLadder {
  Nu nu = Nu::pi;
  double eps = 0;
  double J0 = 0, J1 = 0;
  std::vector<LadderPoint> points; // sorted by E
};

namespace detail {
inline double phi_of(const ActionProfile &p, Nu nu) { return nu == Nu::pi ? p.Phipi : p.Phi0; }
inline double dphi_of(const ActionProfile &p, Nu nu) { return nu == Nu::pi ? p.dPhipi : p.dPhi0; }
} // namespace detail

// guess: optional cheap interpolant for bracketing; fn is the exact profile
inline EnergyLadder quantization_ladder(const ProfileFn &fn, double J0, double J1, double eps, Nu nu,
                                        const ProfileFn &guess = nullptr, int samples = 0) {
  if (!(eps > 0)) throw Error("ladder: epsilon must be positive");
  if (!(J1 > J0)) throw Error("ladder: empty interval");
  const ProfileFn &g = guess ? guess : fn;
  EnergyLadder L;
  L.nu = nu;
  L.eps = eps;
  L.J0 = J0;
  L.J1 = J1;
  if (samples <= 0) samples = guess ? 400 : 16;
  std::vector<double> xs(samples + 1), ph(samples + 1);
  for (int i = 0; i <= samples; ++i) {
    xs[i] = J0 + (J1 - J0) * i / samples;
    ph[i] = detail::phi_of(g(xs[i]), nu);
  }
  double s = ph.back() > ph.front() ? 1 : -1;
  for (int i = 0; i < samples; ++i)
    if (s * (ph[i + 1] - ph[i]) <= 0) throw Error("ladder: phase not strictly monotone on J");
  auto target = [&](int l) { return eps * (pi / 2 + pi * l); };
  double lo = std::min(ph.front(), ph.back()), hi = std::max(ph.front(), ph.back());
  int l0 = (int)std::ceil((lo / eps - pi / 2) / pi), l1 = (int)std::floor((hi / eps - pi / 2) / pi);
  for (int l = l0; l <= l1; ++l) {
    double t = target(l);
    if (t < lo || t > hi) continue;
    int i = 0;
    while (i + 1 < samples && s * (ph[i + 1] - t) < 0) ++i;
    // secant guess on the sample interval, then Newton / bisection on the exact phase
    double a = xs[i], b = xs[i + 1];
    double E = a + (b - a) * (t - ph[i]) / (ph[i + 1] - ph[i]);
    double res = 0;
    for (int it = 0; it < 60; ++it) {
      auto p = fn(E);
      res = detail::phi_of(p, nu) - t;
      if (std::abs(res) < 1e-13) break;
      if (s * res > 0) b = std::min(b, E);
      else a = std::max(a, E);
      double En = E - res / detail::dphi_of(p, nu);
      if (!(En > a && En < b)) En = 0.5 * (a + b);
      if (En == E) break;
      E = En;
    }
    if (E < J0 || E > J1) continue;
    L.points.push_back({l, E, res});
  }
  std::sort(L.points.begin(), L.points.end(), [](auto &x, auto &y) { return x.E < y.E; });
  return L;
}

// half the minimum over sampled profiles of the three tunneling actions
inline double delta0(const std::vector<ActionProfile> &grid) {
  if (grid.empty()) throw Error("delta0: empty grid");
  double m = inf;
  for (auto &p : grid) m = std::min({m, p.Sh, p.Sv0, p.Svpi});
  if (!(m > 0)) throw Error("delta0: non-positive action");
  return 0.5 * m;
}

inline double delta0(const ProfileFn &fn, double J0, double J1, int samples = 33) {
  std::vector<ActionProfile> g;
  for (int i = 0; i < samples; ++i) g.push_back(fn(samples == 1 ? J0 : J0 + (J1 - J0) * i / (samples - 1)));
  return delta0(g);
}

inline double dist_to(const EnergyLadder &L, double E) {
  double d = inf;
  for (auto &p : L.points) d = std::min(d, std::abs(E - p.E));
  return d;
}

struct ResonanceFlags {
  std::vector<bool> pi, zero;
};

// resonant iff the other ladder comes closer than 2 exp(-delta0/eps)
inline ResonanceFlags classify_resonances(const EnergyLadder &L0, const EnergyLadder &Lpi, double eps,
                                          double d0) {
  double thr = std::log(2.0) - d0 / eps;
  auto flag = [&](const EnergyLadder &self, const EnergyLadder &other) {
    std::vector<bool> f;
    for (auto &p : self.points) {
      double d = dist_to(other, p.E);
      f.push_back(d == 0 || std::log(d) < thr);
    }
    return f;
  };
  return {flag(Lpi, L0), flag(L0, Lpi)};
}

// log lambda = log t_v - log t_h + log dist
inline double log_lambda_coupling(double log_tv, double log_th, double dist) {
  if (dist == 0) return -inf;
  return log_tv - log_th + std::log(dist);
}

inline double lyapunov_asymptotic_log(double log_lambda, double eps) {
  return eps / (2 * pi) * std::max(0.0, log_lambda);
}
inline double lyapunov_asymptotic(double lambda, double eps) {
  return lambda <= 0 ? 0.0 : lyapunov_asymptotic_log(std::log(lambda), eps);
}

enum class SpectralType { singular, ac_dominated, undecided };

inline const char *to_string(SpectralType t) {
  switch (t) {
  case SpectralType::singular: return "singular";
  case SpectralType::ac_dominated: return "ac-dominated";
  default: return "undecided";
  }
}

inline SpectralType classify_type(double log_lambda, double eps, double c, bool diophantine_ok,
                                  bool nonresonant) {
  if (!nonresonant) return SpectralType::undecided;
  double x = eps * log_lambda;
  if (x > c) return SpectralType::singular;
  if (x < -c && diophantine_ok) return SpectralType::ac_dominated;
  return SpectralType::undecided;
}

// --------------------------------------------------------- intervals
struct IntervalEntry {
  Nu nu;
  int l;
  double E;
  bool resonant;
  double log_raw_halfwidth; // -delta0/eps
  double shift = 0;         // refined center minus E (0 if resonant)
  double center = 0;
  double log_length = -inf; // natural log of |I check|
  double dist = inf;        // to the other ladder
  double log_lambda = 0;
  double theta_asym = 0;
  double tan_other = 0;     // tan(Phi_other(E)/eps)
  double cos_other = 0;
  SpectralType label = SpectralType::undecided;
  ActionProfile profile;
};

struct IntervalCatalog {
  double eps = 0, delta0 = 0, Lambda = 1, c = 0.05;
  double J0 = 0, J1 = 0;
  EnergyLadder ladder0, ladderpi; // over the extended window
  std::vector<IntervalEntry> entries;
  double dos_increment() const { return eps / (2 * pi); } // per non-resonant interval
};

inline double logsumexp(double a, double b) {
  double m = std::max(a, b);
  if (m == -inf) return -inf;
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

// refined interval about a non-resonant ladder point; type 0 is the mirror
// image (0 <-> pi swapped, signed derivative kept)
inline void refine_entry(IntervalEntry &e, double eps, double Lambda) {
  const auto &p = e.profile;
  double phi_other = e.nu == Nu::pi ? p.Phi0 : p.Phipi;
  double dphi = e.nu == Nu::pi ? p.dPhipi : p.dPhi0;
  double log_tv = -(e.nu == Nu::pi ? p.Svpi : p.Sv0) / eps;
  double log_th = -p.Sh / eps;
  double c = std::cos(phi_other / eps);
  e.cos_other = c;
  e.tan_other = std::tan(phi_other / eps);
  if (std::abs(c) < 1e-300) throw Error("refine: cos vanishes, point is resonant");
  e.shift = eps * Lambda * std::exp(log_th) * e.tan_other / (2 * dphi);
  e.center = e.E + e.shift;
  e.log_length = std::log(2 * eps / std::abs(dphi)) + logsumexp(log_th - std::log(2 * std::abs(c)), log_tv);
}

inline IntervalCatalog refine_intervals(const EnergyLadder &Lpi, const EnergyLadder &L0, const ProfileFn &fn,
                                        double eps, double Lambda, double d0, double J0, double J1,
                                        double c = 0.05, bool diophantine_ok = false) {
  IntervalCatalog cat;
  cat.eps = eps;
  cat.delta0 = d0;
  cat.Lambda = Lambda;
  cat.c = c;
  cat.J0 = J0;
  cat.J1 = J1;
  cat.ladder0 = L0;
  cat.ladderpi = Lpi;
  auto flags = classify_resonances(L0, Lpi, eps, d0);
  auto add = [&](const EnergyLadder &self, const EnergyLadder &other, const std::vector<bool> &fl, Nu nu) {
    for (size_t i = 0; i < self.points.size(); ++i) {
      auto &pt = self.points[i];
      if (pt.E < J0 || pt.E > J1) continue;
      IntervalEntry e;
      e.nu = nu;
      e.l = pt.l;
      e.E = pt.E;
      e.resonant = fl[i];
      e.log_raw_halfwidth = -d0 / eps;
      e.profile = fn(pt.E);
      e.center = pt.E;
      e.dist = dist_to(other, pt.E);
      double Sv = nu == Nu::pi ? e.profile.Svpi : e.profile.Sv0;
      e.log_lambda = log_lambda_coupling(-Sv / eps, -e.profile.Sh / eps, e.dist);
      e.theta_asym = lyapunov_asymptotic_log(e.log_lambda, eps);
      if (!e.resonant) refine_entry(e, eps, Lambda);
      e.label = classify_type(e.log_lambda, eps, c, diophantine_ok, !e.resonant);
      cat.entries.push_back(e);
    }
  };
  add(Lpi, L0, flags.pi, Nu::pi);
  add(L0, Lpi, flags.zero, Nu::zero);
  std::sort(cat.entries.begin(), cat.entries.end(), [](auto &a, auto &b) { return a.E < b.E; });
  return cat;
}

// everything for one window: ladders on J widened by a few spacings so that
// distances near the ends of J see the true neighbors
inline IntervalCatalog spectrum_catalog(const BandModel &m, double alpha, int n, double J0, double J1,
                                        double eps, double Lambda = 1, double c = 0.05,
                                        bool diophantine_ok = false, ActionOptions opt = {}) {
  auto fn = model_profile(m, alpha, n, opt);
  auto p0 = fn(J0), p1 = fn(J1);
  double slope = std::min({std::abs(p0.dPhi0), std::abs(p0.dPhipi), std::abs(p1.dPhi0), std::abs(p1.dPhipi)});
  double pad = 3 * pi * eps / slope;
  // stay inside the TIBM region, halfway clear of its boundary where Phi has
  // a square-root point
  double blo = std::max(m.edge(2 * n + 1) - alpha, m.edge(2 * n - 1) + alpha);
  double bhi = std::min(m.edge(2 * n) + alpha, m.edge(2 * n + 2) - alpha);
  double lo = std::min(J0, std::max(J0 - pad, 0.5 * (J0 + blo)));
  double hi = std::max(J1, std::min(J1 + pad, 0.5 * (J1 + bhi)));
  ProfileCache cache(fn, lo, hi);
  ProfileFn guess = [&cache](double E) { return cache(E); };
  auto Lpi = quantization_ladder(fn, lo, hi, eps, Nu::pi, guess);
  auto L0 = quantization_ladder(fn, lo, hi, eps, Nu::zero, guess);
  double d0 = delta0(fn, J0, J1);
  return refine_intervals(Lpi, L0, fn, eps, Lambda, d0, J0, J1, c, diophantine_ok);
}

// --------------------------------------------------------- region map
enum class ZoneLabel { sv0_sh_svpi, svpi_sh_sv0, sh_above, sh_below, outside, invalid };

inline const char *to_string(ZoneLabel z) {
  switch (z) {
  case ZoneLabel::sv0_sh_svpi: return "Sv0<Sh<Svpi";
  case ZoneLabel::svpi_sh_sv0: return "Svpi<Sh<Sv0";
  case ZoneLabel::sh_above: return "Sh>max(Sv)";
  case ZoneLabel::sh_below: return "Sh<min(Sv)";
  case ZoneLabel::outside: return "outside";
  default: return "invalid";
  }
}

inline ZoneLabel zone_of(double Sh, double Sv0, double Svpi) {
  if (Sv0 < Sh && Sh < Svpi) return ZoneLabel::sv0_sh_svpi;
  if (Svpi < Sh && Sh < Sv0) return ZoneLabel::svpi_sh_sv0;
  if (Sh > std::max(Sv0, Svpi)) return ZoneLabel::sh_above;
  return ZoneLabel::sh_below;
}

struct RegionCell {
  double alpha = 0, E = 0;
  WindowCheck window;
  ActionProfile profile;
  ZoneLabel label = ZoneLabel::outside;
  std::string error;
};

struct RegionMap {
  std::vector<double> alphas, energies;
  std::vector<RegionCell> cells; // row-major: alpha outer, E inner
  const RegionCell &at(size_t ia, size_t ie) const { return cells[ia * energies.size() + ie]; }
};

inline std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) v[i] = n == 1 ? a : a + (b - a) * i / (n - 1);
  return v;
}

inline RegionCell region_cell(const BandModel &m, double alpha, double E, ActionOptions opt = {}) {
  RegionCell c;
  c.alpha = alpha;
  c.E = E;
  c.window = check_tibm(m, E, alpha);
  if (!c.window.tibm_ok) return c;
  try {
    c.profile = action_profile(m, E, alpha, c.window.n, opt);
    auto bp = branch_points(m, E, alpha, c.window.n);
    c.window = check_T(bp, c.profile, c.window);
    c.label = zone_of(c.profile.Sh, c.profile.Sv0, c.profile.Svpi);
  } catch (const std::exception &ex) {
    c.label = ZoneLabel::invalid;
    c.error = ex.what();
  }
  return c;
}

inline RegionMap region_map(const BandModel &m, std::vector<double> alphas, std::vector<double> energies,
                            int threads = 1, ActionOptions opt = {}) {
  RegionMap r;
  r.alphas = std::move(alphas);
  r.energies = std::move(energies);
  size_t total = r.alphas.size() * r.energies.size();
  r.cells.resize(total);
  auto work = [&](size_t t, size_t T) {
    for (size_t i = t; i < total; i += T)
      r.cells[i] = region_cell(m, r.alphas[i / r.energies.size()], r.energies[i % r.energies.size()], opt);
  };
  threads = std::max(1, threads);
  if (threads == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(work, t, threads);
    for (auto &th : pool) th.join();
  }
  return r;
}

} // namespace adiaspec
