#pragma once
// Phase integrals, tunneling actions and coefficients as real integrals along
// the boundary of the half-strip, and the periodic constants theta_n / Lambda_n.

#include "momentum.hpp"

#include <cstdio>
#include <optional>

namespace adiaspec {

struct ActionProfile {
  double E = 0, alpha = 0;
  int n = 1;
  double Phi0 = 0, Phipi = 0;
  double Sh0 = 0, Shpi = 0, Sh = 0, Sv0 = 0, Svpi = 0;
  double dPhi0 = 0, dPhipi = 0;
  double err = 0; // largest quadrature error estimate
};

struct TunnelingSet {
  double eps = 0;
  double log_th = 0, log_tv0 = 0, log_tvpi = 0; // natural logs
  double th() const { return std::exp(log_th); }
  double tv0() const { return std::exp(log_tv0); }
  double tvpi() const { return std::exp(log_tvpi); }
};

struct ActionOptions {
  double tol = 1e-11; // relative, outer quadrature
};

namespace detail {

inline double kre(const BandModel &m, double w) { return kp(m, w).real(); }
inline double kim(const BandModel &m, double w) { return kp(m, w).imag(); }

// Re k_p'(w) with w nudged off an edge onto the side `up` (true: above)
inline double kprime_re(const BandModel &m, double w, bool up) {
  for (double e : m.edges)
    if (w == e) w = std::nextafter(w, up ? inf : -inf);
  return quasi_momentum_derivative(m, cplx(w, 0)).real();
}

inline void require_tibm(const BandModel &m, double E, double alpha, int n) {
  if (2 * n + 2 > m.edge_count()) throw Error("actions: band n+1 must be bounded");
  auto mg = tibm_margins(m, E, alpha, n);
  for (double x : mg)
    if (!(x > 0)) throw Error("actions: TIBM fails at this (E, alpha, n)");
}

} // namespace detail

// Phi_pi = 2 int_{zeta_2n+1}^{pi} (kappa_p - pi n) dzeta
inline Quad<double> phase_pi(const BandModel &m, const BranchPointSet &bp, double E, double alpha, int n,
                             double tol = 1e-11) {
  double a = bp.z2n1;
  auto f = [&](double z) { return detail::kre(m, E - alpha * std::cos(z)) - pi * n; };
  auto q = integrate_sqrt_end(f, a, pi, true, tol);
  return {2 * q.value, 2 * q.err};
}

// Phi_0 = -2 int_0^{zeta_2n} (kappa_p - pi n) dzeta
inline Quad<double> phase_0(const BandModel &m, const BranchPointSet &bp, double E, double alpha, int n,
                            double tol = 1e-11) {
  double b = bp.z2n;
  auto f = [&](double z) { return detail::kre(m, E - alpha * std::cos(z)) - pi * n; };
  auto q = integrate_sqrt_end(f, 0.0, b, false, tol);
  return {-2 * q.value, 2 * q.err};
}

struct HorizontalActions {
  double Sh0, Shpi, Sh, err;
};

// S_h,pi over [zeta_2n, zeta_2n+1]; S_h,0 over the mirror [-zeta_2n+1, -zeta_2n]
inline HorizontalActions action_h(const BandModel &m, const BranchPointSet &bp, double E, double alpha,
                                  int /*n*/, double tol = 1e-11) {
  double a = bp.z2n, b = bp.z2n1;
  // both ends are square-root points: cos map, the sin factor restored by hand
  auto hp = [&](double u) {
    double z = a + 0.5 * (b - a) * (1 - std::cos(u));
    return detail::kim(m, E - alpha * std::cos(z)) * 0.5 * (b - a) * std::sin(u);
  };
  auto h0 = [&](double u) {
    double z = -b + 0.5 * (b - a) * (1 - std::cos(u));
    return detail::kim(m, E - alpha * std::cos(z)) * 0.5 * (b - a) * std::sin(u);
  };
  auto qp = integrate(hp, 0.0, pi, tol);
  auto q0 = integrate(h0, 0.0, pi, tol);
  return {q0.value, qp.value, q0.value + qp.value, std::max(q0.err, qp.err)};
}

enum class Nu { zero, pi };

// nu=pi: 2 int_0^{Im zeta_2n+2} (pi(n+1) - k_p(E + alpha cosh t)) dt
// nu=0 : 2 int_0^{Im zeta_2n-1} (k_p(E - alpha cosh t) - pi(n-1)) dt
inline Quad<double> action_v(const BandModel &m, const BranchPointSet &bp, double E, double alpha, int n,
                             Nu nu, double tol = 1e-11) {
  if (nu == Nu::pi) {
    double T = bp.im(2 * n + 2);
    if (std::isnan(T)) throw Error("action_v: zeta_{2n+2} missing");
    auto f = [&](double t) { return pi * (n + 1) - detail::kre(m, E + alpha * std::cosh(t)); };
    auto q = integrate_sqrt_end(f, 0.0, T, false, tol);
    return {2 * q.value, 2 * q.err};
  }
  double T = bp.im(2 * n - 1);
  if (std::isnan(T)) throw Error("action_v: zeta_{2n-1} missing");
  auto f = [&](double t) { return detail::kre(m, E - alpha * std::cosh(t)) - pi * (n - 1); };
  auto q = integrate_sqrt_end(f, 0.0, T, false, tol);
  return {2 * q.value, 2 * q.err};
}

// E-derivatives: the endpoint terms vanish because the integrands do
inline Quad<double> phase_pi_derivative(const BandModel &m, const BranchPointSet &bp, double E,
                                        double alpha, double tol = 1e-11) {
  auto f = [&](double z) { return detail::kprime_re(m, E - alpha * std::cos(z), true); };
  auto q = integrate_sqrt_end(f, bp.z2n1, pi, true, tol);
  return {2 * q.value, 2 * q.err};
}
inline Quad<double> phase_0_derivative(const BandModel &m, const BranchPointSet &bp, double E,
                                       double alpha, double tol = 1e-11) {
  auto f = [&](double z) { return detail::kprime_re(m, E - alpha * std::cos(z), false); };
  auto q = integrate_sqrt_end(f, 0.0, bp.z2n, false, tol);
  return {-2 * q.value, 2 * q.err};
}

inline TunnelingSet tunneling(const ActionProfile &p, double eps) {
  if (!(eps > 0)) throw Error("tunneling: epsilon must be positive");
  return {eps, -p.Sh / eps, -p.Sv0 / eps, -p.Svpi / eps};
}

inline ActionProfile action_profile(const BandModel &m, double E, double alpha, int n,
                                    ActionOptions opt = {}) {
  detail::require_tibm(m, E, alpha, n);
  auto bp = branch_points(m, E, alpha, n);
  ActionProfile p;
  p.E = E;
  p.alpha = alpha;
  p.n = n;
  auto a = phase_0(m, bp, E, alpha, n, opt.tol);
  auto b = phase_pi(m, bp, E, alpha, n, opt.tol);
  auto h = action_h(m, bp, E, alpha, n, opt.tol);
  auto v0 = action_v(m, bp, E, alpha, n, Nu::zero, opt.tol);
  auto vp = action_v(m, bp, E, alpha, n, Nu::pi, opt.tol);
  Quad<double> d0, dp;
  if (m.backend == Backend::finite_gap) {
    d0 = phase_0_derivative(m, bp, E, alpha, opt.tol);
    dp = phase_pi_derivative(m, bp, E, alpha, opt.tol);
  } else {
    // ODE side: k' = -D'/2 sin k is noise near the edges (sin k from acos of a
    // rounded discriminant). Differentiate the phases instead, 4th-order Richardson.
    auto mg = tibm_margins(m, E, alpha, n);
    double st = std::min(1e-3, 0.2 * *std::min_element(mg.begin(), mg.end()));
    auto phases = [&](double e) {
      auto q = branch_points(m, e, alpha, n);
      return std::make_pair(phase_0(m, q, e, alpha, n, opt.tol).value, phase_pi(m, q, e, alpha, n, opt.tol).value);
    };
    auto p1 = phases(E + st), m1 = phases(E - st), p2 = phases(E + 2 * st), m2 = phases(E - 2 * st);
    auto rich = [&](double f1, double g1, double f2, double g2) {
      return (8 * (f1 - g1) - (f2 - g2)) / (12 * st);
    };
    double e_fd = opt.tol / st + st * st * st * st; // rounding + truncation scale
    d0 = {rich(p1.first, m1.first, p2.first, m2.first), e_fd};
    dp = {rich(p1.second, m1.second, p2.second, m2.second), e_fd};
  }
  p.Phi0 = a.value;
  p.Phipi = b.value;
  p.Sh0 = h.Sh0;
  p.Shpi = h.Shpi;
  p.Sh = h.Sh;
  p.Sv0 = v0.value;
  p.Svpi = vp.value;
  p.dPhi0 = d0.value;
  p.dPhipi = dp.value;
  p.err = std::max({a.err, b.err, h.err, v0.err, vp.err});
  return p;
}

inline WindowCheck check_T(const BranchPointSet &bp, const ActionProfile &p, WindowCheck w = {}) {
  w.n = bp.n;
  w.T_margin = T_margin(bp, p.Sh, p.Sv0, p.Svpi);
  w.T_ok = w.T_margin > 0;
  return w;
}

// ------------------------------------------------------------ theta_n
struct PeriodicConstants {
  int n = 1;
  double theta = 1, Lambda = 1;
  cplx l{0, 0};          // contour integral, Im reduced mod 2 pi
  double margin = 0;     // contour distance actually used
  double err = 0;        // |Im l| after reduction
  bool fallback = false; // band-edge backend: user value, not computed
};

namespace detail {

// omega(E) for the Bloch solution psi (multiplier e^{ik}, psi(1) = 1) and its
// partner with multiplier e^{-ik}; psi_dot by central differences.
struct OmegaEval {
  const BandModel &m;
  int N;
  double dE;

  struct Bloch {
    std::vector<cplx> psi, psih;
    cplx k;
  };

  Bloch bloch(cplx E, cplx k) const {
    auto path = transfer_path<cplx>(m, E, N);
    auto &Y = path.back();
    cplx lam = std::exp(cplx(0, 1) * k);
    cplx y11 = Y[0], y21 = Y[2]; // y1(1), y2(1)
    auto coeffs = [&](cplx l) {
      cplx c1 = 1.0 / l;
      cplx c2 = (l - y11) * c1 / y21;
      return std::pair{c1, c2};
    };
    auto [c1, c2] = coeffs(lam);
    auto [d1, d2] = coeffs(1.0 / lam);
    Bloch b;
    b.k = k;
    b.psi.resize(N + 1);
    b.psih.resize(N + 1);
    for (int i = 0; i <= N; ++i) {
      b.psi[i] = c1 * path[i][0] + c2 * path[i][2];
      b.psih[i] = d1 * path[i][0] + d2 * path[i][2];
    }
    return b;
  }

  // Simpson on the RK nodes
  cplx simpson(const std::vector<cplx> &f) const {
    cplx s = f[0] + f[N];
    for (int i = 1; i < N; ++i) s += (i % 2 ? 4.0 : 2.0) * f[i];
    return s / (3.0 * N);
  }

  // k continued to E +- dE from (E, k)
  cplx k_near(cplx E, cplx k) const {
    cplx d = discriminant(m, E);
    return nearest_branch(std::acos(d / 2.0), k);
  }

  cplx operator()(cplx E, cplx k) const {
    cplx kp_ = k_near(E + dE, k), km = k_near(E - dE, k);
    auto b0 = bloch(E, k), bp = bloch(E + dE, kp_), bm = bloch(E - dE, km);
    cplx kdot = (kp_ - km) / (2.0 * dE);
    std::vector<cplx> num(N + 1), den(N + 1);
    for (int i = 0; i <= N; ++i) {
      double x = double(i) / N;
      cplx pdot = (bp.psi[i] - bm.psi[i]) / (2.0 * dE);
      num[i] = b0.psih[i] * (pdot - cplx(0, 1) * kdot * x * b0.psi[i]);
      den[i] = b0.psi[i] * b0.psih[i];
    }
    return -simpson(num) / simpson(den);
  }
};

inline cplx theta_contour(const BandModel &m, int n, double margin, double E_step, int N, int per_side) {
  double a = m.edge(2 * n) - margin, b = m.edge(2 * n + 1) + margin;
  OmegaEval om{m, N, E_step};
  // positively oriented rectangle starting on the real axis in band n+1
  std::vector<cplx> corners = {cplx(b, 0), cplx(b, margin), cplx(a, margin), cplx(a, -margin),
                               cplx(b, -margin), cplx(b, 0)};
  cplx k = kp(m, b);
  cplx total = 0;
  constexpr int G = 8; // Gauss-Legendre nodes per panel
  static const double gx[G] = {-0.9602898564975363, -0.7966664774136267, -0.5255324099163290,
                               -0.1834346424956498, 0.1834346424956498,  0.5255324099163290,
                               0.7966664774136267,  0.9602898564975363};
  static const double gw[G] = {0.1012285362903763, 0.2223810344533745, 0.3137066458778873,
                               0.3626837833783620, 0.3626837833783620, 0.3137066458778873,
                               0.2223810344533745, 0.1012285362903763};
  for (size_t s = 0; s + 1 < corners.size(); ++s) {
    cplx P = corners[s], Q = corners[s + 1];
    int panels = (s == 0 || s + 2 == corners.size()) ? per_side / 2 : per_side;
    if (s == 2) panels = 2 * per_side;
    for (int p = 0; p < panels; ++p) {
      cplx A = P + (Q - P) * (double(p) / panels), B = P + (Q - P) * (double(p + 1) / panels);
      cplx mid = 0.5 * (A + B), half = 0.5 * (B - A);
      for (int i = 0; i < G; ++i) {
        cplx E = mid + half * gx[i];
        k = om.k_near(E, k); // nodes are visited in order along the contour
        total += gw[i] * half * om(E, k);
      }
    }
  }
  return total;
}

} // namespace detail

// margin: distance of the rectangle from the gap; default half the gap width
inline PeriodicConstants compute_theta_n(const BandModel &m, int n, double contour_margin = 0,
                                         double E_step = 0) {
  if (m.backend != Backend::ode) throw Error("theta_n needs the explicit-potential backend");
  if (2 * n + 1 > m.edge_count()) throw Error("theta_n: gap index beyond the model");
  double gw = m.edge(2 * n + 1) - m.edge(2 * n);
  double bw = std::min(m.edge(2 * n) - m.edge(2 * n - 1),
                       2 * n + 2 <= m.edge_count() ? m.edge(2 * n + 2) - m.edge(2 * n + 1) : inf);
  double margin = contour_margin > 0 ? contour_margin : std::min(0.5 * gw, 0.25 * bw);
  double h = E_step > 0 ? E_step : 1e-5 * gw;
  int N = std::max(256, 4 * m.steps);
  PeriodicConstants pc;
  pc.n = n;
  for (int attempt = 0; attempt < 2; ++attempt) {
    cplx l = detail::theta_contour(m, n, margin, h, N, 16);
    double im = std::remainder(l.imag(), 2 * pi);
    pc.l = cplx(l.real(), im);
    pc.margin = margin;
    pc.err = std::abs(im);
    if (std::isfinite(l.real()) && pc.err < 1e-4) break;
    margin *= 1.5; // a pole of omega too close to the contour
  }
  if (!std::isfinite(pc.l.real())) throw Error("theta_n: contour integral failed");
  pc.theta = std::exp(pc.l.real());
  pc.Lambda = 0.5 * (pc.theta + 1 / pc.theta);
  return pc;
}

// band-edge backend: V is not known, so Lambda_n cannot be computed
inline PeriodicConstants periodic_constants_fallback(int n, double Lambda = 1, bool warn = true) {
  if (!(Lambda >= 1)) throw Error("Lambda_n must be >= 1");
  if (warn)
    std::fprintf(stderr, "warning: Lambda_%d not computable from band edges; using %g\n", n, Lambda);
  PeriodicConstants pc;
  pc.n = n;
  pc.Lambda = Lambda;
  pc.theta = Lambda + std::sqrt(std::max(0.0, Lambda * Lambda - 1));
  pc.l = std::log(pc.theta);
  pc.fallback = true;
  return pc;
}

} // namespace adiaspec
