#pragma once
// Leading-order monodromy matrices M_pi and M^U, the scalar second-order
// reduction, the continued fraction G, the resolvent test and the N cocycle.

#include "spectrum.hpp"

namespace adiaspec {

struct Mat2 {
  cplx a{1}, b{0}, c{0}, d{1}; // [[a, b], [c, d]]

  cplx det() const { return a * d - b * c; }
  double norm() const { // operator 2-norm; scaled so 1e100 entries don't overflow
    double mx = std::max({std::abs(a), std::abs(b), std::abs(c), std::abs(d)});
    if (!(mx > 0) || !std::isfinite(mx)) return mx;
    cplx A = a / mx, B = b / mx, C = c / mx, D = d / mx;
    double s = std::norm(A) + std::norm(B) + std::norm(C) + std::norm(D);
    double dt = std::abs(A * D - B * C);
    double disc = std::max(0.0, s * s - 4 * dt * dt);
    return mx * std::sqrt(0.5 * (s + std::sqrt(disc)));
  }
  Mat2 operator*(const Mat2 &o) const {
    return {a * o.a + b * o.c, a * o.b + b * o.d, c * o.a + d * o.c, c * o.b + d * o.d};
  }
  Mat2 operator*(cplx s) const { return {a * s, b * s, c * s, d * s}; }
  Mat2 operator+(const Mat2 &o) const { return {a + o.a, b + o.b, c + o.c, d + o.d}; }
  Mat2 inverse() const {
    cplx D = det();
    return {d / D, -b / D, -c / D, a / D};
  }
  double max_abs_diff(const Mat2 &o) const {
    return std::max({std::abs(a - o.a), std::abs(b - o.b), std::abs(c - o.c), std::abs(d - o.d)});
  }
};

inline Mat2 unimodular(const Mat2 &m) {
  cplx s = std::sqrt(m.det());
  if (std::abs(s) == 0) throw Error("singular matrix cannot be normalized");
  return m * (1.0 / s);
}

struct CocycleFunction {
  std::function<Mat2(double)> M;
  bool tform_symmetric = false;
  Mat2 operator()(double z) const { return M(z); }
};

// ---------------------------------------------------------- parameters
// An angle kept as quarter turns plus a remainder. Near a ladder point the
// model multiplies cos(Phi_pi/eps) by 1/T_h ~ e^{S_h/eps}; plain double
// angles leave a |cos| ~ 1e-15 that swamps everything.
struct Phase {
  long quarter = 0;
  double rem = 0;

  static Phase of(double x) {
    double q = std::round(x / (pi / 2));
    return {(long)q, x - q * (pi / 2)};
  }
  double value() const { return quarter * (pi / 2) + rem; }
  Phase shifted(double d) const { return {quarter, rem + d}; }
  double cos() const { return rot(std::cos(rem), std::sin(rem)).first; }
  double sin() const { return rot(std::cos(rem), std::sin(rem)).second; }
  cplx expi() const {
    auto [c, s] = rot(std::cos(rem), std::sin(rem));
    return {c, s};
  }

private:
  std::pair<double, double> rot(double c, double s) const {
    switch (((quarter % 4) + 4) % 4) {
    case 0: return {c, s};
    case 1: return {-s, c};
    case 2: return {-c, -s};
    default: return {s, -c};
    }
  }
};

struct ModelParams {
  double eps = 0.05;
  double h = 0;                   // (2 pi / eps) mod 1
  Phase f0, fpi;                  // Phi_0 / eps, Phi_pi / eps at the reference energy
  double dPhi0 = 0, dPhipi = 0;   // for small energy offsets
  double log_Th = 0, log_Tv0 = 0, log_Tvpi = 0;
  double theta = 1;
  double z0 = 0, zpi = 0;

  double Lambda() const { return 0.5 * (theta + 1 / theta); }

  void check() const {
    if (!(eps > 0)) throw Error("model: epsilon must be positive");
    if (!(theta > 0)) throw Error("model: theta must be positive");
    if (!(h >= 0 && h < 1)) throw Error("model: h must lie in [0, 1)");
    for (double t : {log_Th, log_Tv0, log_Tvpi})
      if (!(t < 0)) throw Error("model: tunneling coefficients must lie in (0, 1)");
    if (-log_Th > 700) throw Error("model: 1/T_h overflows double precision");
  }
};

inline double frac(double x) { return x - std::floor(x); }

inline double h_of(double eps) { return frac(2 * pi / eps); }

// leading order: checked quantities replaced by the plain ones, z0 = 0
inline ModelParams model_params(const ActionProfile &p, double eps, double theta = 1) {
  ModelParams q;
  q.eps = eps;
  q.h = h_of(eps);
  q.f0 = Phase::of(p.Phi0 / eps);
  q.fpi = Phase::of(p.Phipi / eps);
  q.dPhi0 = p.dPhi0;
  q.dPhipi = p.dPhipi;
  q.log_Th = -p.Sh / eps;
  q.log_Tv0 = -p.Sv0 / eps;
  q.log_Tvpi = -p.Svpi / eps;
  q.theta = theta;
  q.z0 = 0;
  q.zpi = frac(q.z0 + (p.Phipi - p.Phi0) / (2 * pi * eps) - pi / eps);
  q.check();
  return q;
}

// the same at a ladder point: the quantized phase is set exactly
inline ModelParams model_params_at(const ActionProfile &p, double eps, Nu nu, int l, double theta = 1) {
  auto q = model_params(p, eps, theta);
  (nu == Nu::pi ? q.fpi : q.f0) = Phase{2 * (long)l + 1, 0.0};
  return q;
}

namespace detail {

inline cplx expi(double x) { return {std::cos(x), std::sin(x)}; }
inline cplx expi(cplx x) { return std::exp(cplx(0, 1) * x); }

struct Phases {
  Phase f0, fpi;
};
inline Phases phases(const ModelParams &q, double dE) {
  return {q.f0.shifted(q.dPhi0 * dE / q.eps), q.fpi.shifted(q.dPhipi * dE / q.eps)};
}

// A_pi, B_pi = main + (theta parts)
struct ABParts {
  cplx main, a, b;
};
inline ABParts AB_pi(const ModelParams &q, cplx z, double dE) {
  auto ph = phases(q, dE);
  double Tv0 = std::exp(q.log_Tv0), Tvpi = std::exp(q.log_Tvpi);
  cplx a0 = 1.0 + Tv0 * expi(2 * pi * (z - q.z0));
  cplx a0s = 1.0 + Tv0 * expi(-2 * pi * (z - q.z0)); // alpha_0^* (z)
  cplx api = 1.0 + Tvpi * expi(2 * pi * (z - q.zpi));
  cplx e0 = ph.f0.expi(), epi = ph.fpi.expi();
  cplx C0 = 0.5 * (a0 * e0 + a0s * std::conj(e0));
  cplx main = 2.0 * api * epi * C0 * std::exp(-q.log_Th);
  double th = q.theta;
  cplx a = 0.5 * epi * std::conj(e0) * (1 / th + th);
  cplx b = 0.5 * epi * (e0 / th + th * std::conj(e0));
  return {main, a, b};
}

} // namespace detail

inline Mat2 build_M_pi(const ModelParams &q, cplx z, double dE = 0) {
  auto u = detail::AB_pi(q, z, dE), w = detail::AB_pi(q, std::conj(z), dE);
  return {u.main + u.a, u.main + u.b, std::conj(w.main + w.b), std::conj(w.main + w.a)};
}
inline Mat2 build_M_pi(const ModelParams &q, double z, double dE = 0) { return build_M_pi(q, cplx(z, 0), dE); }

// det = A A* - B B* on real z. With A = m + a, B = m + b the |m|^2 terms
// cancel and 2 Re(m conj(a - b)) reduces to -4 Im(alpha_pi) C0 sin(Phi0/eps) / (theta T_h)
inline double det_M_pi(const ModelParams &q, double z, double dE = 0) {
  auto u = detail::AB_pi(q, cplx(z, 0), dE);
  auto ph = detail::phases(q, dE);
  double Tv0 = std::exp(q.log_Tv0), Tvpi = std::exp(q.log_Tvpi);
  double C0 = ((1.0 + Tv0 * detail::expi(2 * pi * (z - q.z0))) * ph.f0.expi()).real();
  double im_api = Tvpi * std::sin(2 * pi * (z - q.zpi));
  return -4 * im_api * C0 * ph.f0.sin() / q.theta * std::exp(-q.log_Th) + std::norm(u.a) - std::norm(u.b);
}

namespace detail {
struct UParts {
  Mat2 P, Q;
  cplx C0, Ct;
  double k, c, s1; // 4/T_h, cos 2pi(z - z_pi), sin 2pi(z - h - z_pi)
  Phases ph;
};
inline UParts U_parts(const ModelParams &q, double z, double dE) {
  UParts u;
  u.ph = phases(q, dE);
  double Tv0 = std::exp(q.log_Tv0), Tvpi = std::exp(q.log_Tvpi);
  double th = q.theta;
  // alpha tilde to first order in T_v,pi
  u.c = std::cos(2 * pi * (z - q.zpi));
  u.s1 = std::sin(2 * pi * (z - q.h - q.zpi));
  cplx at = 1.0 + Tvpi * cplx(u.c, u.s1);
  cplx epi = u.ph.fpi.expi(), e0 = u.ph.f0.expi();
  u.Ct = (at * epi).real(); // (at e + at^* e^-1)/2 on real z
  cplx Sp = (at * epi).imag();
  cplx a0 = 1.0 + Tv0 * expi(2 * pi * (z - q.z0));
  u.C0 = (a0 * e0).real();
  u.k = 4 * std::exp(-q.log_Th);
  u.P = Mat2{u.k * u.Ct * u.C0, -u.k * Sp * u.C0, 0, 0};
  double cp = u.ph.fpi.cos(), sp = u.ph.fpi.sin(), c0 = u.ph.f0.cos(), s0 = u.ph.f0.sin();
  double cd = cp * c0 + sp * s0, sd = sp * c0 - cp * s0; // cos, sin of (Phi_pi - Phi_0)/eps
  u.Q = Mat2{cd / th + th * cp * c0, -sd / th - th * sp * c0, -th * s0 * u.Ct, th * sp * s0};
  return u;
}
} // namespace detail

inline Mat2 build_M_U(const ModelParams &q, double z, double dE = 0) {
  auto u = detail::U_parts(q, z, dE);
  return u.P + u.Q;
}

// det Q + P11 Q22 - P12 Q21 with the cancellation done by hand:
// S_pi - sin = T_v,pi (c sin + s1 cos)
inline double det_M_U(const ModelParams &q, double z, double dE = 0) {
  auto u = detail::U_parts(q, z, dE);
  double Tvpi = std::exp(q.log_Tvpi);
  double sp = u.ph.fpi.sin(), cp = u.ph.fpi.cos(), s0 = u.ph.f0.sin();
  double cross = -u.k * u.C0.real() * q.theta * s0 * u.Ct.real() * Tvpi * (u.c * sp + u.s1 * cp);
  return (u.Q.det()).real() + cross;
}

inline Mat2 scaled(const Mat2 &m, cplx det) {
  cplx s = std::sqrt(det);
  if (std::abs(s) == 0) throw Error("singular matrix cannot be normalized");
  return m * (1.0 / s);
}
inline Mat2 build_M_pi_unimodular(const ModelParams &q, double z, double dE = 0) {
  return scaled(build_M_pi(q, z, dE), det_M_pi(q, z, dE));
}
inline Mat2 build_M_U_unimodular(const ModelParams &q, double z, double dE = 0) {
  return scaled(build_M_U(q, z, dE), det_M_U(q, z, dE));
}

// the M_0 variant: roles of 0 and pi exchanged, theta -> 1/theta, z0 -> z0 + h
inline ModelParams swap_roles(const ModelParams &q) {
  ModelParams s = q;
  std::swap(s.f0, s.fpi);
  std::swap(s.dPhi0, s.dPhipi);
  std::swap(s.log_Tv0, s.log_Tvpi);
  s.theta = 1 / q.theta;
  s.z0 = frac(q.zpi);
  s.zpi = frac(q.z0 + q.h);
  return s;
}

// --------------------------------------------------- scalar reduction
struct ScalarCoeffs {
  std::function<cplx(double)> rho, v;
};

// Psi1(k+1) + rho(z_k) Psi1(k-1) = v(z_k) Psi1(k), z_k = z + k h, for
// det M = 1. Eliminating Psi2 puts M22 at the previous point:
// v(z) = M11(z) + rho(z) M22(z - h).
inline ScalarCoeffs scalar_reduction(std::function<Mat2(double)> M, double h) {
  auto m12 = [M](double z) {
    cplx b = M(z).b;
    if (std::abs(b) < 1e-300) throw Error("scalar reduction: M12 vanishes (model resonance)");
    return b;
  };
  ScalarCoeffs s;
  s.rho = [m12, h](double z) { return m12(z) / m12(z - h); };
  s.v = [M, m12, h](double z) { return M(z).a + m12(z) / m12(z - h) * M(z - h).d; };
  return s;
}

// --------------------------------------------------- continued fraction
struct ResolventCheck {
  bool ok = false;
  double max_rho = 0, min_v = inf;
  int wind_rho = 0, wind_v = 0;
  double margin = 0; // (min|v|/2)^2 - max|rho|
};

inline int winding(const std::function<cplx(double)> &f, int samples) {
  double acc = 0;
  cplx prev = f(0.0);
  for (int i = 1; i <= samples; ++i) {
    cplx cur = f(double(i) / samples);
    acc += std::arg(cur / prev);
    prev = cur;
  }
  return (int)std::lround(acc / (2 * pi));
}

inline ResolventCheck resolvent_test(const std::function<cplx(double)> &rho, const std::function<cplx(double)> &v,
                                     int samples = 1024) {
  ResolventCheck r;
  for (int i = 0; i < samples; ++i) {
    double z = double(i) / samples;
    r.max_rho = std::max(r.max_rho, std::abs(rho(z)));
    r.min_v = std::min(r.min_v, std::abs(v(z)));
  }
  r.margin = 0.25 * r.min_v * r.min_v - r.max_rho;
  r.wind_rho = r.max_rho > 0 ? winding(rho, samples) : 0;
  r.wind_v = winding(v, samples);
  r.ok = r.margin > 0 && r.wind_rho == 0 && r.wind_v == 0;
  return r;
}

struct CFResult {
  cplx value;
  int depth = 0;
  bool converged = false;
  double bound = 0; // right-hand side of the |G - v| estimate
};

// G(z) = v(z) - rho(z) / (v(z-h) - rho(z-h) / (v(z-2h) - ...)), bottom-up at
// doubling depths until two successive values agree
inline CFResult continued_fraction_G(const std::function<cplx(double)> &rho, const std::function<cplx(double)> &v,
                                     double h, double z, int max_depth = 1 << 14, int samples = 512,
                                     double tol = 1e-12) {
  auto rc = resolvent_test(rho, v, samples);
  if (!(rc.margin > 0)) throw Error("continued fraction: max|rho| >= (min|v|/2)^2, refusing");
  CFResult r;
  double hm = 0.5 * rc.min_v;
  r.bound = hm - std::sqrt(hm * hm - rc.max_rho);
  auto eval = [&](int D) {
    cplx g = v(z - D * h);
    for (int k = D - 1; k >= 0; --k) g = v(z - k * h) - rho(z - k * h) / g;
    return g;
  };
  cplx prev = eval(4);
  for (int D = 8; D <= max_depth; D *= 2) {
    cplx cur = eval(D);
    r.value = cur;
    r.depth = D;
    if (std::abs(cur - prev) <= tol * std::max(1.0, std::abs(cur))) {
      r.converged = true;
      return r;
    }
    prev = cur;
  }
  return r;
}

// ------------------------------------------------------------ N cocycle
// requires real M with A^-1 <= M12 <= A; then rho > 0 and N is real SL(2)
inline CocycleFunction build_N(std::function<Mat2(double)> M, double h, int samples = 1024) {
  double lo = inf, hi = -inf;
  for (int i = 0; i < samples; ++i) {
    Mat2 m = M(double(i) / samples);
    double sc = std::max(1.0, m.norm());
    for (cplx e : {m.a, m.b, m.c, m.d})
      if (std::abs(e.imag()) > 1e-12 * sc) throw Error("build_N: matrix is not real");
    lo = std::min(lo, m.b.real());
    hi = std::max(hi, m.b.real());
  }
  if (!(lo > 0 || hi < 0)) throw Error("build_N: M12 changes sign");
  auto sc = scalar_reduction(M, h);
  CocycleFunction N;
  N.M = [sc](double z) {
    double r = sc.rho(z).real(), q = std::sqrt(r);
    double v = sc.v(z).real();
    return Mat2{v / q, -q, 1 / q, 0};
  };
  return N;
}

// H(z) = (1/M12) [[M12, 0], [M22, -1]]
inline Mat2 gauge_H(const Mat2 &m) { return Mat2{m.b, 0, m.d, -1} * (1.0 / m.b); }

// ------------------------------------------------ effective parameters
struct EffectiveParameters {
  double Epi = 0;
  int sigma = 1;
  double log_abs_lambda = 0; // log |lambda_sc|
  int lambda_sign = 1;
  double a = 0, b = 0; // F = a dE + b, dE = E - E_pi
  double F(double dE) const { return a * dE + b; }
  double zero_offset() const { return -b / a; } // root of F, relative to E_pi
};

// q must be set up at the ladder point (model_params_at)
inline EffectiveParameters effective_parameters(const ModelParams &q, double Epi) {
  EffectiveParameters e;
  e.Epi = Epi;
  double s = -q.fpi.sin();
  e.sigma = s >= 0 ? 1 : -1;
  double c0 = q.f0.cos(), s0 = q.f0.sin();
  e.a = e.sigma * 4 * std::exp(-q.log_Th) * c0 * q.dPhipi / q.eps;
  e.b = -e.sigma * 2 * q.Lambda() * s0;
  e.log_abs_lambda = std::log(4.0) + q.log_Tvpi - q.log_Th + std::log(std::abs(c0));
  e.lambda_sign = e.sigma * (c0 >= 0 ? 1 : -1);
  return e;
}

} // namespace adiaspec
