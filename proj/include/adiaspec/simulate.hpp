#pragma once
// Ground truth: matrix-cocycle and Schrodinger Lyapunov exponents, Dirichlet
// eigenvalue counts (Prufer phase), Diophantine membership of epsilon.

#include "monodromy.hpp"

#include <boost/multiprecision/cpp_bin_float.hpp>

namespace adiaspec {

// Neumaier summation
struct Compensated {
  double s = 0, c = 0;
  void add(double x) {
    double t = s + x;
    if (std::abs(s) >= std::abs(x)) c += (s - t) + x;
    else c += (x - t) + s;
    s = t;
  }
  double value() const { return s + c; }
};

struct CocycleResult {
  double estimate = 0;
  long steps = 0;
  std::vector<double> blocks; // per-block growth rates
  double stderr_ = 0;
  long renormalizations = 0;
  double drift = 0; // Schrodinger only: |log det| of the propagated frame
};

inline void finish_blocks(CocycleResult &r) {
  size_t B = r.blocks.size();
  if (B < 2) return;
  double m = 0;
  for (double b : r.blocks) m += b;
  m /= B;
  double v = 0;
  for (double b : r.blocks) v += (b - m) * (b - m);
  r.stderr_ = std::sqrt(v / (B - 1) / B);
}

// (1/L) log || M(z0 + (L-1)h) ... M(z0) ||
inline CocycleResult cocycle_lyapunov(const std::function<Mat2(double)> &M, double h, double z0, long steps,
                                      int block_count = 10) {
  if (steps < block_count || block_count < 1) throw Error("cocycle: need at least one step per block");
  CocycleResult r;
  r.steps = steps;
  Mat2 P;
  Compensated logs;
  const double hi = std::exp(20.0), lo = std::exp(-20.0);
  long per = steps / block_count;
  double mark = 0;
  long done = 0;
  for (int b = 0; b < block_count; ++b) {
    long n = b + 1 == block_count ? steps - done : per;
    for (long i = 0; i < n; ++i, ++done) {
      double z = z0 + done * h;
      P = M(z - std::floor(z)) * P;
      double nr = P.norm();
      if (!std::isfinite(nr) || nr == 0) throw Error("cocycle: overflow despite renormalization");
      if (nr > hi || nr < lo) {
        P = P * (1.0 / nr);
        logs.add(std::log(nr));
        ++r.renormalizations;
      }
    }
    double now = logs.value() + std::log(P.norm());
    r.blocks.push_back((now - mark) / n);
    mark = now;
  }
  r.estimate = mark / steps;
  finish_blocks(r);
  return r;
}

// ----------------------------------------------------- Schrodinger side
struct QuasiPeriodic {
  std::vector<CosTerm> V; // 1-periodic part
  double alpha = 0, eps = 0, z = 0;
  double q(double x) const {
    double v = alpha * std::cos(eps * x);
    for (auto &t : V) v += t.a * std::cos(2 * pi * t.m * (x - z));
    return v;
  }
};

// RK4 local error per unit length goes like k^5 dx^4, k the fastest local
// wavenumber: sqrt of the potential depth or the highest harmonic 2 pi m.
// 24 k^1.25 keeps the det drift per unit well under 1e-7; never below 32
inline int auto_steps_per_unit(const QuasiPeriodic &H, double E) {
  double depth = std::abs(H.alpha) + std::abs(E);
  int mmax = 0;
  for (auto &t : H.V) depth += std::abs(t.a), mmax = std::max(mmax, t.m);
  double k = std::max({1.0, std::sqrt(depth), 2 * pi * mmax});
  return std::max(32, (int)std::ceil(24 * std::pow(k, 1.25)));
}

struct SimOptions {
  int steps_per_unit = 0; // RK4 steps per unit length; 0 picks auto_steps_per_unit
  int block_count = 10;
  double drift_limit = 1e-6;
};

// growth rate of the fundamental matrix of psi'' = (q - E) psi, kept
// orthonormal by Gram-Schmidt; the two column logs must cancel (det = 1)
inline CocycleResult schrodinger_lyapunov(const QuasiPeriodic &H, double E, double x_max, SimOptions o = {}) {
  if (!(x_max > 0)) throw Error("schrodinger: x_max must be positive");
  if (o.steps_per_unit <= 0) o.steps_per_unit = auto_steps_per_unit(H, E);
  long N = (long)std::ceil(x_max * o.steps_per_unit);
  if (N < o.block_count) throw Error("schrodinger: x_max too short");
  double dx = x_max / N;
  CocycleResult r;
  r.steps = N;
  // columns (u, u'), (w, w')
  double u = 1, up = 0, w = 0, wp = 1;
  Compensated L1, L2;
  auto rk = [&](double x, double &y, double &yp) {
    auto f = [&](double xx) { return H.q(xx) - E; };
    double q0 = f(x), qm = f(x + 0.5 * dx), q1 = f(x + dx);
    double k1 = yp, l1 = q0 * y;
    double k2 = yp + 0.5 * dx * l1, l2 = qm * (y + 0.5 * dx * k1);
    double k3 = yp + 0.5 * dx * l2, l3 = qm * (y + 0.5 * dx * k2);
    double k4 = yp + dx * l3, l4 = q1 * (y + dx * k3);
    y += dx / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
    yp += dx / 6 * (l1 + 2 * l2 + 2 * l3 + l4);
  };
  long per = N / o.block_count;
  double mark = 0;
  long done = 0;
  for (int b = 0; b < o.block_count; ++b) {
    long n = b + 1 == o.block_count ? N - done : per;
    for (long i = 0; i < n; ++i, ++done) {
      double x = done * dx;
      rk(x, u, up);
      rk(x, w, wp);
      double nu = std::hypot(u, up);
      if (nu > 1e8 || nu < 1e-8 || (done & 63) == 63) {
        // Gram-Schmidt: first column carries the growth
        double a = u / nu, ap = up / nu;
        double pr = w * a + wp * ap;
        w -= pr * a;
        wp -= pr * ap;
        double nw = std::hypot(w, wp);
        L1.add(std::log(nu));
        L2.add(std::log(nw));
        u = a, up = ap, w /= nw, wp /= nw;
        ++r.renormalizations;
      }
    }
    double now = L1.value() + std::log(std::hypot(u, up));
    r.blocks.push_back((now - mark) / (n * dx));
    mark = now;
  }
  // det = (u wp - up w) * exp(L1 + L2) must stay 1
  r.drift = std::abs(L1.value() + L2.value() + std::log(std::abs(u * wp - up * w)));
  if (!(r.drift <= o.drift_limit * (1 + x_max))) // NaN counts as failure
    throw Error("schrodinger: Wronskian drift " + std::to_string(r.drift) + ", step too coarse");
  r.estimate = mark / x_max;
  finish_blocks(r);
  return r;
}

// average over z values z_k = z0 + k/count
inline CocycleResult schrodinger_lyapunov_avg(QuasiPeriodic H, double E, double x_max, int count = 8,
                                              SimOptions o = {}) {
  CocycleResult acc;
  double z0 = H.z;
  for (int k = 0; k < count; ++k) {
    H.z = z0 + double(k) / count;
    auto r = schrodinger_lyapunov(H, E, x_max, o);
    acc.blocks.push_back(r.estimate);
    acc.steps += r.steps;
    acc.renormalizations += r.renormalizations;
    acc.drift = std::max(acc.drift, r.drift);
  }
  double m = 0;
  for (double b : acc.blocks) m += b;
  acc.estimate = m / count;
  finish_blocks(acc);
  return acc;
}

struct IDSResult {
  double E = 0, L = 0;
  long count = 0;
  double N = 0; // count / 2L
};

// number of Dirichlet eigenvalues below E on [-L, L]: zeros of the shooting
// solution, from the Prufer angle psi = r sin t, psi' = r cos t
inline IDSResult ids_dirichlet(const QuasiPeriodic &H, double E, double L, int steps_per_unit = 0) {
  if (steps_per_unit <= 0) steps_per_unit = auto_steps_per_unit(H, E);
  if (!(L > 0)) throw Error("ids: L must be positive");
  long N = (long)std::ceil(2 * L * steps_per_unit);
  double dx = 2 * L / N;
  auto f = [&](double x, double t) {
    double s = std::sin(t), c = std::cos(t);
    return c * c + (E - H.q(x)) * s * s;
  };
  double t = 0;
  for (long i = 0; i < N; ++i) {
    double x = -L + i * dx;
    double k1 = f(x, t), k2 = f(x + 0.5 * dx, t + 0.5 * dx * k1), k3 = f(x + 0.5 * dx, t + 0.5 * dx * k2),
           k4 = f(x + dx, t + dx * k3);
    double dt = dx / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
    if (std::abs(dt) > pi / 2) throw Error("ids: Prufer phase step exceeds pi/2, refine the grid");
    t += dt;
  }
  IDSResult r;
  r.E = E;
  r.L = L;
  r.count = t > 0 ? (long)std::floor(t / pi) : 0;
  r.N = r.count / (2 * L);
  return r;
}

// --------------------------------------------------------- Diophantine
// eps is taken as the exact binary number it is; x = 2 pi / eps to 50 digits
using Big = boost::multiprecision::cpp_bin_float_50;

struct DiophantineResult {
  bool member = true;
  double worst_k = 0;     // denominator with the smallest margin
  double worst_ratio = 0; // ||k x|| k^2 / (a e^{-b/eps})
};

// Only continued-fraction denominators q_n matter: for q_n <= k < q_{n+1},
// ||k x|| >= ||q_n x|| and the bound a/k^2 e^{-b/eps} <= a/q_n^2 e^{-b/eps}.
inline DiophantineResult diophantine_member_x(const Big &x, double eps, double a, double b, double k_max = 0) {
  double logc = std::log(a) - b / eps;
  if (k_max <= 0) k_max = std::min(1e15, std::exp((logc + 690.0) / 3)); // bound below ~1e-300 beyond
  DiophantineResult r;
  r.worst_ratio = inf;
  Big y = x;
  Big p0 = 1, q0 = 0, p1 = floor(y), q1 = 1;
  auto check = [&](const Big &q) {
    Big d = abs(x * q - floor(x * q + Big(0.5)));
    double qd = q.convert_to<double>();
    double lhs = d == 0 ? -inf : std::log(d.convert_to<double>()) + 2 * std::log(qd);
    double ratio = lhs - logc;
    if (ratio < r.worst_ratio) {
      r.worst_ratio = ratio;
      r.worst_k = qd;
    }
    if (ratio < 0) r.member = false;
  };
  check(q1);
  Big frac_part = y - floor(y);
  for (int it = 0; it < 200 && r.member; ++it) {
    if (frac_part == 0) break;
    y = 1 / frac_part;
    Big ai = floor(y);
    frac_part = y - ai;
    Big p2 = ai * p1 + p0, q2 = ai * q1 + q0;
    if (q2 > Big(k_max)) break;
    check(q2);
    p0 = p1, q0 = q1, p1 = p2, q1 = q2;
  }
  r.worst_ratio = std::exp(r.worst_ratio);
  return r;
}

inline DiophantineResult diophantine_member(double eps, double a, double b, double k_max = 0) {
  if (!(eps > 0) || !(a > 0) || !(b >= 0)) throw Error("diophantine: need eps > 0, a > 0, b >= 0");
  Big x = 2 * boost::math::constants::pi<Big>() / Big(eps);
  return diophantine_member_x(x, eps, a, b, k_max);
}

} // namespace adiaspec
