#pragma once
// Band structure of the periodic operator -d^2/dx^2 + V(x), period 1.
// Two backends: band edges only (finite-gap hyper-elliptic differential) and
// an explicit cosine-series potential integrated over one period.

#include "quadrature.hpp"

#include <boost/math/tools/roots.hpp>
#include <boost/numeric/odeint/stepper/runge_kutta_fehlberg78.hpp>

#include <algorithm>
#include <bit>
#include <array>
#include <cmath>
#include <complex>
#include <string>
#include <vector>

namespace adiaspec {

enum class Backend { finite_gap, ode };

struct CosTerm {
  int m;    // harmonic index
  double a; // coefficient of cos(2 pi m x)
};

struct BandModel {
  Backend backend = Backend::finite_gap;
  std::vector<double> edges;  // E_1 < E_2 < E_3 < ... (odd count, last band unbounded)
  std::vector<double> lambda; // finite-gap: one root per gap
  std::vector<CosTerm> potential;
  double tol = 1e-12;
  double cap = 0;            // ode: edge search limit
  int steps = 0;             // ode: RK steps per period
  std::vector<double> touch; // ode: closed-gap points past the last open gap

  int genus() const { return static_cast<int>(edges.size() - 1) / 2; }
  double edge(int j) const { return edges.at(j - 1); } // 1-based like the math
  int edge_count() const { return static_cast<int>(edges.size()); }

  double V(double x) const {
    double v = 0;
    for (auto &t : potential) v += t.a * std::cos(2 * pi * t.m * x);
    return v;
  }
};

enum class Zone { below, band, gap };

struct Where {
  Zone zone;
  int n; // band or gap index, 1-based; 0 for below
};

inline Where locate(const BandModel &m, double E) {
  if (E < m.edges[0]) return {Zone::below, 0};
  int g = m.genus();
  for (int n = 1; n <= g; ++n) {
    if (E <= m.edge(2 * n)) return {Zone::band, n};
    if (E < m.edge(2 * n + 1)) return {Zone::gap, n};
  }
  return {Zone::band, g + 1};
}

struct QuasiMomentumValue {
  cplx k;
  Zone zone = Zone::band;
  int n = 1;
  bool below_spectrum = false;
};

// ---------------------------------------------------------------- finite gap
namespace detail {

inline double prod_lambda(const BandModel &m, double t, int skip = -1) {
  double p = 1;
  for (int i = 0; i < (int)m.lambda.size(); ++i)
    if (i != skip) p *= t - m.lambda[i];
  return p;
}

// prod over edges except indices s1, s2 (0-based) of |t - E_m|
inline double abs_R_except(const BandModel &m, double t, int s1, int s2 = -1) {
  double r = 1;
  for (int i = 0; i < m.edge_count(); ++i)
    if (i != s1 && i != s2) r *= std::abs(t - m.edges[i]);
  return r;
}

// 1/2 |p| / sqrt|R~| on the cos-mapped segment between edges ia, ib (0-based)
inline double fg_band_density(const BandModel &m, double t, int ia, int ib) {
  return 0.5 * std::abs(prod_lambda(m, t)) / std::sqrt(abs_R_except(m, t, ia, ib));
}

// signed density of Im k on gap j (1-based), positive left of lambda_j
inline double fg_gap_density(const BandModel &m, double t, int j) {
  int ia = 2 * j - 1, ib = 2 * j;
  double q = std::abs(prod_lambda(m, t, j - 1));
  return 0.5 * q * (m.lambda[j - 1] - t) / std::sqrt(abs_R_except(m, t, ia, ib));
}

inline double fg_band_full(const BandModel &m, int j, double tol = 1e-13) {
  double a = m.edge(2 * j - 1), b = m.edge(2 * j);
  auto g = [&](double t) { return fg_band_density(m, t, 2 * j - 2, 2 * j - 1); };
  return integrate_cosmap(g, a, b, 0.0, pi, tol).value;
}

inline double fg_k_real(const BandModel &m, double E, Where w, double tol = 1e-13) {
  int g = m.genus();
  if (w.zone == Zone::below) {
    double a = m.edges[0], S = std::sqrt(a - E);
    auto f = [&](double s) {
      double t = a - s * s;
      return std::abs(prod_lambda(m, t)) / std::sqrt(abs_R_except(m, t, 0));
    };
    return integrate(f, 0.0, S, tol).value; // imaginary part
  }
  if (w.zone == Zone::band && w.n == g + 1) {
    double a = m.edges.back(), S = std::sqrt(E - a);
    auto f = [&](double s) {
      double t = a + s * s;
      return std::abs(prod_lambda(m, t)) / std::sqrt(abs_R_except(m, t, m.edge_count() - 1));
    };
    return pi * g + integrate(f, 0.0, S, tol).value;
  }
  if (w.zone == Zone::band) {
    int j = w.n;
    double a = m.edge(2 * j - 1), b = m.edge(2 * j);
    double u = cosmap_u(a, b, E);
    auto dens = [&](double t) { return fg_band_density(m, t, 2 * j - 2, 2 * j - 1); };
    if (u <= pi / 2) return pi * (j - 1) + integrate_cosmap(dens, a, b, 0.0, u, tol).value;
    return pi * j - integrate_cosmap(dens, a, b, u, pi, tol).value;
  }
  int j = w.n;
  double a = m.edge(2 * j), b = m.edge(2 * j + 1);
  double u = cosmap_u(a, b, E);
  auto dens = [&](double t) { return fg_gap_density(m, t, j); };
  if (u <= pi / 2) return integrate_cosmap(dens, a, b, 0.0, u, tol).value;
  return -integrate_cosmap(dens, a, b, u, pi, tol).value;
}

// k'(E) = p(E) / (2 prod sqrt(E - E_m)), principal roots; valid for Im E >= 0
inline cplx fg_kprime(const BandModel &m, cplx E) {
  cplx p = 1, r = 1;
  for (double l : m.lambda) p *= E - l;
  for (double e : m.edges) {
    cplx d = E - e;
    if (d.imag() == 0) d = cplx(d.real(), +0.0);
    r *= std::sqrt(d);
  }
  return p / (2.0 * r);
}

inline void solve_gap_roots(BandModel &m, double tol) {
  int g = m.genus();
  m.lambda.assign(g, 0);
  for (int j = 1; j <= g; ++j) m.lambda[j - 1] = 0.5 * (m.edge(2 * j) + m.edge(2 * j + 1));
  // the gap integral is affine in lambda_j once the others are frozen:
  // int (t - lambda_j) q_j / sqrt|R| = A_j - lambda_j B_j
  for (int sweep = 0; sweep < 200; ++sweep) {
    double change = 0;
    for (int j = 1; j <= g; ++j) {
      double a = m.edge(2 * j), b = m.edge(2 * j + 1);
      auto fa = [&](double t) {
        return t * prod_lambda(m, t, j - 1) / std::sqrt(abs_R_except(m, t, 2 * j - 1, 2 * j));
      };
      auto fb = [&](double t) {
        return prod_lambda(m, t, j - 1) / std::sqrt(abs_R_except(m, t, 2 * j - 1, 2 * j));
      };
      double A = integrate_cosmap(fa, a, b, 0.0, pi, tol).value;
      double B = integrate_cosmap(fb, a, b, 0.0, pi, tol).value;
      double l = A / B;
      if (!(l > a && l < b))
        throw Error("gap root " + std::to_string(j) + " cannot be bracketed inside its gap");
      change = std::max(change, std::abs(l - m.lambda[j - 1]) / (b - a));
      m.lambda[j - 1] = l;
    }
    if (change < 1e-15) return;
  }
}

inline std::vector<double> solve_small(std::vector<std::vector<double>> A, std::vector<double> b) {
  int n = (int)b.size();
  for (int c = 0; c < n; ++c) {
    int piv = c;
    for (int i = c + 1; i < n; ++i)
      if (std::abs(A[i][c]) > std::abs(A[piv][c])) piv = i;
    std::swap(A[c], A[piv]);
    std::swap(b[c], b[piv]);
    for (int i = c + 1; i < n; ++i) {
      double f = A[i][c] / A[c][c];
      for (int k = c; k < n; ++k) A[i][k] -= f * A[c][k];
      b[i] -= f * b[c];
    }
  }
  for (int i = n - 1; i >= 0; --i) {
    for (int k = i + 1; k < n; ++k) b[i] -= A[i][k] * b[k];
    b[i] /= A[i][i];
  }
  return b;
}

// min max|y_c| subject to J y = b (g rows, n >= g columns). The optimum is a
// vertex: g-1 free components, the rest at +-t. Enumerated; n is small.
inline std::vector<double> minmax_solution(const std::vector<std::vector<double>> &J,
                                           const std::vector<double> &b) {
  int g = (int)J.size(), n = (int)J[0].size();
  if (n > 14) throw Error("minmax: too many unknowns");
  std::vector<double> best;
  double bt = 1e300;
  for (unsigned F = 0; F < (1u << n); ++F) {
    if (std::popcount(F) != g - 1) continue;
    std::vector<int> fixed, freev;
    for (int c = 0; c < n; ++c) (F >> c & 1 ? freev : fixed).push_back(c);
    for (unsigned S = 0; S < (1u << fixed.size()); ++S) {
      // unknowns: t, then the free components
      std::vector<std::vector<double>> A(g, std::vector<double>(g, 0));
      for (int i = 0; i < g; ++i) {
        for (size_t k = 0; k < fixed.size(); ++k) A[i][0] += J[i][fixed[k]] * ((S >> k & 1) ? -1.0 : 1.0);
        for (size_t k = 0; k < freev.size(); ++k) A[i][1 + k] = J[i][freev[k]];
      }
      auto x = solve_small(A, b);
      bool ok = x[0] >= 0 && std::isfinite(x[0]);
      for (size_t k = 0; ok && k < freev.size(); ++k) ok = std::abs(x[1 + k]) <= x[0] * (1 + 1e-12);
      if (!ok || x[0] >= bt) continue;
      bt = x[0];
      best.assign(n, 0);
      for (size_t k = 0; k < fixed.size(); ++k) best[fixed[k]] = ((S >> k & 1) ? -1.0 : 1.0) * x[0];
      for (size_t k = 0; k < freev.size(); ++k) best[freev[k]] = x[1 + k];
    }
  }
  if (best.empty()) throw Error("minmax: no solution");
  return best;
}

} // namespace detail

// residual of the gap condition for gap j, relative to the gap's |p|/sqrt|R| mass
inline double gap_residual(const BandModel &m, int j, double tol = 1e-13) {
  double a = m.edge(2 * j), b = m.edge(2 * j + 1);
  auto f = [&](double t) {
    return detail::prod_lambda(m, t) / std::sqrt(detail::abs_R_except(m, t, 2 * j - 1, 2 * j));
  };
  auto fa = [&](double t) { return std::abs(f(t)); };
  return integrate_cosmap(f, a, b, 0.0, pi, tol).value /
         integrate_cosmap(fa, a, b, 0.0, pi, tol).value;
}

inline void check_edges(const std::vector<double> &e) {
  if (e.size() < 3 || e.size() % 2 == 0) throw Error("need an odd number (>= 3) of band edges");
  for (size_t i = 1; i < e.size(); ++i)
    if (!(e[i] > e[i - 1])) throw Error("band edges must be strictly increasing (all gaps open)");
}

inline BandModel build_finite_gap_model(std::vector<double> edges, double tol = 1e-13) {
  check_edges(edges);
  BandModel m;
  m.backend = Backend::finite_gap;
  m.edges = std::move(edges);
  detail::solve_gap_roots(m, tol);
  return m;
}

// total increment of k over finite band j
inline double band_increment(const BandModel &m, int j);

// Shift the edges (edge i by at most max_shift[i]; 0 pins it) so that every
// finite band carries exactly pi. Edges printed to a few digits are
// inconsistent with a unit period at the 1e-7 level; Newton steps take the
// shift that is smallest in max-norm, in units of max_shift.
inline BandModel snap_to_unit_period(const BandModel &m0, const std::vector<double> &max_shift,
                                     double target = 1e-13) {
  int g = m0.genus(), ne = m0.edge_count();
  if ((int)max_shift.size() != ne) throw Error("snap: one shift bound per edge");
  std::vector<int> mov;
  for (int i = 0; i < ne; ++i)
    if (max_shift[i] > 0) mov.push_back(i);
  if ((int)mov.size() < g) throw Error("snap: fewer movable edges than bands to fix");
  int nm = (int)mov.size();
  BandModel m = m0;
  auto resid = [&](const BandModel &mm) {
    std::vector<double> r(g);
    for (int j = 1; j <= g; ++j) r[j - 1] = detail::fg_band_full(mm, j) - pi;
    return r;
  };
  auto rebuild = [&](std::vector<double> e) { return build_finite_gap_model(std::move(e), m0.tol); };
  for (int it = 0; it < 30; ++it) {
    auto r = resid(m);
    double nr = 0;
    for (double x : r) nr = std::max(nr, std::abs(x));
    if (nr < target) break;
    // Jacobian wrt scaled shifts y_c = dE_c / max_shift_c
    std::vector<std::vector<double>> J(g, std::vector<double>(nm));
    for (int c = 0; c < nm; ++c) {
      auto e = m.edges;
      double h = 1e-6 * std::max(1.0, std::abs(e[mov[c]]));
      e[mov[c]] += h;
      auto rp = resid(rebuild(e));
      for (int k = 0; k < g; ++k) J[k][c] = (rp[k] - r[k]) / h * max_shift[mov[c]];
    }
    std::vector<double> b(g);
    for (int i = 0; i < g; ++i) b[i] = -r[i];
    auto y = detail::minmax_solution(J, b);
    auto e = m.edges;
    for (int c = 0; c < nm; ++c) e[mov[c]] += y[c] * max_shift[mov[c]];
    m = rebuild(e);
  }
  for (int i = 0; i < ne; ++i) {
    double s = std::abs(m.edges[i] - m0.edges[i]);
    if (s > std::max(max_shift[i], 0.0) * (1 + 1e-9))
      throw Error("snap: edge " + std::to_string(i + 1) + " would move by " + std::to_string(s) +
                  ", beyond its bound");
  }
  return m;
}

// ---------------------------------------------------------------------- ode
namespace detail {

template <class T> using St4 = std::array<T, 4>;
using St8 = std::array<double, 8>;

// fundamental system y1 (1,0), y2 (0,1) over one period: (y1, y1', y2, y2')
template <class T> St4<T> transfer(const BandModel &m, T E, int steps) {
  boost::numeric::odeint::runge_kutta_fehlberg78<St4<T>, double, St4<T>, double> st;
  auto sys = [&](const St4<T> &y, St4<T> &d, double x) {
    T q = m.V(x) - E;
    d = {y[1], q * y[0], y[3], q * y[2]};
  };
  St4<T> y{T(1), T(0), T(0), T(1)};
  double h = 1.0 / steps;
  for (int i = 0; i < steps; ++i) st.do_step(sys, y, i * h, h);
  return y;
}

// same, keeping every node (steps+1 states) for x-integrals
template <class T> std::vector<St4<T>> transfer_path(const BandModel &m, T E, int steps) {
  boost::numeric::odeint::runge_kutta_fehlberg78<St4<T>, double, St4<T>, double> st;
  auto sys = [&](const St4<T> &y, St4<T> &d, double x) {
    T q = m.V(x) - E;
    d = {y[1], q * y[0], y[3], q * y[2]};
  };
  std::vector<St4<T>> out;
  out.reserve(steps + 1);
  St4<T> y{T(1), T(0), T(0), T(1)};
  out.push_back(y);
  double h = 1.0 / steps;
  for (int i = 0; i < steps; ++i) {
    st.do_step(sys, y, i * h, h);
    out.push_back(y);
  }
  return out;
}

// discriminant and its E-derivative (variational equations)
inline std::pair<double, double> disc_d(const BandModel &m, double E) {
  boost::numeric::odeint::runge_kutta_fehlberg78<St8> st;
  auto sys = [&](const St8 &y, St8 &d, double x) {
    double q = m.V(x) - E;
    d = {y[1], q * y[0], y[3], q * y[2], y[5], q * y[4] - y[0], y[7], q * y[6] - y[2]};
  };
  St8 y{1, 0, 0, 1, 0, 0, 0, 0};
  double h = 1.0 / m.steps;
  for (int i = 0; i < m.steps; ++i) st.do_step(sys, y, i * h, h);
  return {y[0] + y[3], y[4] + y[7]};
}

} // namespace detail

inline double discriminant(const BandModel &m, double E) {
  auto y = detail::transfer<double>(m, E, m.steps);
  return y[0] + y[3];
}
inline cplx discriminant(const BandModel &m, cplx E) {
  auto y = detail::transfer<cplx>(m, E, m.steps);
  return y[0] + y[3];
}
inline double discriminant_derivative(const BandModel &m, double E) { return detail::disc_d(m, E).second; }

// Edges are the points where |Delta| = 2; a gap is the stretch around an
// extremum of Delta with |Delta| > 2. We stop at the first gap that is closed
// to within gap_tol: bands beyond it are merged into the unbounded last band.
inline BandModel build_ode_model(std::vector<CosTerm> potential, double tol = 1e-12, double cap = 100,
                                 double gap_tol = 1e-9) {
  if (!(tol > 0)) throw Error("ode model: tolerance must be positive");
  BandModel m;
  m.backend = Backend::ode;
  m.potential = std::move(potential);
  m.tol = tol;
  m.cap = cap;
  double vmax = 0;
  for (auto &t : m.potential) vmax += std::abs(t.a);
  double emin = -vmax - 1;
  // step count: double until the determinant and Delta settle
  int N = 32;
  for (;; N *= 2) {
    if (N > 1 << 16) throw Error("ode model: integrator cannot reach the determinant tolerance");
    bool ok = true;
    for (double E : {emin, cap}) {
      auto y1 = detail::transfer<double>(m, E, N);
      auto y2 = detail::transfer<double>(m, E, 2 * N);
      double det = y1[0] * y1[3] - y1[1] * y1[2];
      double d1 = y1[0] + y1[3], d2 = y2[0] + y2[3];
      if (std::abs(det - 1) > 1e-12 || std::abs(d1 - d2) > tol * std::max(1.0, std::abs(d1))) ok = false;
    }
    if (ok) break;
  }
  m.steps = N;
  // extrema of Delta on a grid
  double dE = 0.05;
  std::vector<double> ext;
  double prev = detail::disc_d(m, emin).second;
  for (double E = emin + dE; E <= cap; E += dE) {
    double cur = detail::disc_d(m, E).second;
    if ((prev < 0) != (cur < 0)) {
      auto f = [&](double x) { return detail::disc_d(m, x).second; };
      boost::math::tools::eps_tolerance<double> et(50);
      std::uintmax_t it = 100;
      auto r = boost::math::tools::toms748_solve(f, E - dE, E, prev, cur, et, it);
      ext.push_back(0.5 * (r.first + r.second));
    }
    prev = cur;
  }
  auto root = [&](double lo, double hi, double s) {
    auto f = [&](double x) { return discriminant(m, x) - 2 * s; };
    double flo = f(lo), fhi = f(hi);
    if ((flo < 0) == (fhi < 0)) throw Error("ode model: cannot bracket a band edge");
    boost::math::tools::eps_tolerance<double> et(52);
    std::uintmax_t it = 200;
    auto r = boost::math::tools::toms748_solve(f, lo, hi, flo, fhi, et, it);
    return 0.5 * (r.first + r.second);
  };
  if (ext.empty()) throw Error("ode model: no gap below the energy cap");
  m.edges.push_back(root(emin, ext[0], 1));
  size_t i = 0;
  for (; i < ext.size(); ++i) {
    double d = discriminant(m, ext[i]);
    if (std::abs(d) - 2 <= gap_tol) break;
    double s = d > 0 ? 1 : -1;
    double left = i == 0 ? m.edges[0] : ext[i - 1];
    double right = i + 1 < ext.size() ? ext[i + 1] : cap;
    m.edges.push_back(root(left, ext[i], s));
    m.edges.push_back(root(ext[i], right, s));
  }
  if (m.edges.size() < 3)
    throw Error("ode model: all gaps closed below the cap; open gaps are required");
  for (size_t k = i; k < ext.size(); ++k) m.touch.push_back(ext[k]);
  return m;
}

// --------------------------------------------------------- quasi-momentum
namespace detail {

// k_p on the real axis for the ode backend
inline cplx ode_k_real(const BandModel &m, double E, Where w) {
  double d = discriminant(m, E);
  if (w.zone == Zone::below) return {0.0, std::acosh(std::max(1.0, d / 2))};
  if (w.zone == Zone::gap) return {pi * w.n, std::acosh(std::max(1.0, std::abs(d) / 2))};
  int n = w.n;
  if (n == m.genus() + 1)
    for (double t : m.touch)
      if (E > t) ++n;
  double c = std::acos(std::clamp(d / 2, -1.0, 1.0));
  return {n % 2 == 1 ? pi * (n - 1) + c : pi * n - c, 0.0};
}

inline cplx nearest_branch(cplx c, cplx ref) {
  // candidates +-c + 2 pi l
  cplx best = c;
  double bd = 1e300;
  for (int s : {1, -1}) {
    cplx b = double(s) * c;
    double l = std::round((ref.real() - b.real()) / (2 * pi));
    cplx cand = b + 2 * pi * l;
    if (std::abs(cand - ref) < bd) {
      bd = std::abs(cand - ref);
      best = cand;
    }
  }
  return best;
}

} // namespace detail

inline QuasiMomentumValue quasi_momentum(const BandModel &m, double E) {
  Where w = locate(m, E);
  QuasiMomentumValue q;
  q.zone = w.zone;
  q.n = w.n;
  q.below_spectrum = w.zone == Zone::below;
  if (m.backend == Backend::finite_gap) {
    double v = detail::fg_k_real(m, E, w);
    if (w.zone == Zone::below) q.k = {0.0, v};
    else if (w.zone == Zone::gap) q.k = {pi * w.n, v};
    else q.k = {v, 0.0};
  } else {
    q.k = detail::ode_k_real(m, E, w);
  }
  return q;
}

inline cplx kp(const BandModel &m, double E) { return quasi_momentum(m, E).k; }

// dk_p/dE; throws at a band edge
inline cplx quasi_momentum_derivative(const BandModel &m, cplx E) {
  if (E.imag() == 0)
    for (double e : m.edges)
      if (E.real() == e) throw Error("k' evaluated at a band edge (square-root singularity)");
  if (m.backend == Backend::finite_gap) {
    if (E.imag() >= 0) return detail::fg_kprime(m, E);
    return std::conj(detail::fg_kprime(m, std::conj(E)));
  }
  if (E.imag() != 0) {
    // central difference of the continued k
    throw Error("ode k' at complex E: use central differences of quasi_momentum");
  }
  auto [d, dp] = detail::disc_d(m, E.real());
  cplx k = kp(m, E.real());
  cplx s = std::sin(k);
  if (std::abs(s) < 1e-300) throw Error("k' evaluated at a band edge (square-root singularity)");
  return -dp / (2.0 * s);
}

// Complex E: continuation from the real axis along a vertical segment (upper
// half-plane); the lower half-plane is reached across the bands by reflection.
inline cplx quasi_momentum(const BandModel &m, cplx E, int track_steps = 64) {
  if (E.imag() == 0) return kp(m, E.real());
  if (E.imag() < 0) return std::conj(quasi_momentum(m, std::conj(E), track_steps));
  double x = E.real(), Y = E.imag();
  cplx k0 = kp(m, x);
  if (m.backend == Backend::finite_gap) {
    auto f = [&](double u) { return detail::fg_kprime(m, cplx(x, Y * u * u)) * cplx(0, 2 * Y * u); };
    return k0 + integrate(f, 0.0, 1.0, 1e-13).value;
  }
  cplx k = k0;
  for (int i = 1; i <= track_steps; ++i) {
    double u = double(i) / track_steps;
    cplx d = discriminant(m, cplx(x, Y * u * u));
    k = detail::nearest_branch(std::acos(d / 2.0), k);
  }
  return k;
}

inline double band_increment(const BandModel &m, int j) {
  if (m.backend == Backend::finite_gap) return detail::fg_band_full(m, j);
  return (kp(m, m.edge(2 * j)) - kp(m, m.edge(2 * j - 1))).real();
}

} // namespace adiaspec
