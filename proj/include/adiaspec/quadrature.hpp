#pragma once
// Thin layer over Boost.Math Gauss-Kronrod with the changes of variable used
// for square-root endpoints.

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>
#include <stdexcept>

namespace adiaspec {

using cplx = std::complex<double>;
inline constexpr double pi = std::numbers::pi;

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

template <class T> struct Quad {
  T value{};
  double err = 0;
};

// globally adaptive G7/K15 (bisect the worst panel); relative tolerance `tol`.
// Boost's own recursion compares an unscaled panel error against a scaled
// estimate and runs to full depth on short intervals, so only its
// single-panel rule is used.
template <class F>
auto integrate(F &&f, double a, double b, double tol = 1e-12, unsigned max_panels = 4000)
    -> Quad<decltype(f(a))> {
  using R = decltype(f(a));
  using GK = boost::math::quadrature::gauss_kronrod<double, 15>;
  using std::abs;
  if (a == b) return {R{}, 0.0};
  tol = std::max(tol, 1e-14);
  struct Panel {
    double a, b;
    R v;
    double e;
  };
  auto rule = [&](double lo, double hi) {
    double e = 0;
    R v = GK::integrate(f, lo, hi, 0, 0.0, &e);
    return Panel{lo, hi, v, e * 0.5 * std::abs(hi - lo)};
  };
  std::vector<Panel> ps{rule(a, b)};
  auto cmp = [](const Panel &x, const Panel &y) { return x.e < y.e; };
  R total = ps[0].v;
  double err = ps[0].e;
  while (err > tol * abs(total) && err > 1e-300 && ps.size() < max_panels) {
    std::pop_heap(ps.begin(), ps.end(), cmp);
    Panel w = ps.back();
    ps.pop_back();
    double mid = 0.5 * (w.a + w.b);
    if (mid == w.a || mid == w.b) {
      ps.push_back(w);
      std::push_heap(ps.begin(), ps.end(), cmp);
      break;
    }
    for (auto &&q : {rule(w.a, mid), rule(mid, w.b)}) {
      ps.push_back(q);
      std::push_heap(ps.begin(), ps.end(), cmp);
    }
    total = R{};
    err = 0;
    for (auto &q : ps) total += q.v, err += q.e;
  }
  if (!std::isfinite(abs(total))) throw Error("quadrature produced a non-finite value");
  return {total, err};
}

// int_a^b g(t) dt / sqrt((t-a)(b-t)) with t = a + (b-a)(1-cos u)/2, over u in [u0, u1]
template <class G>
auto integrate_cosmap(G &&g, double a, double b, double u0, double u1, double tol = 1e-12) {
  auto f = [&](double u) { return g(a + 0.5 * (b - a) * (1 - std::cos(u))); };
  return integrate(f, u0, u1, tol);
}

// cos-map parameter of x in [a,b]
inline double cosmap_u(double a, double b, double x) {
  double c = 1 - 2 * (x - a) / (b - a);
  if (c > 1) c = 1;
  if (c < -1) c = -1;
  return std::acos(c);
}

// int_a^b f(x) dx where f ~ sqrt-type at x=a (singular_at_a) or at b:
// x = a + (b-a) u^2  resp.  x = b - (b-a) u^2
template <class F>
auto integrate_sqrt_end(F &&f, double a, double b, bool singular_at_a, double tol = 1e-12) {
  double L = b - a;
  auto g = [&](double u) {
    double x = singular_at_a ? a + L * u * u : b - L * u * u;
    return f(x) * (2 * L * u);
  };
  return integrate(g, 0.0, 1.0, tol);
}

} // namespace adiaspec
