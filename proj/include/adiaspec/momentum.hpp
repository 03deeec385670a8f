#pragma once
// Complex momentum kappa(zeta) = k(E - alpha cos zeta), its branch points on
// the boundary of the half-strip {0 <= Re zeta <= pi, Im zeta >= 0}, and the
// window checks.

#include "bands.hpp"

#include <array>
#include <limits>
#include <string>
#include <vector>

namespace adiaspec {

inline constexpr double inf = std::numeric_limits<double>::infinity();

struct BranchPoint {
  int j;
  cplx zeta;
  bool degenerate; // |x_j| == 1, the point sits at 0 or pi
};

struct BranchPointSet {
  int n = 1;
  double E = 0, alpha = 0;
  double z2n = 0, z2n1 = 0;      // real points zeta_{2n} < zeta_{2n+1}
  std::vector<double> im_axis;   // im_axis[j-1] = Im zeta_j, j = 1 .. 2n-1
  std::vector<double> pi_line;   // pi_line[i] = Im zeta_{2n+2+i}
  bool lower_absent = false;     // 2n-2 <= 0
  bool complete = true;
  std::string diagnostic;
  std::vector<BranchPoint> points; // every resolved point, by index j

  // Im zeta_j for points off the real segment; +inf for j <= 0, NaN if not computed
  double im(int j) const {
    if (j <= 0) return inf;
    if (j <= (int)im_axis.size()) return im_axis[j - 1];
    int i = j - (2 * n + 2);
    if (i >= 0 && i < (int)pi_line.size()) return pi_line[i];
    return std::numeric_limits<double>::quiet_NaN();
  }
};

inline BranchPoint branch_point(double E, double alpha, double Ej, int j) {
  double x = (E - Ej) / alpha;
  if (std::abs(x) <= 1) return {j, cplx(std::acos(x), 0.0), std::abs(x) == 1};
  if (x > 1) return {j, cplx(0.0, std::acosh(x)), false};
  return {j, cplx(pi, std::acosh(-x)), false};
}

inline BranchPointSet branch_points(const BandModel &m, double E, double alpha, int n,
                                    double x_max = 1e6) {
  if (!(alpha > 0)) throw Error("branch points: alpha must be positive");
  BranchPointSet bp;
  bp.n = n;
  bp.E = E;
  bp.alpha = alpha;
  bp.lower_absent = 2 * n - 2 <= 0;
  int ne = m.edge_count();
  auto note = [&](const std::string &s) {
    bp.complete = false;
    if (!bp.diagnostic.empty()) bp.diagnostic += "; ";
    bp.diagnostic += s;
  };
  if (2 * n + 1 > ne) {
    note("gap index beyond the model");
    return bp;
  }
  for (int j = 1; j <= ne; ++j) {
    double x = (E - m.edge(j)) / alpha;
    if (std::abs(x) > x_max) continue;
    auto p = branch_point(E, alpha, m.edge(j), j);
    bp.points.push_back(p);
    if (p.degenerate) note("degenerate branch point zeta_" + std::to_string(j));
  }
  auto at = [&](int j) -> const BranchPoint * {
    for (auto &p : bp.points)
      if (p.j == j) return &p;
    return nullptr;
  };
  auto a = at(2 * n), b = at(2 * n + 1);
  if (!a || !b || a->zeta.imag() != 0 || b->zeta.imag() != 0) {
    note("zeta_2n, zeta_2n+1 not on (0, pi): TIBM fails");
  } else {
    bp.z2n = a->zeta.real();
    bp.z2n1 = b->zeta.real();
  }
  for (int j = 1; j <= 2 * n - 1; ++j) {
    auto p = at(j);
    if (!p || p->zeta.real() != 0 || p->zeta.imag() <= 0) {
      note("zeta_" + std::to_string(j) + " not on the imaginary axis");
      bp.im_axis.push_back(std::numeric_limits<double>::quiet_NaN());
    } else {
      bp.im_axis.push_back(p->zeta.imag());
    }
  }
  for (int j = 2 * n + 2; j <= ne; ++j) {
    auto p = at(j);
    if (!p) break; // beyond the cap
    if (p->zeta.real() != pi || p->zeta.imag() <= 0) {
      note("zeta_" + std::to_string(j) + " not on Re zeta = pi");
      break;
    }
    bp.pi_line.push_back(p->zeta.imag());
  }
  if (bp.pi_line.empty()) note("no branch point on Re zeta = pi (upper band unbounded)");
  return bp;
}

struct KappaValue {
  cplx value;
  bool near_branch = false;
};

inline KappaValue kappa_p(const BandModel &m, double E, double alpha, cplx zeta) {
  cplx w = E - alpha * std::cos(zeta);
  KappaValue r;
  for (int j = 1; j <= m.edge_count(); ++j) {
    auto p = branch_point(E, alpha, m.edge(j), j);
    if (std::abs(p.zeta - zeta) < 1e-8) r.near_branch = true;
  }
  if (std::abs(w.imag()) <= 1e-14 * (1 + std::abs(w.real())))
    r.value = kp(m, w.real());
  else
    r.value = quasi_momentum(m, w);
  return r;
}

struct WindowCheck {
  int n = 0;
  bool tibm_ok = false;
  std::array<double, 4> margins{}; // E_2n-(E-a), (E+a)-E_2n+1, (E-a)-E_2n-1, E_2n+2-(E+a)
  bool T_ok = false;
  double T_margin = std::numeric_limits<double>::quiet_NaN();
};

inline std::array<double, 4> tibm_margins(const BandModel &m, double E, double alpha, int n) {
  return {m.edge(2 * n) - (E - alpha), (E + alpha) - m.edge(2 * n + 1), (E - alpha) - m.edge(2 * n - 1),
          m.edge(2 * n + 2) - (E + alpha)};
}

// scans gaps in increasing order; the window has width 2 alpha so at most one fits
inline WindowCheck check_tibm(const BandModel &m, double E, double alpha) {
  WindowCheck w;
  double best = -inf;
  for (int n = 1; 2 * n + 2 <= m.edge_count(); ++n) {
    auto mg = tibm_margins(m, E, alpha, n);
    double lo = std::min(std::min(mg[0], mg[1]), std::min(mg[2], mg[3]));
    if (lo > 0) {
      w.n = n;
      w.tibm_ok = true;
      w.margins = mg;
      return w;
    }
    if (lo > best) {
      best = lo;
      w.n = n;
      w.margins = mg;
    }
  }
  return w;
}

struct ActionProfile;

// pointwise (T): 2 pi min(Im zeta_{2n-2}, Im zeta_{2n+3}) - max(S_h, S_v0, S_vpi)
inline double T_margin(const BranchPointSet &bp, double Sh, double Sv0, double Svpi) {
  double lo = bp.im(2 * bp.n - 2);
  double hi = bp.im(2 * bp.n + 3);
  if (std::isnan(hi)) throw Error("(T): zeta_{2n+3} not available under the branch-point cap");
  if (std::isnan(lo)) throw Error("(T): zeta_{2n-2} not available");
  return 2 * pi * std::min(lo, hi) - std::max(Sh, std::max(Sv0, Svpi));
}

} // namespace adiaspec
