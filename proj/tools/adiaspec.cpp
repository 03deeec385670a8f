// adiaspec command-line front end
#include <adiaspec/adiaspec.hpp>

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <random>
#include <set>

using namespace adiaspec;
namespace fs = std::filesystem;
using io::json;

namespace {

struct Global {
  std::string config;
  int threads = 1;
  double tol = 1e-11;
  unsigned long long seed = 1;
  std::string out_dir;
  std::string format = "csv";
};

// options that may also come from the config file; command line wins
class Binder {
public:
  CLI::Option *bind(CLI::App *owner, CLI::Option *o, const std::string &scope, std::vector<std::string> keys) {
    // out_dir and out-dir both work in a config
    for (std::size_t i = 0, n = keys.size(); i < n; ++i) {
      auto d = keys[i];
      std::replace(d.begin(), d.end(), '_', '-');
      if (d != keys[i]) keys.push_back(d);
    }
    for (auto &k : keys) {
      known_.insert(k);
      if (!scope.empty()) known_.insert(scope + "." + k);
    }
    items_.push_back({owner, o, scope, std::move(keys)});
    return o;
  }

  void apply(const io::Config &cfg) const {
    for (auto &[k, v] : cfg.values())
      if (!known_.count(k)) throw Error("config: unknown key '" + k + "'");
    for (auto &it : items_) {
      if (it.opt->count() > 0) continue;
      if (!it.scope_parsed()) continue;
      for (auto &k : it.keys) {
        std::string hit;
        if (!it.scope.empty() && cfg.has(it.scope + "." + k)) hit = it.scope + "." + k;
        else if (cfg.has(k)) hit = k;
        if (hit.empty()) continue;
        it.opt->add_result(cfg.as_arg(hit));
        it.opt->run_callback();
        break;
      }
    }
  }

  struct Item {
    CLI::App *owner;
    CLI::Option *opt;
    std::string scope;
    std::vector<std::string> keys;
    bool scope_parsed() const {
      return owner->get_parent() == nullptr || owner->parsed();
    }
  };

private:
  std::vector<Item> items_;
  std::set<std::string> known_;
};

struct ModelArgs {
  std::string edges, potential;
  double cap = 100, ode_tol = 1e-12;
  bool snap = false;
};

void add_model_opts(CLI::App *s, ModelArgs &a, Binder &b) {
  std::string sc = s->get_name();
  b.bind(s, s->add_option("--edges", a.edges, "band edges E1,E2,... (finite-gap backend)"), sc, {"edges"});
  b.bind(s, s->add_option("--potential", a.potential, "cosine series m:A,m:A (ode backend)"), sc,
         {"potential", "potential.cos"});
  b.bind(s, s->add_option("--cap", a.cap, "ode backend: edge search energy cap"), sc, {"cap"});
  b.bind(s, s->add_option("--ode-tol", a.ode_tol, "ode backend: discriminant tolerance"), sc, {"ode_tol"});
  b.bind(s, s->add_flag("--snap", a.snap, "shift edges within their printed resolution to a unit period"), sc,
         {"snap"});
}

BandModel make_model(const ModelArgs &a) {
  if (a.edges.empty() == a.potential.empty())
    throw Error("exactly one of --edges (finite-gap) or --potential (ode) is required");
  if (!a.edges.empty()) {
    auto strs = io::split(a.edges, ",");
    std::vector<double> e;
    for (auto &s : strs) e.push_back(io::to_double(s));
    auto m = build_finite_gap_model(e);
    if (a.snap) m = snap_to_unit_period(m, io::printed_resolution(strs));
    return m;
  }
  if (a.snap) throw Error("--snap applies to band edges only");
  return build_ode_model(io::parse_potential(a.potential), a.ode_tol, a.cap);
}

std::string backend_name(const BandModel &m) { return m.backend == Backend::ode ? "ode" : "finite-gap"; }

class Output {
public:
  explicit Output(const Global &g) : g_(g) {
    if (!g.out_dir.empty()) fs::create_directories(g.out_dir);
  }
  std::string path(const std::string &stem, const std::string &ext) const {
    return (fs::path(g_.out_dir.empty() ? "." : g_.out_dir) / (stem + "." + ext)).string();
  }
  void table(const io::Table &t, const std::string &stem) const {
    auto emit = [&](std::ostream &os) {
      if (g_.format == "json") os << t.to_json().dump(2) << "\n";
      else t.write_csv(os);
    };
    if (g_.out_dir.empty()) emit(std::cout);
    else {
      std::ofstream f(path(stem, g_.format == "json" ? "json" : "csv"));
      emit(f);
    }
  }
  void object(const json &j, const std::string &stem) const {
    if (g_.out_dir.empty()) std::cout << j.dump(2) << "\n";
    else std::ofstream(path(stem, "json")) << j.dump(2) << "\n";
  }

private:
  const Global &g_;
};

int pick_n(const BandModel &m, double E, double alpha, int n_override) {
  if (n_override > 0) return n_override;
  auto w = check_tibm(m, E, alpha);
  if (!w.tibm_ok) throw Error("TIBM fails at E=" + io::num(E) + ", alpha=" + io::num(alpha) + " for every gap");
  return w.n;
}

std::vector<io::Column> action_columns(bool with_eps) {
  std::vector<io::Column> c = {{"E", "energy"},       {"alpha", "energy"},     {"n", ""},
                               {"Phi0", "action"},    {"Phipi", "action"},     {"Sh0", "action"},
                               {"Shpi", "action"},    {"Sh", "action"},        {"Sv0", "action"},
                               {"Svpi", "action"},    {"dPhi0_dE", "action/energy"},
                               {"dPhipi_dE", "action/energy"}, {"quad_err", "action"}};
  if (with_eps)
    for (io::Column x : {io::Column{"epsilon", ""}, io::Column{"log10_th", "log10"},
                         io::Column{"log10_tv0", "log10"}, io::Column{"log10_tvpi", "log10"}})
      c.push_back(x);
  return c;
}

std::vector<io::Cell> action_row(const ActionProfile &p, double eps) {
  std::vector<io::Cell> r = {p.E,  p.alpha, (long)p.n, p.Phi0,  p.Phipi,  p.Sh0,    p.Shpi,
                             p.Sh, p.Sv0,   p.Svpi,    p.dPhi0, p.dPhipi, p.err};
  if (eps > 0) {
    auto t = tunneling(p, eps);
    r.insert(r.end(), {eps, io::log10_of_ln(t.log_th), io::log10_of_ln(t.log_tv0), io::log10_of_ln(t.log_tvpi)});
  }
  return r;
}

PeriodicConstants periodic_constants(const BandModel &m, int n, double lambda_user) {
  if (lambda_user > 0) {
    if (lambda_user < 1) throw Error("--lambda-n must be >= 1");
    return periodic_constants_fallback(n, lambda_user, false);
  }
  if (m.backend == Backend::ode) return compute_theta_n(m, n);
  return periodic_constants_fallback(n, 1.0, true);
}

// nearest ladder point of type nu to E
LadderPoint nearest_ladder_point(const BandModel &m, double alpha, int n, double E, double eps, Nu nu,
                                 ActionOptions opt) {
  auto fn = model_profile(m, alpha, n, opt);
  auto p = fn(E);
  double slope = std::abs(nu == Nu::pi ? p.dPhipi : p.dPhi0);
  auto mg = tibm_margins(m, E, alpha, n);
  double room = 0.9 * *std::min_element(mg.begin(), mg.end());
  double w = std::min(room, 2 * pi * eps / slope);
  auto L = quantization_ladder(fn, E - w, E + w, eps, nu);
  if (L.points.empty()) throw Error("no ladder point near E=" + io::num(E));
  auto best = L.points.front();
  for (auto &q : L.points)
    if (std::abs(q.E - E) < std::abs(best.E - E)) best = q;
  return best;
}

struct MatrixArgs {
  double alpha = 0, energy = 0, eps = 0.05, theta = 0, offset = 0;
  std::string matrix = "U", ladder = "none";
  int n = 0;
};

void add_matrix_opts(CLI::App *s, MatrixArgs &a, Binder &b) {
  std::string sc = s->get_name();
  b.bind(s, s->add_option("--alpha", a.alpha, "amplitude of the adiabatic term")->required(false), sc, {"alpha"});
  b.bind(s, s->add_option("--energy", a.energy, "reference energy"), sc, {"energy"});
  b.bind(s, s->add_option("--epsilon", a.eps, "adiabatic parameter"), sc, {"epsilon"});
  b.bind(s, s->add_option("--theta", a.theta, "theta_n (default: computed for ode, 1 otherwise)"), sc, {"theta"});
  b.bind(s, s->add_option("--offset", a.offset, "energy offset from the reference point"), sc, {"offset"});
  b.bind(s, s->add_option("--matrix", a.matrix, "U (gauge-transformed) or pi")->check(CLI::IsMember({"U", "pi"})), sc,
         {"matrix"});
  b.bind(s, s->add_option("--ladder", a.ladder, "snap the reference energy to the nearest ladder point: none|pi|0")
             ->check(CLI::IsMember({"none", "pi", "0"})),
         sc, {"ladder"});
  b.bind(s, s->add_option("--n", a.n, "gap index (default: detected from TIBM)"), sc, {"n"});
}

struct BuiltModel {
  ModelParams q;
  double E = 0;
  int n = 1;
  std::function<Mat2(double)> M, Mraw;
};

BuiltModel build_matrix_model(const BandModel &m, const MatrixArgs &a, ActionOptions opt) {
  if (!(a.alpha > 0)) throw Error("--alpha must be positive");
  BuiltModel b;
  b.n = pick_n(m, a.energy, a.alpha, a.n);
  double theta = a.theta > 0 ? a.theta : (m.backend == Backend::ode ? compute_theta_n(m, b.n).theta : 1.0);
  b.E = a.energy;
  if (a.ladder != "none") {
    Nu nu = a.ladder == "pi" ? Nu::pi : Nu::zero;
    auto lp = nearest_ladder_point(m, a.alpha, b.n, a.energy, a.eps, nu, opt);
    b.E = lp.E;
    b.q = model_params_at(action_profile(m, b.E, a.alpha, b.n, opt), a.eps, nu, lp.l, theta);
  } else {
    b.q = model_params(action_profile(m, b.E, a.alpha, b.n, opt), a.eps, theta);
  }
  auto q = b.q;
  double dE = a.offset;
  // M^U is written for the pi role; at a type-0 point use the swapped parameters
  if (a.ladder == "0") q = swap_roles(q);
  if (a.matrix == "U") {
    b.M = [q, dE](double z) { return build_M_U_unimodular(q, frac(z), dE); };
    b.Mraw = [q, dE](double z) { return build_M_U(q, frac(z), dE); };
  } else {
    b.M = [q, dE](double z) { return build_M_pi_unimodular(q, frac(z), dE); };
    b.Mraw = [q, dE](double z) { return build_M_pi(q, frac(z), dE); };
  }
  return b;
}

// ------------------------------------------------------------ commands
int cmd_bands(const Global &g, const ModelArgs &ma, const std::string &energies) {
  auto m = make_model(ma);
  Output out(g);
  io::Table t({{"kind", ""},
               {"n", ""},
               {"lo", "energy"},
               {"hi", "energy"},
               {"increment", "rad"},
               {"lambda", "energy"},
               {"max_im_k", "rad"}});
  int g_ = m.genus();
  for (int j = 1; j <= g_; ++j) {
    t.add({std::string("band"), (long)j, m.edge(2 * j - 1), m.edge(2 * j), band_increment(m, j), std::nan(""),
           std::nan("")});
    double a = m.edge(2 * j), b = m.edge(2 * j + 1), best = 0;
    for (int i = 1; i < 400; ++i) best = std::max(best, kp(m, a + (b - a) * i / 400.0).imag());
    double lam = m.backend == Backend::finite_gap ? m.lambda[j - 1] : std::nan("");
    t.add({std::string("gap"), (long)j, a, b, 0.0, lam, best});
  }
  t.add({std::string("band"), (long)(g_ + 1), m.edges.back(), inf, inf, std::nan(""), std::nan("")});
  out.table(t, "bands");
  std::cerr << "bands: backend " << backend_name(m) << ", " << m.edge_count() << " edges, genus " << g_ << "\n";
  if (!energies.empty()) {
    io::Table k({{"E", "energy"}, {"zone", ""}, {"n", ""}, {"re_k", "rad"}, {"im_k", "rad"},
                 {"re_dk_dE", "rad/energy"}, {"im_dk_dE", "rad/energy"}});
    for (double E : io::parse_list(energies)) {
      auto q = quasi_momentum(m, E);
      cplx d(std::nan(""), std::nan(""));
      try {
        d = quasi_momentum_derivative(m, cplx(E, 0));
      } catch (const Error &) {
      }
      const char *zone = q.zone == Zone::band ? "band" : q.zone == Zone::gap ? "gap" : "below";
      k.add({E, std::string(zone), (long)q.n, q.k.real(), q.k.imag(), d.real(), d.imag()});
    }
    out.table(k, "bands_k");
  }
  return 0;
}

int cmd_window(const Global &g, const ModelArgs &ma, double alpha, double E, int n_over, bool csv) {
  auto m = make_model(ma);
  WindowCheck w = check_tibm(m, E, alpha);
  if (n_over > 0) {
    w.n = n_over;
    auto mg = tibm_margins(m, E, alpha, n_over);
    w.margins = mg;
    w.tibm_ok = std::all_of(mg.begin(), mg.end(), [](double x) { return x > 0; });
  }
  json bps = json::array();
  if (w.n > 0) {
    auto bp = branch_points(m, E, alpha, w.n);
    for (auto &p : bp.points)
      bps.push_back({{"j", p.j}, {"re", p.zeta.real()}, {"im", p.zeta.imag()}, {"degenerate", p.degenerate}});
    if (w.tibm_ok) {
      auto prof = action_profile(m, E, alpha, w.n, {g.tol});
      w = check_T(bp, prof, w);
    }
  }
  Output out(g);
  if (csv) {
    io::Table t({{"E", "energy"}, {"alpha", "energy"}, {"n", ""}, {"tibm_ok", "bool"},
                 {"margin_1", "energy"}, {"margin_2", "energy"}, {"margin_3", "energy"}, {"margin_4", "energy"},
                 {"T_ok", "bool"}, {"T_margin", "action"}});
    t.add({E, alpha, (long)w.n, w.tibm_ok, w.margins[0], w.margins[1], w.margins[2], w.margins[3], w.T_ok,
           w.T_margin});
    out.table(t, "window");
  } else {
    json j = {{"E", E},
              {"alpha", alpha},
              {"n", w.n},
              {"tibm_ok", w.tibm_ok},
              {"margins", {w.margins[0], w.margins[1], w.margins[2], w.margins[3]}},
              {"T_ok", w.T_ok},
              {"T_margin", std::isnan(w.T_margin) ? json(nullptr) : json(w.T_margin)},
              {"branch_points", bps}};
    out.object(j, "window");
  }
  std::cerr << "window: n=" << w.n << " TIBM " << (w.tibm_ok ? "ok" : "fails") << ", (T) "
            << (w.tibm_ok ? (w.T_ok ? "ok" : "fails") : "not evaluated") << "\n";
  return 0;
}

int cmd_actions(const Global &g, const ModelArgs &ma, double alpha, const std::string &energies, double eps,
                int n_over) {
  auto m = make_model(ma);
  io::Table t(action_columns(eps > 0));
  for (double E : io::parse_list(energies)) {
    int n = pick_n(m, E, alpha, n_over);
    auto p = action_profile(m, E, alpha, n, {g.tol});
    t.add(action_row(p, eps));
    std::cerr << "actions: E=" << io::num(E) << " n=" << n << " Phi0=" << io::num(p.Phi0)
              << " Phipi=" << io::num(p.Phipi) << " Sh=" << io::num(p.Sh) << " Sv0=" << io::num(p.Sv0)
              << " Svpi=" << io::num(p.Svpi) << "\n";
  }
  Output(g).table(t, "actions");
  return 0;
}

int cmd_spectrum(const Global &g, const ModelArgs &ma, double alpha, const std::string &window, double eps,
                 double lambda_n, double c, const std::string &dio, int n_over) {
  auto m = make_model(ma);
  auto J = io::parse_range(window, false);
  int n = pick_n(m, 0.5 * (J.lo + J.hi), alpha, n_over);
  auto pc = periodic_constants(m, n, lambda_n);
  bool dio_ok = false;
  if (!dio.empty()) {
    auto ab = io::parse_list(dio);
    if (ab.size() != 2) throw Error("--diophantine expects a,b");
    dio_ok = diophantine_member(eps, ab[0], ab[1]).member;
  }
  auto cat = spectrum_catalog(m, alpha, n, J.lo, J.hi, eps, pc.Lambda, c, dio_ok, {g.tol});
  io::Table t({{"nu", ""},
               {"l", ""},
               {"E", "energy"},
               {"center", "energy"},
               {"length_log10", "log10 energy"},
               {"resonant", "bool"},
               {"log_lambda", "log10"},
               {"theta_asym", "1/length"},
               {"label", ""},
               {"shift", "energy"},
               {"dist", "energy"}});
  int nonres = 0;
  for (auto &e : cat.entries) {
    nonres += !e.resonant;
    t.add({std::string(e.nu == Nu::pi ? "pi" : "0"), (long)e.l, e.E, e.center,
           e.resonant ? std::nan("") : io::log10_of_ln(e.log_length), e.resonant, io::log10_of_ln(e.log_lambda),
           e.theta_asym, std::string(to_string(e.label)), e.shift, e.dist});
  }
  Output(g).table(t, "spectrum");
  std::cerr << "spectrum: n=" << n << " eps=" << io::num(eps) << " delta0=" << io::num(cat.delta0)
            << " Lambda_n=" << io::num(pc.Lambda) << (pc.fallback ? " (not computed)" : "") << "; "
            << cat.entries.size() << " ladder points, " << nonres << " non-resonant, DOS per interval "
            << io::num(cat.dos_increment()) << "\n";
  return 0;
}

int cmd_regionmap(const Global &g, const ModelArgs &ma, const std::string &ar, const std::string &er,
                  const std::string &svg) {
  auto m = make_model(ma);
  auto A = io::parse_range(ar, true), E = io::parse_range(er, true);
  auto r = region_map(m, A.values(), E.values(), g.threads, {g.tol});
  io::Table t({{"alpha", "energy"}, {"E", "energy"}, {"n", ""}, {"tibm_ok", "bool"}, {"T_ok", "bool"},
               {"T_margin", "action"}, {"Sh", "action"}, {"Sv0", "action"}, {"Svpi", "action"}, {"label", ""}});
  std::map<std::string, int> counts;
  for (auto &c : r.cells) {
    bool v = c.window.tibm_ok && c.label != ZoneLabel::invalid;
    t.add({c.alpha, c.E, (long)(c.window.tibm_ok ? c.window.n : 0), c.window.tibm_ok, c.window.T_ok,
           v ? c.window.T_margin : std::nan(""), v ? c.profile.Sh : std::nan(""), v ? c.profile.Sv0 : std::nan(""),
           v ? c.profile.Svpi : std::nan(""), std::string(to_string(c.label))});
    ++counts[to_string(c.label)];
  }
  Output out(g);
  out.table(t, "regionmap");
  std::string sp = svg.empty() ? out.path("regionmap", "svg") : svg;
  std::ofstream f(sp);
  if (!f) throw Error("cannot write " + sp);
  io::write_region_svg(f, r);
  std::cerr << "regionmap: " << r.cells.size() << " cells;";
  for (auto &[k, v] : counts) std::cerr << " " << k << "=" << v;
  std::cerr << "; svg " << sp << "\n";
  return 0;
}

int cmd_model(const Global &g, const ModelArgs &ma, const MatrixArgs &xa, const std::string &scan) {
  auto m = make_model(ma);
  auto b = build_matrix_model(m, xa, {g.tol});
  auto Z = io::parse_range(scan, true);
  auto sc = scalar_reduction(b.M, b.q.h);
  // the resolvent test samples one period on the same grid size
  auto rt = resolvent_test(sc.rho, sc.v, Z.steps);
  std::string verdict = rt.ok ? "resolvent" : "undecided";
  io::Table t({{"z", ""},
               {"log10_abs_M11", "log10"},
               {"log10_abs_M12", "log10"},
               {"re_rho", ""},
               {"im_rho", ""},
               {"re_v", ""},
               {"im_v", ""},
               {"det", ""},
               {"verdict", ""}});
  for (int i = 0; i < Z.steps; ++i) {
    double z = Z.lo + (Z.hi - Z.lo) * i / Z.steps;
    Mat2 M = b.Mraw(z);
    cplx r = sc.rho(z), v = sc.v(z);
    double det = xa.matrix == "U" ? det_M_U(xa.ladder == "0" ? swap_roles(b.q) : b.q, frac(z), xa.offset)
                                  : det_M_pi(xa.ladder == "0" ? swap_roles(b.q) : b.q, frac(z), xa.offset);
    t.add({z, std::log10(std::abs(M.a)), std::log10(std::abs(M.b)), r.real(), r.imag(), v.real(), v.imag(), det, verdict});
  }
  Output(g).table(t, "model");
  std::cerr << "model: E=" << io::num(b.E + xa.offset) << " h=" << io::num(b.q.h) << " max|rho|=" << io::num(rt.max_rho)
            << " min|v|=" << io::num(rt.min_v) << " windings (" << rt.wind_rho << "," << rt.wind_v
            << ") -> " << (rt.ok ? "E in the resolvent set" : "resolvent criterion not met") << "\n";
  return 0;
}

struct SimArgs {
  double alpha = 0, eps = 0.05, x_max = 0, L = 0, z = std::nan("");
  std::string energies;
  int z_count = 8, spu = 0, n = 0;
};

void add_sim_opts(CLI::App *s, SimArgs &a, Binder &b) {
  std::string sc = s->get_name();
  b.bind(s, s->add_option("--alpha", a.alpha, "amplitude of the adiabatic term"), sc, {"alpha"});
  b.bind(s, s->add_option("--epsilon", a.eps, "adiabatic parameter"), sc, {"epsilon"});
  b.bind(s, s->add_option("--energy", a.energies, "energy or comma list"), sc, {"energy"});
  b.bind(s, s->add_option("--z", a.z, "pin the phase z (default: z-average from the seed)"), sc, {"z"});
  b.bind(s, s->add_option("--steps-per-unit", a.spu, "RK4 steps per unit length (0: from potential depth)"), sc, {"steps_per_unit"});
}

int cmd_verify_lyapunov(const Global &g, const ModelArgs &ma, const SimArgs &s) {
  if (ma.potential.empty()) throw Error("verify lyapunov needs an explicit --potential");
  QuasiPeriodic H{io::parse_potential(ma.potential), s.alpha, s.eps, 0};
  std::mt19937_64 rng(g.seed);
  double z0 = std::isnan(s.z) ? std::uniform_real_distribution<double>(0, 1)(rng) : s.z;
  H.z = z0;
  double xm = s.x_max > 0 ? s.x_max : (s.eps > 0 ? 150 * 2 * pi / s.eps : 1e4);
  std::unique_ptr<BandModel> m;
  io::Table t({{"E", "energy"}, {"epsilon", ""}, {"alpha", "energy"}, {"x_max", "length"}, {"z_count", ""},
               {"estimate", "1/length"}, {"stderr", "1/length"}, {"drift", ""}, {"asym_sh_minus_svpi", "1/length"}});
  SimOptions o;
  o.steps_per_unit = s.spu;
  for (double E : io::parse_list(s.energies)) {
    CocycleResult r = std::isnan(s.z) ? schrodinger_lyapunov_avg(H, E, xm, s.z_count, o)
                                      : schrodinger_lyapunov(H, E, xm, o);
    double pred = std::nan("");
    if (s.alpha > 0) {
      if (!m) m = std::make_unique<BandModel>(make_model(ma));
      auto w = check_tibm(*m, E, s.alpha);
      if (w.tibm_ok) {
        auto p = action_profile(*m, E, s.alpha, w.n, {g.tol});
        pred = (p.Sh - p.Svpi) / (2 * pi);
      }
    }
    t.add({E, s.eps, s.alpha, xm, (long)(std::isnan(s.z) ? s.z_count : 1), r.estimate, r.stderr_, r.drift, pred});
    std::cerr << "lyapunov: E=" << io::num(E) << " Theta=" << io::num(r.estimate) << " +- " << io::num(r.stderr_)
              << " (drift " << io::num(r.drift) << ")\n";
  }
  Output(g).table(t, "lyapunov");
  return 0;
}

int cmd_verify_ids(const Global &g, const ModelArgs &ma, const SimArgs &s) {
  if (ma.potential.empty()) throw Error("verify ids needs an explicit --potential");
  QuasiPeriodic H{io::parse_potential(ma.potential), s.alpha, s.eps, std::isnan(s.z) ? 0.0 : s.z};
  double L = s.L > 0 ? s.L : (s.eps > 0 ? 50 * 2 * pi / s.eps : 500);
  auto Es = io::parse_list(s.energies);
  std::sort(Es.begin(), Es.end());
  io::Table t({{"E", "energy"}, {"L", "length"}, {"count", ""}, {"N", "1/length"}});
  long prev = -1;
  bool monotone = true;
  for (double E : Es) {
    auto r = ids_dirichlet(H, E, L, s.spu);
    if (r.count < prev) monotone = false;
    prev = r.count;
    t.add({E, L, r.count, r.N});
  }
  Output(g).table(t, "ids");
  std::cerr << "ids: " << Es.size() << " energies, L=" << io::num(L) << (monotone ? ", non-decreasing" : ", NOT monotone")
            << "\n";
  return monotone ? 0 : 3;
}

int cocycle_self_test(const Global &g) {
  io::Table t({{"case", ""}, {"estimate", ""}, {"expected", ""}, {"stderr", ""}, {"tolerance", ""}, {"pass", "bool"}});
  double h = (std::sqrt(5.0) - 1) / 2;
  bool all = true;
  auto add = [&](const std::string &name, double est, double exp, double se, double tol) {
    bool ok = std::abs(est - exp) <= tol;
    all = all && ok;
    t.add({name, est, exp, se, tol, ok});
  };
  {
    auto r = cocycle_lyapunov([](double) { return Mat2{2, 0, 0, 0.5}; }, h, 0.1, 10000);
    add("constant diag(2,1/2)", r.estimate, std::log(2.0), r.stderr_, 1e-9);
  }
  {
    auto rot = [](double z) {
      double c = std::cos(2 * pi * z), s = std::sin(2 * pi * z);
      return Mat2{c, -s, s, c};
    };
    auto r = cocycle_lyapunov(rot, h, 0.1, 10000);
    add("rotation", r.estimate, 0, r.stderr_, std::max(1e-6, 3 * r.stderr_));
  }
  {
    // almost Mathieu, lambda = 3: the exponent is log 3 for every irrational h
    auto am = [](double z) { return Mat2{-6 * std::cos(2 * pi * z), -1, 1, 0}; };
    auto r1 = cocycle_lyapunov(am, h, 0.1, 100000), r2 = cocycle_lyapunov(am, h, 0.1, 1000000);
    add("almost-Mathieu 1e5 vs 1e6", r1.estimate, r2.estimate, r1.stderr_, 3 * std::hypot(r1.stderr_, r2.stderr_));
  }
  std::mt19937_64 rng(g.seed);
  std::uniform_real_distribution<double> U(-1, 1);
  for (int k = 0; k < 5; ++k) {
    double a1 = U(rng), a2 = U(rng), b1 = 2 + U(rng), c1 = U(rng);
    auto M = [=](double z) {
      double m11 = a1 + 1.5 * std::cos(2 * pi * z), m12 = b1 + 0.5 * std::cos(2 * pi * z + c1),
             m22 = a2 + std::sin(2 * pi * z);
      return Mat2{m11, m12, (m11 * m22 - 1) / m12, m22};
    };
    auto N = build_N(M, h);
    auto x = cocycle_lyapunov(M, h, 0.2, 100000), y = cocycle_lyapunov(N.M, h, 0.2, 100000);
    add("M vs N #" + std::to_string(k + 1), y.estimate, x.estimate, y.stderr_, 3 * std::hypot(x.stderr_, y.stderr_));
  }
  Output(g).table(t, "cocycle_self_test");
  std::cerr << "cocycle self-test: " << (all ? "all pass" : "FAILURES") << "\n";
  return all ? 0 : 3;
}

int cmd_verify_cocycle(const Global &g, const ModelArgs &ma, const MatrixArgs &xa, long steps, bool self) {
  if (self) return cocycle_self_test(g);
  auto m = make_model(ma);
  auto b = build_matrix_model(m, xa, {g.tol});
  std::mt19937_64 rng(g.seed);
  double z0 = std::uniform_real_distribution<double>(0, 1)(rng);
  auto r = cocycle_lyapunov(b.M, b.q.h, z0, steps);
  io::Table t({{"E", "energy"}, {"epsilon", ""}, {"h", ""}, {"steps", ""}, {"estimate", "per step"},
               {"stderr", "per step"}, {"theta_scaled", "1/length"}});
  t.add({b.E + xa.offset, xa.eps, b.q.h, steps, r.estimate, r.stderr_, xa.eps / (2 * pi) * r.estimate});
  Output(g).table(t, "cocycle");
  std::cerr << "cocycle: theta(M,h)=" << io::num(r.estimate) << " +- " << io::num(r.stderr_)
            << ", (eps/2pi) theta=" << io::num(xa.eps / (2 * pi) * r.estimate) << "\n";
  return 0;
}

int cmd_theta(const Global &g, const ModelArgs &ma, int n, double margin, double estep, double lambda_user) {
  auto m = make_model(ma);
  PeriodicConstants pc = m.backend == Backend::ode ? compute_theta_n(m, n, margin, estep)
                                                   : periodic_constants_fallback(n, lambda_user > 0 ? lambda_user : 1);
  io::Table t({{"n", ""}, {"theta", ""}, {"Lambda", ""}, {"re_l", ""}, {"im_l", "rad"}, {"margin", "energy"},
               {"err", "rad"}, {"computed", "bool"}});
  t.add({(long)n, pc.theta, pc.Lambda, pc.l.real(), pc.l.imag(), pc.margin, pc.err, !pc.fallback});
  Output(g).table(t, "theta_n");
  std::cerr << "theta-n: theta_" << n << "=" << io::num(pc.theta) << " Lambda_" << n << "=" << io::num(pc.Lambda)
            << (pc.fallback ? " (user value)" : "") << "\n";
  return 0;
}

// pull --config out of argv before the full parse
std::string find_config(int argc, char **argv) {
  for (int i = 1; i < argc; ++i) {
    std::string a = argv[i];
    if (a == "--config" && i + 1 < argc) return argv[i + 1];
    if (a.rfind("--config=", 0) == 0) return a.substr(9);
  }
  return "";
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"adiaspec: semiclassical spectra of adiabatically perturbed periodic operators"};
  app.require_subcommand(1);
  app.fallthrough(); // global flags may follow the subcommand
  Global g;
  Binder binder;
  app.add_option("--config", g.config, "key = value config file (command-line flags override it)");
  binder.bind(&app, app.add_option("--threads", g.threads, "worker threads for grid scans")->check(CLI::PositiveNumber), "",
              {"threads"});
  binder.bind(&app, app.add_option("--tol", g.tol, "quadrature tolerance")->check(CLI::PositiveNumber), "", {"tol"});
  binder.bind(&app, app.add_option("--seed", g.seed, "seed for sampled phases and random self-tests"), "", {"seed"});
  binder.bind(&app, app.add_option("--out-dir", g.out_dir, "write files here instead of stdout"), "", {"out_dir"});
  binder.bind(&app, app.add_option("--format", g.format, "csv or json")->check(CLI::IsMember({"csv", "json"})), "",
              {"format"});

  ModelArgs ma;
  double alpha = 0, energy = 0, eps = 0, lambda_n = 0, c = 0.05, margin = 0, estep = 0;
  int n_over = 0;
  std::string energies, window, dio, ar, er, svg, scan = "0:1:1024";

  auto *bands = app.add_subcommand("bands", "band edges, band increments, k_p at energies");
  add_model_opts(bands, ma, binder);
  binder.bind(bands, bands->add_option("--energy", energies, "comma list of energies for k_p"), "bands", {"energy"});

  auto *win = app.add_subcommand("window", "TIBM and (T) checks with branch points");
  add_model_opts(win, ma, binder);
  binder.bind(win, win->add_option("--alpha", alpha), "window", {"alpha"});
  binder.bind(win, win->add_option("--energy", energy), "window", {"energy"});
  binder.bind(win, win->add_option("--n", n_over), "window", {"n"});

  auto *act = app.add_subcommand("actions", "phase integrals, actions, tunneling coefficients");
  add_model_opts(act, ma, binder);
  binder.bind(act, act->add_option("--alpha", alpha), "actions", {"alpha"});
  binder.bind(act, act->add_option("--energy", energies, "energy or comma list"), "actions", {"energy"});
  binder.bind(act, act->add_option("--epsilon", eps, "add tunneling coefficients at this epsilon"), "actions", {"epsilon"});
  binder.bind(act, act->add_option("--n", n_over), "actions", {"n"});

  auto *spec = app.add_subcommand("spectrum", "ladders and interval catalog on a window J");
  add_model_opts(spec, ma, binder);
  binder.bind(spec, spec->add_option("--alpha", alpha), "spectrum", {"alpha"});
  binder.bind(spec, spec->add_option("--window", window, "E1:E2"), "spectrum", {"window"});
  binder.bind(spec, spec->add_option("--epsilon", eps), "spectrum", {"epsilon"});
  binder.bind(spec, spec->add_option("--lambda-n", lambda_n, "Lambda_n override (>= 1)"), "spectrum", {"lambda_n"});
  binder.bind(spec, spec->add_option("--c", c, "classification threshold on eps log lambda"), "spectrum", {"c"});
  binder.bind(spec, spec->add_option("--diophantine", dio, "a,b: test eps in D(a,b) for the ac label"), "spectrum",
              {"diophantine"});
  binder.bind(spec, spec->add_option("--n", n_over), "spectrum", {"n"});

  auto *reg = app.add_subcommand("regionmap", "zone map over an (alpha, E) grid, CSV + SVG");
  add_model_opts(reg, ma, binder);
  binder.bind(reg, reg->add_option("--alpha", ar, "A1:A2:steps"), "regionmap", {"alpha"});
  binder.bind(reg, reg->add_option("--energy", er, "E1:E2:steps"), "regionmap", {"energy"});
  binder.bind(reg, reg->add_option("--svg", svg, "SVG path (default regionmap.svg in the output dir)"), "regionmap",
              {"svg"});

  MatrixArgs xa;
  auto *mod = app.add_subcommand("model", "monodromy model matrices, rho, v and the resolvent test");
  add_model_opts(mod, ma, binder);
  add_matrix_opts(mod, xa, binder);
  std::string params;
  mod->add_option("--params", params, "parameter file (same format as --config)");
  binder.bind(mod, mod->add_option("--scan-z", scan, "z0:z1:steps"), "model", {"scan_z"});

  auto *ver = app.add_subcommand("verify", "direct simulation cross-checks");
  ver->require_subcommand(1);
  SimArgs sl, si;
  auto *vl = ver->add_subcommand("lyapunov", "Lyapunov exponent of the Schrodinger equation");
  add_model_opts(vl, ma, binder);
  add_sim_opts(vl, sl, binder);
  binder.bind(vl, vl->add_option("--x-max", sl.x_max, "integration length (default 150 adiabatic periods)"), "lyapunov",
              {"x_max"});
  binder.bind(vl, vl->add_option("--z-count", sl.z_count, "number of averaged phases"), "lyapunov", {"z_count"});
  auto *vi = ver->add_subcommand("ids", "Dirichlet eigenvalue counts (Prufer)");
  add_model_opts(vi, ma, binder);
  add_sim_opts(vi, si, binder);
  binder.bind(vi, vi->add_option("--L", si.L, "box half-length (default 50 adiabatic periods)"), "ids", {"L"});
  MatrixArgs xc;
  long steps = 100000;
  bool self = false;
  auto *vc = ver->add_subcommand("cocycle", "cocycle Lyapunov exponent of the model matrix");
  add_model_opts(vc, ma, binder);
  add_matrix_opts(vc, xc, binder);
  binder.bind(vc, vc->add_option("--steps", steps, "cocycle steps"), "cocycle", {"steps"});
  binder.bind(vc, vc->add_flag("--self-test", self, "constant / rotation / almost-Mathieu / N-equivalence checks"),
              "cocycle", {"self_test"});

  int n_theta = 1;
  auto *th = app.add_subcommand("theta-n", "theta_n and Lambda_n of the periodic operator");
  add_model_opts(th, ma, binder);
  binder.bind(th, th->add_option("--n", n_theta, "gap index"), "theta-n", {"n"});
  binder.bind(th, th->add_option("--margin", margin, "contour distance from the gap"), "theta-n", {"margin"});
  binder.bind(th, th->add_option("--e-step", estep, "energy step of the central differences"), "theta-n", {"e_step"});
  binder.bind(th, th->add_option("--lambda-n", lambda_n, "value to report for the band-edge backend"), "theta-n",
              {"lambda_n"});

  std::string which = "adiaspec";
  try {
    app.parse(argc, argv);
    for (auto *s : app.get_subcommands()) which = s->get_name();
    std::string cfgpath = g.config.empty() ? find_config(argc, argv) : g.config;
    if (!cfgpath.empty()) binder.apply(io::Config::load(cfgpath));
    if (mod->parsed() && !params.empty()) binder.apply(io::Config::load(params));

    if (bands->parsed()) return cmd_bands(g, ma, energies);
    if (win->parsed()) {
      bool csv = app.get_option("--format")->count() > 0 && g.format == "csv";
      return cmd_window(g, ma, alpha, energy, n_over, csv);
    }
    if (act->parsed()) return cmd_actions(g, ma, alpha, energies, eps, n_over);
    if (spec->parsed()) {
      if (!(eps > 0)) throw Error("--epsilon must be positive");
      return cmd_spectrum(g, ma, alpha, window, eps, lambda_n, c, dio, n_over);
    }
    if (reg->parsed()) return cmd_regionmap(g, ma, ar, er, svg);
    if (mod->parsed()) return cmd_model(g, ma, xa, scan);
    if (vl->parsed()) {
      which = "verify lyapunov";
      return cmd_verify_lyapunov(g, ma, sl);
    }
    if (vi->parsed()) {
      which = "verify ids";
      return cmd_verify_ids(g, ma, si);
    }
    if (vc->parsed()) {
      which = "verify cocycle";
      return cmd_verify_cocycle(g, ma, xc, steps, self);
    }
    if (th->parsed()) return cmd_theta(g, ma, n_theta, margin, estep, lambda_n);
  } catch (const CLI::ParseError &e) {
    return app.exit(e);
  } catch (const std::exception &e) {
    std::cerr << json{{"error", e.what()}, {"command", which}}.dump() << "\n";
    return 1;
  }
  return 0;
}
