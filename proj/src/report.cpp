#include "fracmap/report.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>

#include <json.hpp>

#include "fracmap/energy.hpp"
#include "fracmap/io.hpp"

namespace fracmap {

namespace {
constexpr double kPi = std::numbers::pi;

using nlohmann::json;

GridSpec vortex_grid(int resolution, double halfwidth) {
  GridSpec g;
  g.n = 2;
  g.d = 2;
  g.h = 1.0 / resolution;
  const int half = static_cast<int>(std::lround(halfwidth * resolution));
  g.origin = {-half * g.h, -half * g.h};
  g.counts = {2 * half + 1, 2 * half + 1};
  return g;
}

double loglog_slope(std::span<const double> xs, std::span<const double> ys) {
  // least-squares slope of log y against log x
  const int m = static_cast<int>(xs.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int i = 0; i < m; ++i) {
    const double lx = std::log(xs[i]), ly = std::log(std::max(ys[i], 1e-300));
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

/// Analytic density model of the vortex: Theta(x, s) = pi at the origin,
/// decaying like (|x|/s)^{-2} at smooth points, nondecreasing in s.
double vortex_theta_model(std::span<const double> x, double s) {
  const double t = std::hypot(x[0], x[1]) / s;
  return kPi / (1.0 + t * t);
}

}  // namespace

VortexReport run_vortex_report(const VortexReportOptions& opts) {
  if (opts.resolution < 64)
    throw std::invalid_argument("vortex-report: resolution must be >= 64 nodes per unit");
  VortexReport rep;
  rep.resolution = opts.resolution;
  rep.radii = opts.radii;
  const double h = 1.0 / opts.resolution;
  for (double r : opts.radii)
    if (r < 4.0 * h) {
      std::ostringstream msg;
      msg << "vortex-report: radius " << r
          << " unresolved at resolution " << opts.resolution
          << "; feasible radii are >= " << fmt17(4.0 * h);
      throw std::invalid_argument(msg.str());
    }

  const VectorField u = analytic_vortex(vortex_grid(opts.resolution, 2.0));
  const Ball window{{0.0, 0.0}, 1.0};

  // superlevel volumes
  for (double r : opts.radii) {
    rep.superlevel_volumes.push_back(gradient_superlevel_volume(u, r, window));
    rep.superlevel_expected.push_back(kPi * r * r);
  }
  rep.superlevel_loglog_slope = loglog_slope(opts.radii, rep.superlevel_volumes);

  // regularity scale: 20 random probes against min(|x|/2, 1) and the
  // distribution of r_u over D_1
  RegularityScale rs(u);
  std::mt19937_64 rng(opts.seed);
  std::uniform_real_distribution<double> unif(-0.95, 0.95);
  for (int t = 0; t < 20; ++t) {
    double p[2];
    do {
      p[0] = unif(rng);
      p[1] = unif(rng);
    } while (std::hypot(p[0], p[1]) >= 0.95);
    const double ru = rs.at({p, 2});
    const double expect = std::min(0.5 * std::hypot(p[0], p[1]), 1.0);
    rep.regscale_max_probe_error =
        std::max(rep.regscale_max_probe_error, std::abs(ru - expect));
  }
  {
    std::vector<double> x(2);
    std::vector<double> rvals;
    std::vector<std::int64_t> nodes;
    for (std::int64_t i = 0; i < u.spec.total(); ++i) {
      u.spec.node(i, x);
      if (!window.contains(x)) continue;
      nodes.push_back(i);
    }
    rvals.resize(nodes.size());
    par::for_each(static_cast<std::int64_t>(nodes.size()), par::default_mode(),
                  [&](std::int64_t a) {
                    double p[2];
                    u.spec.node(nodes[a], {p, 2});
                    rvals[a] = rs.at({p, 2});
                  });
    for (double r : opts.radii) {
      std::int64_t count = 0;
      for (double v : rvals)
        if (v < r) ++count;
      rep.regscale_volumes.push_back(h * h * static_cast<double>(count));
      rep.regscale_expected.push_back(4.0 * kPi * r * r);
    }
  }

  // density curve at the origin
  {
    GridSpec bg = vortex_grid(opts.resolution, 0.65);
    const VectorField ub = analytic_vortex(bg);
    HalfGridSpec hs;
    hs.boundary = bg;
    hs.zlevels = HalfGridSpec::geometric_levels(0.5 * h, 0.55);
    const HalfField ue = poisson_extend(ub, hs);
    const auto grad = halfgrid_gradient(ue);
    std::vector<double> tr = {0.125, 0.25, 0.5};
    const double x0[2] = {0.0, 0.0};
    const DensityCurve curve = density_curve(ue, {x0, 2}, tr, &grad);
    rep.theta_radii = curve.radii;
    rep.theta_values = curve.thetas;
    rep.xi_origin = curve.xi;
    rep.xi_error = curve.xi_error;
    if (!opts.outdir.empty())
      write_density_curve(curve, opts.outdir + "/theta_origin.csv");
  }

  // k = 0 stratum on a moderate window
  Stratum st;
  {
    GridSpec bg = vortex_grid(opts.resolution, 1.30);
    const VectorField ub = analytic_vortex(bg);
    HalfGridSpec hs;
    hs.boundary = bg;
    hs.zlevels = HalfGridSpec::geometric_levels(0.5 * h, 0.55);
    const HalfField ue = poisson_extend(ub, hs);
    StratumOptions sopts;
    sopts.window_radius = 0.6;
    sopts.stride = std::max(1, opts.resolution / 16);
    st = quantitative_stratum(ue, 0, 0.05, 0.125, sopts);
    rep.stratum_size = static_cast<std::int64_t>(st.members.size());
    for (const auto& w : st.members)
      rep.stratum_max_dist =
          std::max(rep.stratum_max_dist, std::hypot(w.x[0], w.x[1]));
    if (!opts.outdir.empty())
      write_stratum(st, 2, opts.outdir + "/stratum_k0.csv");
  }

  // tube volume around the stratum
  {
    std::vector<std::vector<double>> pts;
    for (const auto& w : st.members) pts.push_back(w.x);
    rep.tube_volume_r =
        tube_volume(u.spec, pts, opts.radii.front(), window);
  }

  // covering tree against the analytic density model
  {
    CoverParams cp;
    cp.k = 0;
    cp.rho = 0.01;
    cp.R = 0.5;
    cp.r = 0.01;
    std::vector<std::vector<double>> S = {{0.0, 0.0}};
    const CoveringTree tree = covering_tree(S, vortex_theta_model, cp);
    rep.cover_leaves = static_cast<int>(tree.leaves().size());
    rep.cover_packing_sum = tree.packing_sum(0);
    rep.cover_certificates_ok = true;
    for (const auto& nd : tree.nodes)
      if (nd.cls == CoveringTree::Class::Final)
        rep.cover_certificates_ok =
            rep.cover_certificates_ok &&
            nd.has_certificate &&
            nd.cert_drop >= tree.params.delta - 1e-12;
    if (!opts.outdir.empty()) write_tree(tree, opts.outdir + "/cover.json");
  }

  if (!opts.outdir.empty()) {
    json j;
    j["resolution"] = rep.resolution;
    j["radii"] = rep.radii;
    j["superlevel_volumes"] = rep.superlevel_volumes;
    j["superlevel_expected"] = rep.superlevel_expected;
    j["superlevel_loglog_slope"] = rep.superlevel_loglog_slope;
    j["regscale_volumes"] = rep.regscale_volumes;
    j["regscale_expected"] = rep.regscale_expected;
    j["regscale_max_probe_error"] = rep.regscale_max_probe_error;
    j["theta_radii"] = rep.theta_radii;
    j["theta_values"] = rep.theta_values;
    j["xi_origin"] = rep.xi_origin;
    j["xi_error"] = rep.xi_error;
    j["stratum_size"] = rep.stratum_size;
    j["stratum_max_dist"] = rep.stratum_max_dist;
    j["tube_volume"] = rep.tube_volume_r;
    j["cover_leaves"] = rep.cover_leaves;
    j["cover_packing_sum"] = rep.cover_packing_sum;
    j["cover_certificates_ok"] = rep.cover_certificates_ok;
    write_text_atomic(opts.outdir + "/vortex_report.json", j.dump(2) + "\n");

    std::ostringstream csv;
    csv << "r,superlevel,superlevel_expected,regscale,regscale_expected\n";
    for (std::size_t i = 0; i < rep.radii.size(); ++i)
      csv << fmt17(rep.radii[i]) << "," << fmt17(rep.superlevel_volumes[i])
          << "," << fmt17(rep.superlevel_expected[i]) << ","
          << fmt17(rep.regscale_volumes[i]) << ","
          << fmt17(rep.regscale_expected[i]) << "\n";
    write_text_atomic(opts.outdir + "/volumes.csv", csv.str());
  }
  return rep;
}

// ---------------------------------------------------------------------------
// config runner

namespace {

Ball parse_ball(const json& j, int n) {
  Ball b;
  if (!j.contains("center") || !j.contains("radius"))
    throw io_error("config: ball needs center and radius");
  b.center = j["center"].get<std::vector<double>>();
  b.radius = j["radius"].get<double>();
  if (static_cast<int>(b.center.size()) != n)
    throw io_error("config: ball center dimension mismatch");
  return b;
}

}  // namespace

int execute_command(const std::string& command, const json& p) {
  if (command == "minimize") {
    const VectorField u0 = read_field(p.at("field").get<std::string>());
    const Ball omega = parse_ball(p.at("omega"), u0.spec.n);
    MinimizeOptions mo;
    if (p.contains("step")) mo.step = p["step"].get<double>();
    if (p.contains("max_iterations"))
      mo.max_iterations = p["max_iterations"].get<int>();
    if (p.contains("energy_tol")) mo.energy_tol = p["energy_tol"].get<double>();
    if (p.contains("r_ext")) mo.r_ext = p["r_ext"].get<double>();
    const MinimizeResult res = minimize(u0, omega, mo);
    if (p.contains("out"))
      write_field(res.field, p["out"].get<std::string>());
    if (p.contains("log")) write_minimize_log(res, p["log"].get<std::string>());
    std::cout << "minimize: " << res.accepted_steps << " accepted steps, final energy "
              << fmt17(res.log.back().energy) << "\n";
    if (res.stagnated) {
      std::cerr << "minimize: step collapsed below 1e-12 (stagnation); partial result written\n";
      return 1;
    }
    return 0;
  }

  if (command == "extend") {
    const VectorField u = read_field(p.at("field").get<std::string>());
    HalfGridSpec hs;
    hs.boundary = u.spec;
    const double zmax = p.value("zmax", 1.0);
    const double ratio = p.value("ratio", 1.25);
    hs.zlevels = HalfGridSpec::geometric_levels(0.5 * u.spec.h, zmax, ratio);
    const HalfField ue = poisson_extend(u, hs);
    if (p.contains("out")) {
      std::ostringstream os;
      for (int a = 0; a < u.spec.n; ++a) os << "x" << (a + 1) << ",";
      os << "z";
      for (int k = 0; k < u.spec.d; ++k) os << ",u" << (k + 1);
      os << "\n";
      std::vector<double> x(u.spec.n);
      for (std::int64_t b = 0; b < hs.boundary.total(); ++b) {
        hs.boundary.node(b, x);
        for (int l = 0; l < hs.levels(); ++l) {
          for (int a = 0; a < u.spec.n; ++a) os << fmt17(x[a]) << ",";
          os << fmt17(hs.zlevels[l]);
          const auto v = ue.at(b, l);
          for (int k = 0; k < u.spec.d; ++k) os << "," << fmt17(v[k]);
          os << "\n";
        }
      }
      write_text_atomic(p["out"].get<std::string>(), os.str());
    }
    std::cout << "extend: " << hs.total() << " half-grid nodes\n";
    return 0;
  }

  if (command == "theta" || command == "audit-monotonicity") {
    const VectorField u = read_field(p.at("field").get<std::string>());
    const auto center = p.at("center").get<std::vector<double>>();
    if (static_cast<int>(center.size()) != u.spec.n)
      throw io_error("config: center dimension mismatch");
    double zmax = 1.0;
    if (command == "theta") {
      const auto radii = p.at("radii").get<std::vector<double>>();
      for (double r : radii) zmax = std::max(zmax, 1.1 * r);
    } else {
      for (const auto& pr : p.at("pairs"))
        zmax = std::max(zmax, 1.1 * pr.at(1).get<double>());
    }
    HalfGridSpec hs;
    hs.boundary = u.spec;
    hs.zlevels = HalfGridSpec::geometric_levels(0.5 * u.spec.h, zmax);
    const HalfField ue = poisson_extend(u, hs);
    const auto grad = halfgrid_gradient(ue);
    if (command == "theta") {
      const auto radii = p.at("radii").get<std::vector<double>>();
      const DensityCurve curve = density_curve(ue, center, radii, &grad);
      if (p.contains("out"))
        write_density_curve(curve, p["out"].get<std::string>());
      std::cout << "theta: xi = " << fmt17(curve.xi) << " +- "
                << fmt17(curve.xi_error) << "\n";
      for (std::size_t i = 0; i < curve.radii.size(); ++i)
        std::cout << "  theta(" << fmt17(curve.radii[i])
                  << ") = " << fmt17(curve.thetas[i]) << "\n";
      return 0;
    }
    std::vector<std::pair<double, double>> pairs;
    for (const auto& pr : p.at("pairs"))
      pairs.emplace_back(pr.at(0).get<double>(), pr.at(1).get<double>());
    const MonotonicityAudit audit = monotonicity_audit(ue, center, pairs, &grad);
    if (p.contains("out")) write_audit(audit, p["out"].get<std::string>());
    for (const auto& row : audit.rows)
      std::cout << "audit: (" << fmt17(row.rho) << ", " << fmt17(row.r)
                << ") lhs=" << fmt17(row.lhs) << " rhs=" << fmt17(row.rhs)
                << " mismatch=" << fmt17(row.mismatch) << "\n";
    return 0;
  }

  if (command == "strata") {
    const VectorField u = read_field(p.at("field").get<std::string>());
    const int k = p.at("k").get<int>();
    const double eps = p.at("eps").get<double>();
    const double r = p.at("r").get<double>();
    if (k < 0 || k >= u.spec.n)
      throw io_error("config: k must be in [0, n)");
    HalfGridSpec hs;
    hs.boundary = u.spec;
    hs.zlevels = HalfGridSpec::geometric_levels(0.5 * u.spec.h, 0.55);
    const HalfField ue = poisson_extend(u, hs);
    StratumOptions so;
    so.window_radius = p.value("window", 0.6);
    so.stride = p.value("stride", 4);
    const Stratum st = quantitative_stratum(ue, k, eps, r, so);
    if (p.contains("out"))
      write_stratum(st, u.spec.n, p["out"].get<std::string>());
    std::cout << "strata: " << st.members.size() << " member nodes\n";
    return 0;
  }

  if (command == "volume") {
    const std::string mode = p.at("mode").get<std::string>();
    const double r = p.at("r").get<double>();
    if (mode == "superlevel") {
      const VectorField u = read_field(p.at("field").get<std::string>());
      Ball window{std::vector<double>(u.spec.n, 0.0), 1.0};
      const double v = gradient_superlevel_volume(u, r, window);
      std::cout << "volume superlevel: " << fmt17(v) << "\n";
      return 0;
    }
    if (mode == "tube") {
      const auto pts = read_points(p.at("set").get<std::string>());
      const int res = p.value("resolution", 128);
      const int n = pts.empty() ? 2 : static_cast<int>(pts.front().size());
      GridSpec g;
      g.n = n;
      g.d = 1;
      g.h = 1.0 / res;
      g.origin.assign(n, -1.2);
      g.counts.assign(n, static_cast<int>(std::lround(2.4 * res)) + 1);
      Ball window{std::vector<double>(n, 0.0), 1.0};
      const double v = tube_volume(g, pts, r, window);
      std::cout << "volume tube: " << fmt17(v) << "\n";
      return 0;
    }
    throw io_error("config: volume mode must be tube or superlevel");
  }

  if (command == "beta") {
    const DiscreteMeasure mu = read_measure(p.at("measure").get<std::string>());
    const int k = p.at("k").get<int>();
    const auto center = p.at("center").get<std::vector<double>>();
    const double radius = p.at("radius").get<double>();
    if (k < 0 || k > mu.n) throw io_error("config: k must be in [0, n]");
    const JonesBeta jb = jones_beta(mu, center, radius, k);
    std::cout << "beta: beta^2 = " << fmt17(jb.beta_sq)
              << (jb.empty ? " (empty restriction)" : "") << "\n";
    return 0;
  }

  if (command == "cover") {
    const auto pts = read_points(p.at("set").get<std::string>());
    CoverParams cp;
    cp.k = p.at("k").get<int>();
    cp.eps = p.value("eps", 0.0);
    cp.delta = p.value("delta", 0.0);
    cp.rho = p.value("rho", 0.01);
    cp.r = p.at("r").get<double>();
    cp.R = p.at("R").get<double>();
    if (cp.rho > 0.01 + 1e-15)
      throw io_error("config: rho exceeds the covering constraint rho <= 1/100");
    const std::string oracle = p.at("theta").get<std::string>();
    ThetaOracle theta;
    VectorField field;
    HalfField ue;
    std::vector<double> grad;
    if (oracle == "vortex") {
      theta = vortex_theta_model;
    } else if (oracle.rfind("field:", 0) == 0) {
      field = read_field(oracle.substr(6));
      HalfGridSpec hs;
      hs.boundary = field.spec;
      hs.zlevels =
          HalfGridSpec::geometric_levels(0.5 * field.spec.h, 2.2 * cp.R);
      ue = poisson_extend(field, hs);
      grad = halfgrid_gradient(ue);
      theta = [&ue, &grad](std::span<const double> x, double r) {
        return theta_density(ue, x, r, &grad);
      };
    } else {
      throw io_error("config: theta oracle must be 'vortex' or 'field:<path>'");
    }
    const CoveringTree tree = covering_tree(pts, theta, cp);
    if (p.contains("out")) write_tree(tree, p["out"].get<std::string>());
    std::cout << "cover: " << tree.nodes.size() << " nodes, "
              << tree.leaves().size() << " leaves, packing sum "
              << fmt17(tree.packing_sum(cp.k)) << "\n";
    return 0;
  }

  if (command == "vortex-report") {
    VortexReportOptions vo;
    vo.resolution = p.value("resolution", 128);
    if (p.contains("radii")) vo.radii = p["radii"].get<std::vector<double>>();
    vo.outdir = p.value("outdir", std::string());
    const VortexReport rep = run_vortex_report(vo);
    std::cout << "vortex-report: slope " << fmt17(rep.superlevel_loglog_slope)
              << ", xi(0) " << fmt17(rep.xi_origin) << ", stratum "
              << rep.stratum_size << " nodes, cover leaves "
              << rep.cover_leaves << "\n";
    return 0;
  }

  if (command == "selftest") {
    int failures = 0;
    auto check = [&](bool ok, const char* what) {
      std::cout << (ok ? "[ok]   " : "[FAIL] ") << what << "\n";
      if (!ok) ++failures;
    };
    check(std::abs(gamma_n(1) - 0.3183098861837907) < 1e-15, "gamma_1");
    check(std::abs(gamma_n(2) - 0.15915494309189535) < 1e-15, "gamma_2");
    const auto pr = project_to_sphere(std::vector<double>{3.0, 4.0});
    check(std::abs(pr[0] - 0.6) < 1e-15 && std::abs(pr[1] - 0.8) < 1e-15,
          "sphere projection");
    DiscreteMeasure tri;
    tri.n = 2;
    const double hgt = std::sqrt(3.0) / 2.0;
    tri.atoms = {{{0.0, 0.0}, 1.0, -1.0},
                 {{1.0, 0.0}, 1.0, -1.0},
                 {{0.5, hgt}, 1.0, -1.0}};
    const double c[2] = {0.5, hgt / 3.0};
    const JonesBeta jb = jones_beta(tri, {c, 2}, 1.0, 1);
    check(std::abs(jb.beta_sq - 0.5) < 1e-12, "triangle beta^2 = 1/2");
    return failures == 0 ? 0 : 1;
  }

  throw io_error("config: unknown command '" + command + "'");
}

int run_config(const std::string& path) {
  json cfg;
  {
    std::ifstream is(path);
    if (!is) {
      std::cerr << "config: cannot open " << path << "\n";
      return 2;
    }
    try {
      is >> cfg;
    } catch (const std::exception& e) {
      std::cerr << "config: parse error in " << path << ": " << e.what() << "\n";
      return 2;
    }
  }
  try {
    if (!cfg.contains("version") || cfg["version"].get<int>() != 1) {
      std::cerr << "config: missing or unsupported version (expected 1)\n";
      return 2;
    }
    if (!cfg.contains("command")) {
      std::cerr << "config: missing command\n";
      return 2;
    }
    const json params = cfg.value("params", json::object());
    return execute_command(cfg["command"].get<std::string>(), params);
  } catch (const io_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 2;
  } catch (const std::domain_error& e) {
    std::cerr << "domain error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace fracmap
