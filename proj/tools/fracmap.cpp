#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "fracmap/io.hpp"
#include "fracmap/parallel.hpp"
#include "fracmap/report.hpp"

using nlohmann::json;

namespace {

std::vector<double> parse_csv_doubles(const std::string& s) {
  std::vector<double> out;
  std::string cur;
  for (char c : s + ",") {
    if (c == ',') {
      if (!cur.empty()) out.push_back(std::stod(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  return out;
}

int dispatch(const std::string& command, const json& params) {
  try {
    return fracmap::execute_command(command, params);
  } catch (const fracmap::io_error& e) {
    std::cerr << "io/config error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
#ifdef _OPENMP
  omp_set_num_threads(fracmap::par::max_threads());
#endif

  CLI::App app{
      "fracmap: 1/2-harmonic maps, harmonic extensions, densities, "
      "quantitative strata, Jones beta numbers and covering trees.\n"
      "Units: lengths in domain units, volumes in domain units^n; all "
      "numeric CSV output uses 17 significant digits."};
  app.require_subcommand(1);

  // minimize
  std::string field, out, log, opts_path, omega_str;
  auto* cmd_min = app.add_subcommand("minimize", "Projected-descent energy minimization under fixed exterior data");
  cmd_min->add_option("--field", field, "input field (.fhm)")->required();
  cmd_min->add_option("--omega", omega_str, "domain ball cx,cy,...,r")->required();
  cmd_min->add_option("--opts", opts_path, "options JSON (step, max_iterations, energy_tol, r_ext)");
  cmd_min->add_option("--out", out, "output field path");
  cmd_min->add_option("--log", log, "iteration log CSV (iteration,energy,step,residual)");
  cmd_min->callback([&]() {
    json p;
    p["field"] = field;
    const auto vals = parse_csv_doubles(omega_str);
    if (vals.size() < 2) throw CLI::ValidationError("--omega needs cx,..,r");
    p["omega"] = {{"center", std::vector<double>(vals.begin(), vals.end() - 1)},
                  {"radius", vals.back()}};
    if (!opts_path.empty()) {
      std::ifstream is(opts_path);
      if (!is) throw CLI::ValidationError("cannot open " + opts_path);
      json o;
      is >> o;
      for (auto& [k, v] : o.items()) p[k] = v;
    }
    if (!out.empty()) p["out"] = out;
    if (!log.empty()) p["log"] = log;
    std::exit(dispatch("minimize", p));
  });

  // extend
  double zmax = 1.0, ratio = 1.25;
  auto* cmd_ext = app.add_subcommand("extend", "Poisson extension to the half-space");
  cmd_ext->add_option("--field", field, "input field (.fhm)")->required();
  cmd_ext->add_option("--zmax", zmax, "top z-level (default 1)");
  cmd_ext->add_option("--ratio", ratio, "geometric z-level ratio (default 1.25)");
  cmd_ext->add_option("--out", out, "extension samples CSV");
  cmd_ext->callback([&]() {
    json p{{"field", field}, {"zmax", zmax}, {"ratio", ratio}};
    if (!out.empty()) p["out"] = out;
    std::exit(dispatch("extend", p));
  });

  // theta
  std::string center_str, radii_str;
  auto* cmd_th = app.add_subcommand("theta", "Density curve r -> Theta(u^e, B_r^+(x0)) and the r->0 limit");
  cmd_th->add_option("--field", field, "input field (.fhm)")->required();
  cmd_th->add_option("--center", center_str, "center cx,cy,...")->required();
  cmd_th->add_option("--radii", radii_str, "radii r1,r2,...")->required();
  cmd_th->add_option("--out", out, "curve CSV (r,theta)");
  cmd_th->callback([&]() {
    json p{{"field", field},
           {"center", parse_csv_doubles(center_str)},
           {"radii", parse_csv_doubles(radii_str)}};
    if (!out.empty()) p["out"] = out;
    std::exit(dispatch("theta", p));
  });

  // audit-monotonicity
  std::string pairs_str;
  auto* cmd_au = app.add_subcommand("audit-monotonicity", "Check Theta(r)-Theta(rho) against the annulus radial integral");
  cmd_au->add_option("--field", field, "input field (.fhm)")->required();
  cmd_au->add_option("--center", center_str, "center cx,cy,...")->required();
  cmd_au->add_option("--pairs", pairs_str, "radius pairs rho1:r1,rho2:r2,...")->required();
  cmd_au->add_option("--out", out, "audit CSV (rho,r,lhs,rhs,mismatch)");
  cmd_au->callback([&]() {
    json pairs = json::array();
    for (const auto& tok : [&] {
           std::vector<std::string> toks;
           std::string cur;
           for (char c : pairs_str + ",") {
             if (c == ',') {
               if (!cur.empty()) toks.push_back(cur);
               cur.clear();
             } else
               cur.push_back(c);
           }
           return toks;
         }()) {
      const auto sep = tok.find(':');
      if (sep == std::string::npos)
        throw CLI::ValidationError("--pairs entries are rho:r");
      pairs.push_back({std::stod(tok.substr(0, sep)), std::stod(tok.substr(sep + 1))});
    }
    json p{{"field", field}, {"center", parse_csv_doubles(center_str)}, {"pairs", pairs}};
    if (!out.empty()) p["out"] = out;
    std::exit(dispatch("audit-monotonicity", p));
  });

  // strata
  int k = 0, stride = 4;
  double eps = 0.05, r = 0.125, window = 0.6;
  std::string schedule = "dyadic";
  auto* cmd_st = app.add_subcommand("strata", "Quantitative stratum S^k_{eps,r} (dyadic scale schedule)");
  cmd_st->add_option("--field", field, "input field (.fhm)")->required();
  cmd_st->add_option("--k", k, "stratum index")->required();
  cmd_st->add_option("--eps", eps, "symmetry defect threshold")->required();
  cmd_st->add_option("--r", r, "smallest scale")->required();
  cmd_st->add_option("--schedule", schedule, "scale schedule (dyadic)");
  cmd_st->add_option("--window", window, "probe window radius (default 0.6)");
  cmd_st->add_option("--stride", stride, "probe stride in nodes (default 4)");
  cmd_st->add_option("--out", out, "stratum CSV (coords, witness scale, defect)");
  cmd_st->callback([&]() {
    if (schedule != "dyadic")
      throw CLI::ValidationError("only the dyadic schedule is available");
    json p{{"field", field}, {"k", k},      {"eps", eps},
           {"r", r},         {"window", window}, {"stride", stride}};
    if (!out.empty()) p["out"] = out;
    std::exit(dispatch("strata", p));
  });

  // volume
  std::string mode, set_path;
  int resolution = 128;
  auto* cmd_vol = app.add_subcommand("volume", "Tube volume of a point set / gradient superlevel volume in D_1");
  cmd_vol->add_option("--mode", mode, "tube | superlevel")->required();
  cmd_vol->add_option("--r", r, "radius / level parameter")->required();
  cmd_vol->add_option("--field", field, "field for superlevel mode");
  cmd_vol->add_option("--set", set_path, "point-set CSV for tube mode");
  cmd_vol->add_option("--resolution", resolution, "grid nodes per unit for tube mode");
  cmd_vol->callback([&]() {
    json p{{"mode", mode}, {"r", r}, {"resolution", resolution}};
    if (!field.empty()) p["field"] = field;
    if (!set_path.empty()) p["set"] = set_path;
    std::exit(dispatch("volume", p));
  });

  // beta
  std::string measure_path;
  double radius = 1.0;
  auto* cmd_beta = app.add_subcommand("beta", "Jones beta_2 number of a discrete measure");
  cmd_beta->add_option("--measure", measure_path, "measure CSV")->required();
  cmd_beta->add_option("--k", k, "plane dimension")->required();
  cmd_beta->add_option("--center", center_str, "center cx,cy,...")->required();
  cmd_beta->add_option("--radius", radius, "ball radius")->required();
  cmd_beta->callback([&]() {
    json p{{"measure", measure_path},
           {"k", k},
           {"center", parse_csv_doubles(center_str)},
           {"radius", radius}};
    std::exit(dispatch("beta", p));
  });

  // cover
  std::string theta_oracle;
  double delta = 0.0, rho = 0.01, Rroot = 0.5;
  auto* cmd_cov = app.add_subcommand("cover", "Covering tree with energy-drop certificates");
  cmd_cov->add_option("--set", set_path, "point-set CSV")->required();
  cmd_cov->add_option("--theta", theta_oracle, "vortex | field:<path.fhm>")->required();
  cmd_cov->add_option("--k", k, "stratum dimension")->required();
  cmd_cov->add_option("--eps", eps, "stratum parameter (metadata)");
  cmd_cov->add_option("--delta", delta, "energy-drop quantum (0: auto)");
  cmd_cov->add_option("--rho", rho, "refinement ratio (<= 1/100)");
  cmd_cov->add_option("--r", r, "final radius")->required();
  cmd_cov->add_option("--R", Rroot, "root radius")->required();
  cmd_cov->add_option("--out", out, "tree JSON");
  cmd_cov->callback([&]() {
    json p{{"set", set_path}, {"theta", theta_oracle}, {"k", k},
           {"eps", eps},      {"delta", delta},        {"rho", rho},
           {"r", r},          {"R", Rroot}};
    if (!out.empty()) p["out"] = out;
    std::exit(dispatch("cover", p));
  });

  // vortex-report
  std::string outdir;
  auto* cmd_rep = app.add_subcommand("vortex-report", "Full vortex pipeline: volumes, densities, stratum, covering");
  cmd_rep->add_option("--resolution", resolution, "nodes per unit (>= 64, default 128)");
  cmd_rep->add_option("--radii", radii_str, "radii r1,r2,... (default 0.1,0.2,0.4)");
  cmd_rep->add_option("--outdir", outdir, "directory for the JSON/CSV bundle");
  cmd_rep->callback([&]() {
    json p{{"resolution", resolution}};
    if (!radii_str.empty()) p["radii"] = parse_csv_doubles(radii_str);
    if (!outdir.empty()) p["outdir"] = outdir;
    std::exit(dispatch("vortex-report", p));
  });

  // selftest
  auto* cmd_self = app.add_subcommand("selftest", "Quick internal sanity checks");
  cmd_self->callback([&]() { std::exit(dispatch("selftest", json::object())); });

  // run (config file)
  std::string cfg_path;
  auto* cmd_run = app.add_subcommand("run", "Execute a JSON experiment config (replayable, versioned)");
  cmd_run->add_option("config", cfg_path, "config JSON path")->required();
  cmd_run->callback([&]() { std::exit(fracmap::run_config(cfg_path)); });

  CLI11_PARSE(app, argc, argv);
  return 0;
}
