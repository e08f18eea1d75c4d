#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "fracmap/extension.hpp"
#include "fracmap/field.hpp"
#include "fracmap/reifenberg.hpp"
#include "fracmap/symmetry.hpp"

namespace fracmap {

/// One bundle of vortex-model diagnostics: superlevel and regularity-scale
/// volumes, density curves, the k = 0 stratum, tube volumes, and a covering
/// tree driven by the vortex density oracle.
struct VortexReport {
  int resolution = 0;
  std::vector<double> radii;

  std::vector<double> superlevel_volumes;     ///< per radius
  std::vector<double> superlevel_expected;    ///< pi r^2
  double superlevel_loglog_slope = 0.0;

  std::vector<double> regscale_volumes;       ///< Vol({r_u < r} cap D_1)
  std::vector<double> regscale_expected;      ///< 4 pi r^2
  double regscale_max_probe_error = 0.0;      ///< vs min(|x|/2, 1), 20 probes

  std::vector<double> theta_radii;
  std::vector<double> theta_values;
  double xi_origin = 0.0;
  double xi_error = 0.0;

  std::int64_t stratum_size = 0;
  double stratum_max_dist = 0.0;  ///< farthest member from the origin
  double tube_volume_r = 0.0;     ///< Vol(D_r(stratum) cap D_1) at r = radii[0]

  int cover_leaves = 0;
  double cover_packing_sum = 0.0;
  bool cover_certificates_ok = false;
};

struct VortexReportOptions {
  int resolution = 128;           ///< nodes per unit length (>= 64)
  std::vector<double> radii = {0.1, 0.2, 0.4};
  std::string outdir;             ///< empty: no files written
  std::uint64_t seed = 2024;
};

VortexReport run_vortex_report(const VortexReportOptions& opts);

/// Executes a JSON experiment config (version, command, parameters).
/// Returns the process exit status: 0 ok, 1 invariant/acceptance failure,
/// 2 IO/config error.
int run_config(const std::string& path);

/// Shared command dispatch used by both the CLI and run_config. Throws on
/// errors; callers map exceptions to exit codes.
int execute_command(const std::string& command, const nlohmann::json& params);

}  // namespace fracmap
