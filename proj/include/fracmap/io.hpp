#pragma once

#include <string>
#include <vector>

#include "fracmap/energy.hpp"
#include "fracmap/extension.hpp"
#include "fracmap/field.hpp"
#include "fracmap/reifenberg.hpp"
#include "fracmap/symmetry.hpp"

namespace fracmap {

/// IO and config failures (CLI exit code 2).
struct io_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// 17-significant-digit decimal, the round-trip-exact output format.
std::string fmt17(double v);

/// FHM1 field file: text header (FHM1 / n,d / origin / h / counts /
/// exterior), then CSV rows per node in row-major order, or the binary
/// variant with little-endian 64-bit floats after the same header.
void write_field(const VectorField& u, const std::string& path,
                 bool binary = false);
VectorField read_field(const std::string& path);

/// Measure CSV: header x1,..,xn,weight[,radius], one atom per row.
void write_measure(const DiscreteMeasure& mu, const std::string& path);
DiscreteMeasure read_measure(const std::string& path);

/// Point-set CSV: header x1,..,xn, one point per row.
void write_points(const std::vector<std::vector<double>>& pts,
                  const std::string& path);
std::vector<std::vector<double>> read_points(const std::string& path);

/// DensityCurve CSV: columns r,theta (xi in a trailing comment-free summary
/// row is avoided; xi is reported separately by the CLI).
void write_density_curve(const DensityCurve& curve, const std::string& path);

/// MonotonicityAudit CSV: columns rho,r,lhs,rhs,mismatch.
void write_audit(const MonotonicityAudit& audit, const std::string& path);

/// Stratum CSV: node coords, witness scale, witness defect.
void write_stratum(const Stratum& st, int n, const std::string& path);

/// Minimize log CSV: iteration,energy,step,residual.
void write_minimize_log(const MinimizeResult& res, const std::string& path);

/// Covering tree JSON: nodes with id, parent, center, radius, class,
/// certificate.
void write_tree(const CoveringTree& tree, const std::string& path);

/// Atomic text write (write-then-rename).
void write_text_atomic(const std::string& path, const std::string& content);

}  // namespace fracmap
