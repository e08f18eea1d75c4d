#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "fracmap/grid.hpp"

namespace fracmap {

/// Volume of the k-dimensional unit ball (omega_k).
double unit_ball_volume(int k);

/// Weighted atoms in R^n. Packing measures carry ball radii and weights
/// omega_k r^k with the 1/5-shrunk balls pairwise disjoint.
struct DiscreteMeasure {
  struct Atom {
    std::vector<double> x;
    double weight = 0.0;
    double radius = -1.0;  ///< < 0: no packing radius stored
  };
  int n = 0;
  std::vector<Atom> atoms;

  void validate() const;

  /// Packing measure from balls: weights omega_k r^k; throws when the
  /// 1/5-shrinks are not pairwise disjoint.
  static DiscreteMeasure packing(const std::vector<Ball>& balls, int k);

  bool has_radii() const;
  double total_weight() const;
};

struct MomentReport {
  bool empty = true;
  double total_weight = 0.0;
  Eigen::VectorXd center_of_mass;
  Eigen::MatrixXd Q;
  Eigen::VectorXd eigenvalues;   ///< descending
  Eigen::MatrixXd eigenvectors;  ///< columns matching eigenvalues
};

/// Unnormalized second moments of mu restricted to D_r(x).
MomentReport second_moment(const DiscreteMeasure& mu,
                           std::span<const double> x, double r);

struct JonesBeta {
  double beta_sq = 0.0;
  bool empty = false;
  Eigen::VectorXd plane_origin;  ///< x_cm
  Eigen::MatrixXd plane_frame;   ///< n x k top eigenvectors
};

/// beta^k_{2,mu}(x,r)^2 = r^{-k-2} (lambda_{k+1} + ... + lambda_n) with the
/// best plane x_cm + span(v_1..v_k). Empty restrictions give 0.
JonesBeta jones_beta(const DiscreteMeasure& mu, std::span<const double> x,
                     double r, int k);

/// int_{D_r(x)} int_0^r beta^k(y,s)^2 ds/s dmu(y), the inner integral by the
/// midpoint rule in log s over the dyadic scales r, r/2, ..., (J entries).
double multiscale_beta_integral(const DiscreteMeasure& mu,
                                std::span<const double> x, double r, int k,
                                int scales);

struct ReifenbergVerdict {
  struct BallCheck {
    std::vector<double> center;
    double r = 0.0;
    double integral = 0.0;
    double bound = 0.0;  ///< delta6^2 r^k
    bool pass = false;
  };
  std::vector<BallCheck> checks;
  double packing_sum = 0.0;  ///< sum of r_x^k
  bool pass = false;
};

/// Checks the discrete-Reifenberg multiscale condition on the dyadic family
/// of atom-centered balls inside the root ball, and reports the packing sum.
ReifenbergVerdict reifenberg_predicate(const DiscreteMeasure& mu, int k,
                                       double delta6, const Ball& root,
                                       int scales = 12);

/// Greedy Vitali subcover by descending radius: kept 1/5-shrinks are
/// pairwise disjoint and the kept balls dilated by 5 cover all input
/// centers. Returns indices into the input list.
std::vector<int> vitali_subcover(const std::vector<Ball>& balls);

/// Theta oracle: (x, r) -> density value; must be nondecreasing in r.
using ThetaOracle =
    std::function<double(std::span<const double>, double)>;

struct CoverParams {
  int k = 0;
  double eps = 0.0;     ///< stratum parameter (metadata; the tree consumes
                        ///< the symmetry content through the Theta oracle)
  double delta = 0.0;   ///< energy-drop quantum (0: auto 0.05 E)
  double rho = 0.01;    ///< refinement ratio, <= 1/100
  double r = 0.0;       ///< final radius
  double R = 0.0;       ///< root radius, 0 < r < R <= 1
  double oracle_tol = 1e-8;
  std::int64_t node_budget = 200000;
};

struct CoveringTree {
  enum class Class { RBall, Final, Bad };
  struct Node {
    int id = -1;
    int parent = -1;
    std::vector<double> center;
    double radius = 0.0;
    Class cls = Class::Bad;
    std::vector<int> children;
    // final-ball certificate: sup Theta at scale 2 radius over covered
    // points, against the root energy E
    double cert_energy_before = 0.0;
    double cert_sup_after = 0.0;
    double cert_drop = 0.0;
    bool has_certificate = false;
  };
  std::vector<Node> nodes;
  double root_energy = 0.0;
  CoverParams params;

  std::vector<int> leaves() const;
  double packing_sum(int k) const;  ///< sum r^k over leaves
  bool covers(const std::vector<std::vector<double>>& S) const;
};

/// The constructive covering of S within D_R(0): iterative good/bad/final
/// refinement driven by the pinched sets F_x and effective spans, with
/// energy-drop certificates on final balls.
CoveringTree covering_tree(const std::vector<std::vector<double>>& S,
                           const ThetaOracle& theta, const CoverParams& params);

std::string to_string(CoveringTree::Class c);

}  // namespace fracmap
