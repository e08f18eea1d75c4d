#include "fracmap/reifenberg.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "fracmap/symmetry.hpp"

namespace fracmap {

namespace {
constexpr double kPi = std::numbers::pi;

double dist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double t = a[i] - b[i];
    s += t * t;
  }
  return std::sqrt(s);
}
}  // namespace

double unit_ball_volume(int k) {
  if (k < 0) throw std::invalid_argument("unit_ball_volume: k must be >= 0");
  return std::pow(kPi, 0.5 * k) / std::tgamma(0.5 * k + 1.0);
}

void DiscreteMeasure::validate() const {
  if (n < 1) throw std::invalid_argument("DiscreteMeasure: n must be >= 1");
  for (const Atom& a : atoms) {
    if (static_cast<int>(a.x.size()) != n)
      throw std::invalid_argument("DiscreteMeasure: atom dimension mismatch");
    if (!(a.weight > 0.0))
      throw std::invalid_argument("DiscreteMeasure: weights must be > 0");
  }
}

bool DiscreteMeasure::has_radii() const {
  for (const Atom& a : atoms)
    if (a.radius < 0.0) return false;
  return !atoms.empty();
}

double DiscreteMeasure::total_weight() const {
  double w = 0.0;
  for (const Atom& a : atoms) w += a.weight;
  return w;
}

DiscreteMeasure DiscreteMeasure::packing(const std::vector<Ball>& balls,
                                         int k) {
  DiscreteMeasure mu;
  if (balls.empty())
    throw std::invalid_argument("DiscreteMeasure::packing: no balls");
  mu.n = static_cast<int>(balls.front().center.size());
  const double wk = unit_ball_volume(k);
  for (std::size_t i = 0; i < balls.size(); ++i) {
    if (!(balls[i].radius > 0.0))
      throw std::invalid_argument("DiscreteMeasure::packing: radii must be > 0");
    for (std::size_t j = 0; j < i; ++j) {
      if (dist(balls[i].center, balls[j].center) <
          (balls[i].radius + balls[j].radius) / 5.0)
        throw std::invalid_argument(
            "DiscreteMeasure::packing: 1/5-shrunk balls must be pairwise disjoint");
    }
    Atom a;
    a.x = balls[i].center;
    a.radius = balls[i].radius;
    a.weight = wk * std::pow(balls[i].radius, k);
    mu.atoms.push_back(std::move(a));
  }
  return mu;
}

MomentReport second_moment(const DiscreteMeasure& mu,
                           std::span<const double> x, double r) {
  mu.validate();
  const int n = mu.n;
  MomentReport rep;
  rep.center_of_mass = Eigen::VectorXd::Zero(n);
  rep.Q = Eigen::MatrixXd::Zero(n, n);

  double wtot = 0.0;
  for (const auto& a : mu.atoms) {
    if (dist(a.x, x) >= r) continue;
    wtot += a.weight;
    for (int i = 0; i < n; ++i) rep.center_of_mass(i) += a.weight * a.x[i];
  }
  if (wtot <= 0.0) return rep;
  rep.empty = false;
  rep.total_weight = wtot;
  rep.center_of_mass /= wtot;

  for (const auto& a : mu.atoms) {
    if (dist(a.x, x) >= r) continue;
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v(i) = a.x[i] - rep.center_of_mass(i);
    rep.Q += a.weight * v * v.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(rep.Q);
  // descending order; clamp eigensolver noise on rank-deficient moments so
  // plane-supported measures give exact zeros
  const double clamp = 1e-13 * std::max(rep.Q.trace(), 0.0);
  rep.eigenvalues = Eigen::VectorXd(n);
  rep.eigenvectors = Eigen::MatrixXd(n, n);
  for (int i = 0; i < n; ++i) {
    double lam = es.eigenvalues()(n - 1 - i);
    if (lam < clamp) lam = 0.0;
    rep.eigenvalues(i) = lam;
    rep.eigenvectors.col(i) = es.eigenvectors().col(n - 1 - i);
  }
  return rep;
}

JonesBeta jones_beta(const DiscreteMeasure& mu, std::span<const double> x,
                     double r, int k) {
  if (k < 0 || k > mu.n)
    throw std::invalid_argument("jones_beta: k must be in [0, n]");
  const MomentReport rep = second_moment(mu, x, r);
  JonesBeta jb;
  if (rep.empty) {
    jb.empty = true;
    return jb;
  }
  double tail = 0.0;
  for (int j = k; j < mu.n; ++j) tail += rep.eigenvalues(j);
  jb.beta_sq = std::pow(r, -(k + 2)) * tail;
  jb.plane_origin = rep.center_of_mass;
  jb.plane_frame = rep.eigenvectors.leftCols(k);
  return jb;
}

double multiscale_beta_integral(const DiscreteMeasure& mu,
                                std::span<const double> x, double r, int k,
                                int scales) {
  if (scales < 1) throw std::invalid_argument("multiscale_beta_integral: scales >= 1");
  const double ln2 = std::log(2.0);
  double total = 0.0;
  for (const auto& a : mu.atoms) {
    if (dist(a.x, x) >= r) continue;
    double inner = 0.0;
    double s = r;
    for (int j = 0; j < scales; ++j) {
      inner += jones_beta(mu, a.x, s, k).beta_sq * ln2;
      s *= 0.5;
    }
    total += a.weight * inner;
  }
  return total;
}

ReifenbergVerdict reifenberg_predicate(const DiscreteMeasure& mu, int k,
                                       double delta6, const Ball& root,
                                       int scales) {
  mu.validate();
  if (!mu.atoms.empty() && !mu.has_radii())
    throw std::invalid_argument("reifenberg_predicate: packing radii required");
  ReifenbergVerdict v;
  v.pass = true;
  for (const auto& a : mu.atoms) {
    v.packing_sum += std::pow(a.radius, k);
    const double slack = root.radius - dist(a.x, root.center);
    if (slack <= 0.0) continue;  // atom outside the root ball
    double r = root.radius;
    while (r > slack) r *= 0.5;
    for (; r >= std::max(a.radius, 1e-12); r *= 0.5) {
      ReifenbergVerdict::BallCheck chk;
      chk.center = a.x;
      chk.r = r;
      chk.integral = multiscale_beta_integral(mu, a.x, r, k, scales);
      chk.bound = delta6 * delta6 * std::pow(r, k);
      chk.pass = chk.integral < chk.bound;
      v.pass = v.pass && chk.pass;
      v.checks.push_back(std::move(chk));
    }
  }
  return v;
}

std::vector<int> vitali_subcover(const std::vector<Ball>& balls) {
  std::vector<int> order(balls.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (balls[a].radius != balls[b].radius)
      return balls[a].radius > balls[b].radius;
    return std::lexicographical_compare(
        balls[a].center.begin(), balls[a].center.end(),
        balls[b].center.begin(), balls[b].center.end());
  });
  std::vector<int> kept;
  for (int i : order) {
    bool ok = true;
    for (int j : kept) {
      if (dist(balls[i].center, balls[j].center) <
          (balls[i].radius + balls[j].radius) / 5.0) {
        ok = false;
        break;
      }
    }
    if (ok) kept.push_back(i);
  }
  std::sort(kept.begin(), kept.end());
  return kept;
}

// ---------------------------------------------------------------------------
// covering tree

namespace {

/// Theta evaluations cached per (point index, radius) with a monotonicity
/// audit: the oracle must be nondecreasing in r.
class ThetaCache {
 public:
  ThetaCache(const std::vector<std::vector<double>>& S, const ThetaOracle& f,
             double tol)
      : S_(S), f_(f), tol_(tol), cache_(S.size()) {}

  double operator()(int idx, double r) {
    auto& known = cache_[idx];
    const auto it = known.find(r);
    if (it != known.end()) return it->second;
    const double v = f_(S_[idx], r);
    // consistency against the cached neighbors
    for (const auto& [rr, vv] : known) {
      if ((rr < r && vv > v + tol_) || (rr > r && v > vv + tol_))
        throw std::runtime_error(
            "covering_tree: theta oracle violates monotonicity in r");
    }
    known.emplace(r, v);
    return v;
  }

 private:
  const std::vector<std::vector<double>>& S_;
  const ThetaOracle& f_;
  double tol_;
  std::vector<std::map<double, double>> cache_;
};

/// Deterministic Vitali cover of a subset of S at radius t: kept centers are
/// 2t/5-separated, so the kept t-balls cover the subset and the t/5-shrinks
/// are disjoint.
std::vector<int> greedy_cover(const std::vector<std::vector<double>>& S,
                              const std::vector<int>& subset, double t) {
  std::vector<int> kept;
  for (int i : subset) {
    bool ok = true;
    for (int j : kept)
      if (dist(S[i], S[j]) < 0.4 * t) {
        ok = false;
        break;
      }
    if (ok) kept.push_back(i);
  }
  return kept;
}

}  // namespace

std::vector<int> CoveringTree::leaves() const {
  std::vector<int> out;
  for (const Node& nd : nodes)
    if (nd.children.empty()) out.push_back(nd.id);
  return out;
}

double CoveringTree::packing_sum(int k) const {
  double s = 0.0;
  for (int id : leaves()) s += std::pow(nodes[id].radius, k);
  return s;
}

bool CoveringTree::covers(const std::vector<std::vector<double>>& S) const {
  const auto leaf_ids = leaves();
  const double root_r = nodes.empty() ? 0.0 : nodes.front().radius;
  for (const auto& p : S) {
    std::vector<double> origin(p.size(), 0.0);
    if (dist(p, origin) >= root_r) continue;  // outside the root ball
    bool inside = false;
    for (int id : leaf_ids) {
      if (dist(p, nodes[id].center) < nodes[id].radius) {
        inside = true;
        break;
      }
    }
    if (!inside) return false;
  }
  return true;
}

std::string to_string(CoveringTree::Class c) {
  switch (c) {
    case CoveringTree::Class::RBall: return "r-ball";
    case CoveringTree::Class::Final: return "final";
    case CoveringTree::Class::Bad: return "bad";
  }
  return "?";
}

CoveringTree covering_tree(const std::vector<std::vector<double>>& S,
                           const ThetaOracle& theta, const CoverParams& params) {
  if (!(params.rho > 0.0) || params.rho > 0.01 + 1e-15)
    throw std::invalid_argument("covering_tree: need 0 < rho <= 1/100");
  if (!(params.r > 0.0) || !(params.r < params.R) || params.R > 1.0 + 1e-15)
    throw std::invalid_argument("covering_tree: need 0 < r < R <= 1");

  CoveringTree tree;
  tree.params = params;
  const int n = S.empty() ? 1 : static_cast<int>(S.front().size());
  std::vector<double> origin(n, 0.0);

  // points inside the root ball
  std::vector<int> root_pts;
  for (int i = 0; i < static_cast<int>(S.size()); ++i)
    if (dist(S[i], origin) < params.R) root_pts.push_back(i);
  if (root_pts.empty()) return tree;

  ThetaCache cache(S, theta, params.oracle_tol);
  double E = 0.0;
  for (int i : root_pts) E = std::max(E, cache(i, 2.0 * params.R));
  tree.root_energy = E;
  const double delta = params.delta > 0.0 ? params.delta : 0.05 * std::max(E, 1e-12);

  struct WorkItem {
    int node;
    std::vector<int> pts;  // S indices inside the ball
  };
  std::vector<WorkItem> queue;

  auto add_node = [&](int parent, std::vector<double> center, double radius,
                      CoveringTree::Class cls) {
    if (static_cast<std::int64_t>(tree.nodes.size()) >= params.node_budget)
      throw std::runtime_error("covering_tree: node budget exceeded");
    CoveringTree::Node nd;
    nd.id = static_cast<int>(tree.nodes.size());
    nd.parent = parent;
    nd.center = std::move(center);
    nd.radius = radius;
    nd.cls = cls;
    if (parent >= 0) tree.nodes[parent].children.push_back(nd.id);
    tree.nodes.push_back(std::move(nd));
    return tree.nodes.back().id;
  };

  const int root =
      add_node(-1, origin, params.R, CoveringTree::Class::Bad);
  queue.push_back({root, root_pts});

  while (!queue.empty()) {
    WorkItem item = std::move(queue.back());
    queue.pop_back();
    // note: tree.nodes may reallocate when children are added, so the node
    // is always addressed by index
    const double rad = tree.nodes[item.node].radius;

    if (rad <= params.r * (1.0 + 1e-12)) {
      tree.nodes[item.node].cls = CoveringTree::Class::RBall;
      continue;
    }

    // pinched set F: points whose density at scale rho*rad/10 stays within
    // delta of the root energy
    std::vector<int> pinched;
    for (int i : item.pts)
      if (cache(i, params.rho * rad / 10.0) > E - delta) pinched.push_back(i);

    int span_dim = -1;
    EffectiveSpan es;
    if (!pinched.empty()) {
      std::vector<std::vector<double>> pts;
      pts.reserve(pinched.size());
      for (int i : pinched) pts.push_back(S[i]);
      es = effective_span(pts, params.rho * rad / 10.0);
      span_dim = es.dim;
    }

    const double child_r = std::max(params.r, params.rho * rad);

    if (span_dim >= params.k) {
      // high-dimensional pinching: refine everywhere (bad children)
      tree.nodes[item.node].cls = CoveringTree::Class::Bad;
      for (int c : greedy_cover(S, item.pts, child_r)) {
        std::vector<int> sub;
        for (int i : item.pts)
          if (dist(S[i], S[c]) < child_r) sub.push_back(i);
        const int id = add_node(item.node, S[c], child_r,
                                CoveringTree::Class::Bad);
        queue.push_back({id, std::move(sub)});
      }
      continue;
    }

    // low-dimensional pinching: points near F keep refining (bad), the rest
    // become final balls carrying an energy-drop certificate
    tree.nodes[item.node].cls = CoveringTree::Class::Bad;
    std::vector<int> near_f, away;
    for (int i : item.pts) {
      double dmin = std::numeric_limits<double>::infinity();
      for (int j : pinched)
        dmin = std::min(dmin, dist(S[i], S[j]));
      if (dmin < 2.0 * params.rho * rad)
        near_f.push_back(i);
      else
        away.push_back(i);
    }

    for (int c : greedy_cover(S, near_f, child_r)) {
      std::vector<int> sub;
      for (int i : item.pts)
        if (dist(S[i], S[c]) < child_r) sub.push_back(i);
      const int id =
          add_node(item.node, S[c], child_r, CoveringTree::Class::Bad);
      queue.push_back({id, std::move(sub)});
    }

    // final balls: shrink until the certificate verifies (monotone oracle
    // guarantees success by t = rho*rad/20)
    double t = child_r;
    while (!away.empty()) {
      const auto cover = greedy_cover(S, away, t);
      bool all_ok = true;
      std::vector<double> sups(cover.size(), 0.0);
      for (std::size_t ci = 0; ci < cover.size(); ++ci) {
        double sup = 0.0;
        for (int i : item.pts)
          if (dist(S[i], S[cover[ci]]) < t) sup = std::max(sup, cache(i, 2.0 * t));
        sups[ci] = sup;
        all_ok = all_ok && (sup <= E - delta + 1e-12);
      }
      if (all_ok || t <= params.r * (1.0 + 1e-12)) {
        for (std::size_t ci = 0; ci < cover.size(); ++ci) {
          const auto cls = all_ok ? CoveringTree::Class::Final
                                  : CoveringTree::Class::RBall;
          const int id = add_node(item.node, S[cover[ci]], t, cls);
          if (all_ok) {
            tree.nodes[id].has_certificate = true;
            tree.nodes[id].cert_energy_before = E;
            tree.nodes[id].cert_sup_after = sups[ci];
            tree.nodes[id].cert_drop = E - sups[ci];
          }
        }
        break;
      }
      t = std::max(params.r, 0.5 * t);
    }
  }
  return tree;
}

}  // namespace fracmap
