#pragma once

// Shared fixtures and brute-force oracles for the test binaries.

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "cbpoison/attack.hpp"
#include "cbpoison/bandit.hpp"
#include "cbpoison/qp.hpp"
#include "cbpoison/rng.hpp"

namespace cbtest {

using cbpoison::History;
using cbpoison::Rng;

inline Eigen::VectorXd gaussian_vector(int n, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = g(rng);
  return v;
}

inline int uniform_int(int lo, int hi, Rng& rng) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

inline double uniform_real(double lo, double hi, Rng& rng) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

/// K arms with 0..max_rows Gaussian rows each.
inline History random_history(int d, int K, int max_rows, Rng& rng, int min_rows = 0) {
  History h = History::empty(d, K);
  for (auto& arm : h.arms) {
    const int m = uniform_int(min_rows, max_rows, rng);
    arm.contexts.resize(m, d);
    for (int i = 0; i < m; ++i) arm.contexts.row(i) = gaussian_vector(d, rng).transpose();
    arm.rewards = gaussian_vector(m, rng);
  }
  return h;
}

/// Coarse-to-fine grid search for min ||z||^2 over {z : feasible(z)} inside
/// the box [lo, hi]. Each level scans `points` values per axis and zooms into
/// a window half as wide around the best feasible point. Returns nothing
/// when no grid point of the first level is feasible.
struct GridResult {
  Eigen::VectorXd argmin;
  double objective = std::numeric_limits<double>::infinity();
};

inline std::optional<GridResult> grid_min_norm(const std::function<bool(const Eigen::VectorXd&)>& feasible,
                                               Eigen::VectorXd lo, Eigen::VectorXd hi, int points = 41,
                                               int levels = 16) {
  const int n = static_cast<int>(lo.size());
  std::optional<GridResult> best;
  for (int level = 0; level < levels; ++level) {
    Eigen::VectorXd step = (hi - lo) / (points - 1);
    std::vector<int> idx(static_cast<std::size_t>(n), 0);
    Eigen::VectorXd z(n);
    bool done = n == 0;
    if (n == 0) {
      if (feasible(z)) best = GridResult{z, 0.0};
    }
    while (!done) {
      for (int k = 0; k < n; ++k) z(k) = lo(k) + step(k) * idx[static_cast<std::size_t>(k)];
      const double obj = z.squaredNorm();
      if ((!best || obj < best->objective) && feasible(z)) best = GridResult{z, obj};
      int k = 0;
      while (k < n && ++idx[static_cast<std::size_t>(k)] == points) idx[static_cast<std::size_t>(k++)] = 0;
      done = k == n;
    }
    if (!best) return best;
    const Eigen::VectorXd lo0 = lo, hi0 = hi;
    // Halve the window per level; faster zooms strand the search in thin wedges.
    const double half = (points - 1) / 4.0;
    lo = (best->argmin - half * step).cwiseMax(lo0);
    hi = (best->argmin + half * step).cwiseMin(hi0);
  }
  return best;
}

/// Exact min ||z||^2 subject to G z >= h by enumerating candidate active sets:
/// for every subset S of rows, the least-norm solution of G_S z = h_S is a
/// candidate; the feasible candidate with the smallest norm is optimal.
inline std::optional<double> enumerate_min_norm(const Eigen::MatrixXd& g, const Eigen::VectorXd& h, double tol = 1e-9) {
  const int c = static_cast<int>(g.rows());
  std::optional<double> best;
  for (int mask = 0; mask < (1 << c); ++mask) {
    std::vector<int> rows;
    for (int r = 0; r < c; ++r)
      if (mask & (1 << r)) rows.push_back(r);
    Eigen::VectorXd z = Eigen::VectorXd::Zero(g.cols());
    if (!rows.empty()) {
      Eigen::MatrixXd gs(static_cast<Eigen::Index>(rows.size()), g.cols());
      Eigen::VectorXd hs(static_cast<Eigen::Index>(rows.size()));
      for (std::size_t i = 0; i < rows.size(); ++i) {
        gs.row(static_cast<Eigen::Index>(i)) = g.row(rows[i]);
        hs(static_cast<Eigen::Index>(i)) = h(rows[i]);
      }
      z = gs.completeOrthogonalDecomposition().solve(hs);
      if ((gs * z - hs).cwiseAbs().maxCoeff() > 1e-9 * (1.0 + hs.cwiseAbs().maxCoeff())) continue;
    }
    if (c > 0 && (g * z - h).minCoeff() < -tol) continue;
    if (!best || z.squaredNorm() < *best) best = z.squaredNorm();
  }
  return best;
}

/// Random QP with at most `max_vars` variables and `max_rows` rows that is
/// feasible by construction: a random point z0 satisfies every row (and sits
/// inside the box when one is requested), so the optimum norm is <= ||z0||.
struct PlantedQP {
  cbpoison::MinNormQP qp;
  Eigen::VectorXd witness;
};

inline PlantedQP planted_qp(int max_vars, int max_rows, bool boxed, Rng& rng) {
  PlantedQP out;
  const int n = uniform_int(1, max_vars, rng);
  const int c = uniform_int(0, max_rows, rng);
  out.witness = gaussian_vector(n, rng, 1.5);
  out.qp.g_matrix.resize(c, n);
  out.qp.h_vector.resize(c);
  for (int r = 0; r < c; ++r) {
    out.qp.g_matrix.row(r) = gaussian_vector(n, rng).transpose();
    out.qp.h_vector(r) = out.qp.g_matrix.row(r).dot(out.witness) - uniform_real(0.0, 0.5, rng);
  }
  if (boxed) {
    cbpoison::BoxBounds box;
    box.shift = gaussian_vector(n, rng);
    box.lower.resize(n);
    box.upper.resize(n);
    for (int i = 0; i < n; ++i) {
      const double at = out.witness(i) + box.shift(i);
      box.lower(i) = at - uniform_real(0.05, 1.0, rng);
      box.upper(i) = at + uniform_real(0.05, 1.0, rng);
    }
    out.qp.box = box;
  }
  return out;
}

/// Grid-search objective of a MinNormQP, searching the cube of half-width
/// ||witness|| (or the box, when tighter).
inline std::optional<GridResult> grid_oracle(const cbpoison::MinNormQP& qp, const Eigen::VectorXd& witness) {
  const auto n = qp.num_variables();
  const double r = witness.norm() * (1.0 + 1e-9) + 1e-9;
  Eigen::VectorXd lo = Eigen::VectorXd::Constant(n, -r);
  Eigen::VectorXd hi = Eigen::VectorXd::Constant(n, r);
  if (qp.box) {
    lo = lo.cwiseMax(qp.box->lower - qp.box->shift);
    hi = hi.cwiseMin(qp.box->upper - qp.box->shift);
  }
  auto feasible = [&](const Eigen::VectorXd& z) {
    if (qp.num_constraints() > 0 && (qp.g_matrix * z - qp.h_vector).minCoeff() < 0.0) return false;
    return true;
  };
  return grid_min_norm(feasible, lo, hi);
}

/// Partial dual of a MinNormQP over the row multipliers mu >= 0:
///   q(mu) = min_{z in box} ||z||^2 - mu^T (G z - h),
/// whose inner minimum is the coordinate-wise clamp of G^T mu / 2. Any mu
/// gives a lower bound on the optimum and the maximum equals it. The grid
/// contains the faces mu_i = 0, where a primal grid would straddle the
/// active constraints instead. The search range doubles while the best point
/// sits on its upper face.
inline double dual_grid_oracle(const cbpoison::MinNormQP& qp, int points = 21, int levels = 50) {
  const auto n = qp.num_variables();
  const auto c = qp.num_constraints();
  Eigen::VectorXd zlo = Eigen::VectorXd::Constant(n, -std::numeric_limits<double>::infinity());
  Eigen::VectorXd zhi = -zlo;
  if (qp.box) {
    zlo = qp.box->lower - qp.box->shift;
    zhi = qp.box->upper - qp.box->shift;
  }
  auto q = [&](const Eigen::VectorXd& mu) {
    const Eigen::VectorXd z = (0.5 * qp.g_matrix.transpose() * mu).cwiseMax(zlo).cwiseMin(zhi);
    return z.squaredNorm() - mu.dot(qp.g_matrix * z - qp.h_vector);
  };
  if (c == 0) return q(Eigen::VectorXd::Zero(0));

  for (double range = 4.0;; range *= 2.0) {
    Eigen::VectorXd lo = Eigen::VectorXd::Zero(c), hi = Eigen::VectorXd::Constant(c, range);
    Eigen::VectorXd best_mu = lo;
    double best = q(best_mu);
    for (int level = 0; level < levels; ++level) {
      const Eigen::VectorXd step = (hi - lo) / (points - 1);
      std::vector<int> idx(static_cast<std::size_t>(c), 0);
      Eigen::VectorXd mu(c);
      for (bool done = false; !done;) {
        for (Eigen::Index k = 0; k < c; ++k) mu(k) = lo(k) + step(k) * idx[static_cast<std::size_t>(k)];
        if (const double v = q(mu); v > best) {
          best = v;
          best_mu = mu;
        }
        Eigen::Index k = 0;
        while (k < c && ++idx[static_cast<std::size_t>(k)] == points) idx[static_cast<std::size_t>(k++)] = 0;
        done = k == c;
      }
      const double half = (points - 1) / 4.0;
      const Eigen::VectorXd lo0 = lo, hi0 = hi;
      lo = (best_mu - half * step).cwiseMax(lo0);
      hi = (best_mu + half * step).cwiseMin(hi0);
    }
    if ((best_mu.array() < 0.999 * range).all() || range > 1e6) return best;
  }
}

inline cbpoison::BanditConfig unit_config() {
  cbpoison::BanditConfig c;
  c.sigma = 1.0;
  c.s_bound = 1.0;
  c.lambda = 1.0;
  c.delta = 0.05;
  return c;
}

inline cbpoison::AttackSpec make_spec(Eigen::VectorXd x, int arm, double eps) {
  cbpoison::AttackSpec s;
  s.target_context = std::move(x);
  s.target_arm = arm;
  s.epsilon = eps;
  return s;
}

// Random small instance; with probability 1/3 the target context is made
// orthogonal to the target arm's data so the second witness branches occur.
struct Instance {
  History history;
  cbpoison::AttackSpec spec;
};

inline Instance random_instance(Rng& rng) {
  const int d = uniform_int(1, 4, rng);
  const int K = uniform_int(2, 4, rng);
  Instance out{random_history(d, K, 4, rng), {}};
  out.spec = make_spec(gaussian_vector(d, rng), uniform_int(0, K - 1, rng),
                       uniform_real(1e-3, 1.0, rng));
  if (uniform_int(0, 2, rng) == 0 && d >= 2) {
    auto& target = out.history.arms[static_cast<std::size_t>(out.spec.target_arm)].contexts;
    const Eigen::VectorXd& x = out.spec.target_context;
    for (Eigen::Index i = 0; i < target.rows(); ++i)
      target.row(i) -= (target.row(i).dot(x) / x.squaredNorm()) * x.transpose();
    target = (target.array().abs() < 1e-12).select(0.0, target);
  }
  return out;
}

}  // namespace cbtest
