#include "cbpoison/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include "cbpoison/error.hpp"

namespace cbpoison {

std::string to_string(QPStatus s) {
  switch (s) {
    case QPStatus::Optimal:
      return "Optimal";
    case QPStatus::Infeasible:
      return "Infeasible";
    case QPStatus::IterLimit:
      return "IterLimit";
  }
  return "Unknown";
}

void MinNormQP::validate() const {
  require(h_vector.size() == g_matrix.rows(), "h must have one entry per row of G", Errc::dimension_mismatch);
  if (box) {
    const auto n = g_matrix.cols();
    require(box->lower.size() == n && box->upper.size() == n && box->shift.size() == n,
            "box vectors must have one entry per variable", Errc::dimension_mismatch);
  }
}

double KktReport::max() const {
  return std::max({stationarity, primal_feasibility, dual_feasibility, complementarity});
}

KktReport verify_kkt(const MinNormQP& qp, const QPSolution& solution) {
  qp.validate();
  const auto n = qp.num_variables();
  const auto c = qp.num_constraints();
  require(solution.delta.size() == n, "solution has the wrong variable count", Errc::dimension_mismatch);
  const Eigen::VectorXd& delta = solution.delta;
  const Eigen::VectorXd mu = solution.multipliers.size() == c ? solution.multipliers : Eigen::VectorXd::Zero(c);
  const Eigen::VectorXd nu = solution.box_multipliers.size() == n ? solution.box_multipliers : Eigen::VectorXd::Zero(n);

  KktReport r;
  Eigen::VectorXd grad = 2.0 * delta - qp.g_matrix.transpose() * mu;
  if (qp.box) grad -= nu;
  r.stationarity = n > 0 ? grad.cwiseAbs().maxCoeff() : 0.0;

  if (c > 0) {
    const Eigen::VectorXd slack = qp.g_matrix * delta - qp.h_vector;
    r.primal_feasibility = std::max(0.0, (-slack).maxCoeff());
    r.dual_feasibility = std::max(0.0, (-mu).maxCoeff());
    r.complementarity = mu.cwiseProduct(slack).cwiseAbs().maxCoeff();
  }
  if (qp.box && n > 0) {
    const Eigen::VectorXd lo = qp.box->lower - qp.box->shift;
    const Eigen::VectorXd hi = qp.box->upper - qp.box->shift;
    const Eigen::VectorXd below = lo - delta;
    const Eigen::VectorXd above = delta - hi;
    r.primal_feasibility = std::max({r.primal_feasibility, below.maxCoeff(), above.maxCoeff()});
    const Eigen::VectorXd lower_part = nu.cwiseMax(0.0).cwiseProduct((delta - lo).cwiseAbs());
    const Eigen::VectorXd upper_part = (-nu).cwiseMax(0.0).cwiseProduct((hi - delta).cwiseAbs());
    r.complementarity = std::max({r.complementarity, lower_part.maxCoeff(), upper_part.maxCoeff()});
  }
  return r;
}

NnlsResult nnls(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, int max_iter) {
  require(a.rows() == b.size(), "nnls: row count mismatch", Errc::dimension_mismatch);
  const Eigen::Index n = a.cols();
  NnlsResult out;
  out.x = Eigen::VectorXd::Zero(n);
  if (n == 0) {
    out.converged = true;
    return out;
  }
  const double eps = std::numeric_limits<double>::epsilon();
  const double tol = 10.0 * eps * a.cwiseAbs().colwise().sum().maxCoeff() * static_cast<double>(std::max(a.rows(), n));

  std::vector<bool> passive(static_cast<std::size_t>(n), false);
  std::vector<bool> blocked(static_cast<std::size_t>(n), false);
  Eigen::VectorXd& x = out.x;
  Eigen::VectorXd w = a.transpose() * (b - a * x);

  auto passive_indices = [&] {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index j = 0; j < n; ++j)
      if (passive[static_cast<std::size_t>(j)]) idx.push_back(j);
    return idx;
  };
  auto solve_passive = [&](const std::vector<Eigen::Index>& idx) {
    Eigen::MatrixXd sub(a.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) sub.col(static_cast<Eigen::Index>(k)) = a.col(idx[k]);
    const Eigen::VectorXd zp = sub.colPivHouseholderQr().solve(b);
    Eigen::VectorXd z = Eigen::VectorXd::Zero(n);
    for (std::size_t k = 0; k < idx.size(); ++k) z(idx[k]) = zp(static_cast<Eigen::Index>(k));
    return z;
  };

  while (true) {
    Eigen::Index entering = -1;
    double best = tol;
    for (Eigen::Index j = 0; j < n; ++j) {
      const auto uj = static_cast<std::size_t>(j);
      if (!passive[uj] && !blocked[uj] && w(j) > best) {
        best = w(j);
        entering = j;
      }
    }
    if (entering < 0) {
      out.converged = true;
      return out;
    }
    if (out.iterations >= max_iter) return out;

    passive[static_cast<std::size_t>(entering)] = true;
    bool first = true;
    bool moved = false;
    while (true) {
      ++out.iterations;
      const auto idx = passive_indices();
      const Eigen::VectorXd z = solve_passive(idx);
      if (first && z(entering) <= 0.0) {
        // Rounding made the entering column useless; skip it until x moves.
        passive[static_cast<std::size_t>(entering)] = false;
        blocked[static_cast<std::size_t>(entering)] = true;
        break;
      }
      first = false;
      bool all_positive = true;
      for (auto j : idx)
        if (z(j) <= 0.0) all_positive = false;
      if (all_positive) {
        x = z;
        moved = true;
        break;
      }
      double alpha = std::numeric_limits<double>::infinity();
      Eigen::Index leaving = -1;
      for (auto j : idx) {
        if (z(j) > 0.0) continue;
        const double step = x(j) / (x(j) - z(j));
        if (step < alpha) {
          alpha = step;
          leaving = j;
        }
      }
      x += alpha * (z - x);
      moved = true;
      x(leaving) = 0.0;
      for (auto j : idx) {
        if (x(j) <= 0.0) {
          x(j) = 0.0;
          passive[static_cast<std::size_t>(j)] = false;
        }
      }
      if (out.iterations >= max_iter) return out;
    }
    if (moved) std::fill(blocked.begin(), blocked.end(), false);
    w = a.transpose() * (b - a * x);
  }
}

namespace {

constexpr double kFarkasTol = 1e-9;

// Rows of G scaled to unit norm; exactly-zero rows are split off because
// they carry no direction and decide feasibility on their own.
struct NormalizedRows {
  std::vector<Eigen::Index> kept;
  Eigen::MatrixXd g;
  Eigen::VectorXd h;
  Eigen::VectorXd norms;
  Eigen::Index blocking_zero_row = -1;
};

NormalizedRows normalize_rows(const MinNormQP& qp) {
  NormalizedRows out;
  const auto c = qp.num_constraints();
  for (Eigen::Index i = 0; i < c; ++i) {
    const double norm = qp.g_matrix.row(i).norm();
    if (norm > 0.0) {
      out.kept.push_back(i);
    } else if (qp.h_vector(i) > 0.0 && out.blocking_zero_row < 0) {
      out.blocking_zero_row = i;
    }
  }
  const auto k = static_cast<Eigen::Index>(out.kept.size());
  out.g.resize(k, qp.num_variables());
  out.h.resize(k);
  out.norms.resize(k);
  for (Eigen::Index r = 0; r < k; ++r) {
    const auto i = out.kept[static_cast<std::size_t>(r)];
    out.norms(r) = qp.g_matrix.row(i).norm();
    out.g.row(r) = qp.g_matrix.row(i) / out.norms(r);
    out.h(r) = qp.h_vector(i) / out.norms(r);
  }
  return out;
}

Eigen::VectorXd expand(const NormalizedRows& rows, const Eigen::VectorXd& reduced, Eigen::Index c) {
  Eigen::VectorXd full = Eigen::VectorXd::Zero(c);
  for (std::size_t r = 0; r < rows.kept.size(); ++r) full(rows.kept[r]) = reduced(static_cast<Eigen::Index>(r));
  return full;
}

void finalize(const MinNormQP& qp, const QPTolerances& tol, QPSolution& sol) {
  sol.objective = sol.delta.squaredNorm();
  const KktReport kkt = verify_kkt(qp, sol);
  sol.feasibility_residual = kkt.primal_feasibility;
  sol.kkt_residual = std::max({kkt.stationarity, kkt.dual_feasibility, kkt.complementarity});
  if (sol.status == QPStatus::Optimal && (sol.feasibility_residual > tol.feas || sol.kkt_residual > tol.kkt))
    sol.status = QPStatus::IterLimit;
}

QPSolution infeasible_from_zero_row(const MinNormQP& qp, Eigen::Index row) {
  QPSolution sol;
  sol.status = QPStatus::Infeasible;
  sol.delta = Eigen::VectorXd::Zero(qp.num_variables());
  sol.multipliers = Eigen::VectorXd::Zero(qp.num_constraints());
  sol.farkas = Eigen::VectorXd::Zero(qp.num_constraints());
  sol.farkas(row) = 1.0 / qp.h_vector(row);
  sol.feasibility_residual = qp.h_vector(row);
  return sol;
}

// Minimum-norm point of {delta : g delta = h} restricted to the rows in
// `active`; the multiplier of that projection is returned alongside.
bool project_onto_active(const Eigen::MatrixXd& g, const Eigen::VectorXd& h, const std::vector<Eigen::Index>& active,
                         Eigen::VectorXd& delta, Eigen::VectorXd& mu) {
  const auto k = static_cast<Eigen::Index>(active.size());
  mu = Eigen::VectorXd::Zero(g.rows());
  if (k == 0) {
    delta = Eigen::VectorXd::Zero(g.cols());
    return true;
  }
  Eigen::MatrixXd ga(k, g.cols());
  Eigen::VectorXd ha(k);
  for (Eigen::Index r = 0; r < k; ++r) {
    ga.row(r) = g.row(active[static_cast<std::size_t>(r)]);
    ha(r) = h(active[static_cast<std::size_t>(r)]);
  }
  const Eigen::MatrixXd gram = ga * ga.transpose();
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(gram);
  Eigen::VectorXd lam = cod.solve(ha);
  // one step of iterative refinement
  lam += cod.solve(ha - gram * lam);
  delta = ga.transpose() * lam;
  for (Eigen::Index r = 0; r < k; ++r) mu(active[static_cast<std::size_t>(r)]) = 2.0 * lam(r);
  return (lam.array() >= 0.0).all();
}

QPSolution solve_box_free(const MinNormQP& qp, const QPTolerances& tol) {
  const auto n = qp.num_variables();
  const auto c = qp.num_constraints();
  QPSolution sol;
  sol.delta = Eigen::VectorXd::Zero(n);
  sol.multipliers = Eigen::VectorXd::Zero(c);

  const NormalizedRows rows = normalize_rows(qp);
  if (rows.blocking_zero_row >= 0) return infeasible_from_zero_row(qp, rows.blocking_zero_row);
  const auto k = static_cast<Eigen::Index>(rows.kept.size());
  if (k == 0 || rows.h.maxCoeff() <= 0.0) {
    sol.status = QPStatus::Optimal;
    finalize(qp, tol, sol);
    return sol;
  }

  // Least-distance programming: with E = [G; h^T]^T-stacked and f = e_{n+1},
  // the NNLS residual r = E u - f gives delta = -r_{1:n} / r_{n+1}, and a
  // zero residual is a Farkas certificate.
  const double scale = 1.0 / rows.h.cwiseAbs().maxCoeff();
  const Eigen::VectorXd hs = rows.h * scale;
  Eigen::MatrixXd e(n + 1, k);
  e.topRows(n) = rows.g.transpose();
  e.row(n) = hs.transpose();
  Eigen::VectorXd f = Eigen::VectorXd::Zero(n + 1);
  f(n) = 1.0;

  Eigen::MatrixXd a = e;
  Eigen::VectorXd b = f;
  if (n + 1 > k) {
    // Same NNLS problem on the k x k triangular factor.
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(e);
    a = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
    const Eigen::VectorXd qtf = qr.householderQ().adjoint() * f;
    b = qtf.head(k);
  }
  const int cap = tol.active_set_max_iter > 0 ? tol.active_set_max_iter : static_cast<int>(100 * (n + c));
  const NnlsResult ls = nnls(a, b, cap);
  sol.iterations = ls.iterations;
  if (!ls.converged) {
    sol.status = QPStatus::IterLimit;
    finalize(qp, tol, sol);
    return sol;
  }
  const Eigen::VectorXd& u = ls.x;
  const double hu = hs.dot(u);
  const Eigen::VectorXd gu = rows.g.transpose() * u;

  if (hu > 0.0 && (gu / hu).cwiseAbs().maxCoeff() <= kFarkasTol) {
    sol.status = QPStatus::Infeasible;
    // G^T (D u) = Gn^T u ~ 0 and h^T (D u) = hu / scale; normalize to h^T mu = 1
    Eigen::VectorXd cert = u.cwiseQuotient(rows.norms) * (scale / hu);
    sol.farkas = expand(rows, cert, c);
    sol.feasibility_residual = std::numeric_limits<double>::infinity();
    sol.objective = std::numeric_limits<double>::infinity();
    return sol;
  }

  const double denom = 1.0 - hu;  // equals ||E u - f||^2 at the NNLS optimum
  sol.delta = gu / (denom * scale);
  sol.multipliers = expand(rows, u.cwiseQuotient(rows.norms) * (2.0 / (denom * scale)), c);
  sol.status = QPStatus::Optimal;
  finalize(qp, tol, sol);

  // Re-solve the equality system on the support of u; keep whichever
  // candidate has the smaller KKT violation.
  std::vector<Eigen::Index> support;
  for (Eigen::Index r = 0; r < k; ++r)
    if (u(r) > 0.0) support.push_back(r);
  Eigen::VectorXd d2, mu2;
  if (project_onto_active(rows.g, rows.h, support, d2, mu2)) {
    QPSolution alt = sol;
    alt.delta = d2;
    alt.multipliers = expand(rows, mu2.cwiseQuotient(rows.norms), c);
    alt.status = QPStatus::Optimal;
    finalize(qp, tol, alt);
    const double a_err = std::max(alt.feasibility_residual, alt.kkt_residual);
    const double s_err = std::max(sol.feasibility_residual, sol.kkt_residual);
    if (alt.status == QPStatus::Optimal && (sol.status != QPStatus::Optimal || a_err < s_err)) return alt;
  }
  if (sol.status != QPStatus::Optimal) sol.status = QPStatus::IterLimit;
  return sol;
}

// ADMM on  min ||x||^2  s.t.  Gn x >= hn,  lo <= x <= hi  with the splitting
// z = [Gn x; x]. The x-update system (c I + rho_g Gn^T Gn) is inverted with
// the Woodbury identity through a C x C factorization.
class BoxedAdmm {
 public:
  BoxedAdmm(const Eigen::MatrixXd& g, const Eigen::VectorXd& h, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi)
      : g_(g), h_(h), lo_(lo), hi_(hi), ggt_(g * g.transpose()) {}

  QPSolution run(const MinNormQP& qp, const NormalizedRows& rows, const QPTolerances& tol);

 private:
  void factor();
  Eigen::VectorXd solve_system(const Eigen::VectorXd& rhs) const;
  bool polish(const MinNormQP& qp, const NormalizedRows& rows, const QPTolerances& tol, QPSolution& out) const;

  const Eigen::MatrixXd& g_;
  const Eigen::VectorXd& h_;
  const Eigen::VectorXd& lo_;
  const Eigen::VectorXd& hi_;
  Eigen::MatrixXd ggt_;

  double rho_ = 0.1;
  double sigma_ = 1e-6;
  double alpha_ = 1.6;
  double diag_ = 0.0;
  Eigen::LDLT<Eigen::MatrixXd> small_;

  Eigen::VectorXd x_, zg_, zb_, yg_, yb_;
};

void BoxedAdmm::factor() {
  diag_ = 2.0 + sigma_ + rho_;
  const auto k = ggt_.rows();
  small_.compute((diag_ / rho_) * Eigen::MatrixXd::Identity(k, k) + ggt_);
}

Eigen::VectorXd BoxedAdmm::solve_system(const Eigen::VectorXd& rhs) const {
  if (ggt_.rows() == 0) return rhs / diag_;
  const Eigen::VectorXd t = small_.solve(g_ * rhs);
  return (rhs - g_.transpose() * t) / diag_;
}

bool BoxedAdmm::polish(const MinNormQP& qp, const NormalizedRows& rows, const QPTolerances& tol,
                       QPSolution& out) const {
  const auto n = x_.size();
  const auto k = g_.rows();
  // Guess active sets from the ADMM iterate (OSQP's rule).
  std::vector<Eigen::Index> active_rows;
  for (Eigen::Index i = 0; i < k; ++i)
    if (zg_(i) - h_(i) < -yg_(i)) active_rows.push_back(i);
  Eigen::VectorXd fixed = Eigen::VectorXd::Zero(n);
  std::vector<bool> is_fixed(static_cast<std::size_t>(n), false);
  std::vector<Eigen::Index> free_idx;
  for (Eigen::Index j = 0; j < n; ++j) {
    if (zb_(j) - lo_(j) < -yb_(j)) {
      fixed(j) = lo_(j);
      is_fixed[static_cast<std::size_t>(j)] = true;
    } else if (hi_(j) - zb_(j) < yb_(j)) {
      fixed(j) = hi_(j);
      is_fixed[static_cast<std::size_t>(j)] = true;
    } else {
      free_idx.push_back(j);
    }
  }
  const auto ka = static_cast<Eigen::Index>(active_rows.size());
  Eigen::VectorXd delta = fixed;
  Eigen::VectorXd mu_n = Eigen::VectorXd::Zero(k);
  if (ka > 0) {
    Eigen::MatrixXd gaf(ka, static_cast<Eigen::Index>(free_idx.size()));
    Eigen::VectorXd rhs(ka);
    for (Eigen::Index r = 0; r < ka; ++r) {
      const auto i = active_rows[static_cast<std::size_t>(r)];
      for (std::size_t q = 0; q < free_idx.size(); ++q) gaf(r, static_cast<Eigen::Index>(q)) = g_(i, free_idx[q]);
      rhs(r) = h_(i) - g_.row(i).dot(fixed);
    }
    const Eigen::MatrixXd m = 0.5 * gaf * gaf.transpose();
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(m);
    Eigen::VectorXd mu_a = cod.solve(rhs);
    mu_a += cod.solve(rhs - m * mu_a);
    const Eigen::VectorXd df = 0.5 * gaf.transpose() * mu_a;
    for (std::size_t q = 0; q < free_idx.size(); ++q) delta(free_idx[q]) = df(static_cast<Eigen::Index>(q));
    for (Eigen::Index r = 0; r < ka; ++r) mu_n(active_rows[static_cast<std::size_t>(r)]) = mu_a(r);
  }
  QPSolution cand;
  cand.status = QPStatus::Optimal;
  cand.delta = delta;
  cand.multipliers = expand(rows, mu_n.cwiseQuotient(rows.norms), qp.num_constraints());
  cand.box_multipliers = 2.0 * delta - g_.transpose() * mu_n;
  for (Eigen::Index j = 0; j < n; ++j)
    if (!is_fixed[static_cast<std::size_t>(j)]) cand.box_multipliers(j) = 0.0;
  finalize(qp, tol, cand);
  if (cand.status != QPStatus::Optimal) return false;
  out = std::move(cand);
  return true;
}

QPSolution BoxedAdmm::run(const MinNormQP& qp, const NormalizedRows& rows, const QPTolerances& tol) {
  const auto n = lo_.size();
  const auto k = g_.rows();
  x_ = Eigen::VectorXd::Zero(n);
  zg_ = Eigen::VectorXd::Zero(k);
  zb_ = Eigen::VectorXd::Zero(n);
  yg_ = Eigen::VectorXd::Zero(k);
  yb_ = Eigen::VectorXd::Zero(n);
  factor();

  constexpr int kCheckEvery = 10;
  constexpr int kAdaptEvery = 100;
  double best_prim = std::numeric_limits<double>::infinity();
  int last_improvement = 0;
  QPSolution out;

  for (int it = 1; it <= tol.splitting_max_iter; ++it) {
    const Eigen::VectorXd rhs = sigma_ * x_ + g_.transpose() * (rho_ * zg_ - yg_) + (rho_ * zb_ - yb_);
    const Eigen::VectorXd xt = solve_system(rhs);
    const Eigen::VectorXd zgt = g_ * xt;
    x_ = alpha_ * xt + (1.0 - alpha_) * x_;
    const Eigen::VectorXd vg = alpha_ * zgt + (1.0 - alpha_) * zg_;
    const Eigen::VectorXd vb = alpha_ * xt + (1.0 - alpha_) * zb_;
    const Eigen::VectorXd zg_new = (vg + yg_ / rho_).cwiseMax(h_);
    const Eigen::VectorXd zb_new = (vb + yb_ / rho_).cwiseMax(lo_).cwiseMin(hi_);
    yg_ += rho_ * (vg - zg_new);
    yb_ += rho_ * (vb - zb_new);
    zg_ = zg_new;
    zb_ = zb_new;

    if (it % kCheckEvery != 0) continue;
    const Eigen::VectorXd gx = g_ * x_;
    double prim = n > 0 ? (x_ - zb_).cwiseAbs().maxCoeff() : 0.0;
    if (k > 0) prim = std::max(prim, (gx - zg_).cwiseAbs().maxCoeff());
    const Eigen::VectorXd gty = g_.transpose() * yg_;
    const double dual = n > 0 ? (2.0 * x_ + gty + yb_).cwiseAbs().maxCoeff() : 0.0;

    if (prim < best_prim - tol.stall_improvement) {
      best_prim = prim;
      last_improvement = it;
    }
    if (polish(qp, rows, tol, out)) {
      out.iterations = it;
      return out;
    }
    if (best_prim > tol.feas && it - last_improvement >= tol.stall_window) {
      out = QPSolution{};
      out.status = QPStatus::Infeasible;
      out.delta = x_.cwiseMax(lo_).cwiseMin(hi_);
      out.multipliers = Eigen::VectorXd::Zero(qp.num_constraints());
      out.iterations = it;
      finalize(qp, tol, out);
      out.status = QPStatus::Infeasible;
      return out;
    }
    if (it % kAdaptEvery == 0) {
      double prim_scale = std::max(n > 0 ? x_.cwiseAbs().maxCoeff() : 0.0, n > 0 ? zb_.cwiseAbs().maxCoeff() : 0.0);
      if (k > 0) prim_scale = std::max({prim_scale, gx.cwiseAbs().maxCoeff(), zg_.cwiseAbs().maxCoeff()});
      double dual_scale = n > 0 ? std::max((2.0 * x_).cwiseAbs().maxCoeff(), (gty + yb_).cwiseAbs().maxCoeff()) : 0.0;
      const double p = prim / std::max(prim_scale, 1e-30);
      const double d = dual / std::max(dual_scale, 1e-30);
      if (p > 0.0 && d > 0.0) {
        const double rho_new = std::clamp(rho_ * std::sqrt(p / d), 1e-6, 1e6);
        if (rho_new > 5.0 * rho_ || rho_new < 0.2 * rho_) {
          rho_ = rho_new;
          factor();
        }
      }
    }
  }
  out = QPSolution{};
  out.status = QPStatus::IterLimit;
  out.delta = x_.cwiseMax(lo_).cwiseMin(hi_);
  out.multipliers = Eigen::VectorXd::Zero(qp.num_constraints());
  out.iterations = tol.splitting_max_iter;
  finalize(qp, tol, out);
  out.status = QPStatus::IterLimit;
  return out;
}

QPSolution solve_boxed(const MinNormQP& qp, const QPTolerances& tol) {
  const auto n = qp.num_variables();
  const Eigen::VectorXd lo = qp.box->lower - qp.box->shift;
  const Eigen::VectorXd hi = qp.box->upper - qp.box->shift;
  if (n > 0 && (lo.array() > hi.array()).any()) {
    QPSolution sol;
    sol.status = QPStatus::Infeasible;
    sol.delta = Eigen::VectorXd::Zero(n);
    sol.multipliers = Eigen::VectorXd::Zero(qp.num_constraints());
    sol.feasibility_residual = (lo - hi).maxCoeff();
    return sol;
  }
  const NormalizedRows rows = normalize_rows(qp);
  if (rows.blocking_zero_row >= 0) return infeasible_from_zero_row(qp, rows.blocking_zero_row);
  BoxedAdmm admm(rows.g, rows.h, lo, hi);
  return admm.run(qp, rows, tol);
}

}  // namespace

QPSolution solve_min_norm(const MinNormQP& qp, const QPTolerances& tol) {
  qp.validate();
  return qp.box ? solve_boxed(qp, tol) : solve_box_free(qp, tol);
}

}  // namespace cbpoison
