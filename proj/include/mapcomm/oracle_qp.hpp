#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <tuple>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "mapcomm/abstraction.hpp"
#include "mapcomm/grid_map.hpp"

namespace mapcomm {

/// Every operator and observation received so far, plus the prior mean.
struct HistoryStack {
  Eigen::VectorXd prior_mean;
  std::vector<ObservationOperator> operators;
  std::vector<Eigen::VectorXd> observations;

  HistoryStack() = default;
  explicit HistoryStack(Eigen::VectorXd prior) : prior_mean(std::move(prior)) {}

  void push(ObservationOperator op, Eigen::VectorXd obs) {
    if (op.cols() != static_cast<std::size_t>(prior_mean.size()))
      throw std::invalid_argument("HistoryStack: operator width does not match prior");
    if (static_cast<std::size_t>(obs.size()) != op.rows())
      throw std::invalid_argument("HistoryStack: observation length does not match operator");
    operators.push_back(std::move(op));
    observations.push_back(std::move(obs));
  }

  std::size_t total_rows() const {
    std::size_t n = 0;
    for (const auto& op : operators) n += op.rows();
    return n;
  }
};

struct QpOptions {
  double tolerance = 1e-8;  // on the KKT residual
  double penalty = 1e6;     // rho of the fallback objective
  int max_iterations = 100;
};

struct QpResult {
  Eigen::VectorXd x;
  bool penalized = false;  // equality constraints were infeasible; the rho-penalized problem was solved
  bool converged = false;
  int iterations = 0;
  double kkt_residual = 0.0;
  std::size_t rows = 0;  // distinct constraint rows after removing exact duplicates
};

namespace detail {

/// Semismooth Newton on the dual of
///   min 1/2 |x - z0|^2 + 1/(2 delta) |A x - o|^2  (delta = 0: A x = o)   s.t. 0 <= x <= 1.
/// Primal recovery is x(y) = clamp(z0 + A^T y); the dual gradient is o - A x(y) - delta y.
struct DualNewton {
  const Eigen::SparseMatrix<double>& a;
  const Eigen::VectorXd& z0;
  const Eigen::VectorXd& o;
  double delta;

  Eigen::VectorXd primal(const Eigen::VectorXd& y) const {
    return (z0 + a.transpose() * y).cwiseMax(0.0).cwiseMin(1.0);
  }

  double dual_value(const Eigen::VectorXd& y, const Eigen::VectorXd& x) const {
    return 0.5 * (x - z0).squaredNorm() - y.dot(a * x - o) - 0.5 * delta * y.squaredNorm();
  }

  /// Returns {y, converged, iterations, residual}.
  std::tuple<Eigen::VectorXd, bool, int, double> solve(double tol, int max_iter) const {
    const Eigen::Index m = a.rows();
    Eigen::VectorXd y = Eigen::VectorXd::Zero(m);
    Eigen::VectorXd x = primal(y);
    Eigen::VectorXd g = o - a * x - delta * y;
    double phi = dual_value(y, x);
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
    for (int it = 0; it < max_iter; ++it) {
      const double res = g.lpNorm<Eigen::Infinity>();
      if (res <= tol) return {y, true, it, res};
      if (!y.allFinite() || y.lpNorm<Eigen::Infinity>() > 1e12) return {y, false, it, res};

      const Eigen::VectorXd v = z0 + a.transpose() * y;
      Eigen::VectorXd free(v.size());
      for (Eigen::Index j = 0; j < v.size(); ++j) free[j] = (v[j] > 0.0 && v[j] < 1.0) ? 1.0 : 0.0;
      const Eigen::SparseMatrix<double> ad = a * free.asDiagonal();
      Eigen::SparseMatrix<double> h = ad * ad.transpose();
      const double damping = delta + 1e-12 * std::max(1.0, h.coeffs().size() ? h.coeffs().cwiseAbs().maxCoeff() : 1.0);
      Eigen::SparseMatrix<double> eye(m, m);
      eye.setIdentity();
      h += damping * eye;
      ldlt.compute(h);
      if (ldlt.info() != Eigen::Success) return {y, false, it, res};
      const Eigen::VectorXd d = ldlt.solve(g);
      const double slope = g.dot(d);
      if (!(slope > 0.0)) return {y, false, it, res};

      double step = 1.0;
      bool accepted = false;
      for (int ls = 0; ls < 50; ++ls) {
        const Eigen::VectorXd y_try = y + step * d;
        const Eigen::VectorXd x_try = primal(y_try);
        const double phi_try = dual_value(y_try, x_try);
        if (phi_try >= phi + 1e-4 * step * slope) {
          y = y_try;
          x = x_try;
          phi = phi_try;
          accepted = true;
          break;
        }
        step *= 0.5;
      }
      if (!accepted) return {y, false, it, res};
      g = o - a * x - delta * y;
    }
    const double res = g.lpNorm<Eigen::Infinity>();
    return {y, res <= tol, max_iter, res};
  }
};

}  // namespace detail

/// Minimum-norm-change estimate from the full history:
///   min |x - x0|^2  s.t.  A_{0:t} x = o_{0:t},  0 <= x <= 1.
/// If the stacked equalities are inconsistent (noisy data) the solver falls back to
///   min |x - x0|^2 + rho |A x - o|^2  s.t.  0 <= x <= 1
/// and sets `penalized`.
inline QpResult solve_history_qp(const HistoryStack& stack, const QpOptions& options = {}) {
  const auto n = static_cast<std::size_t>(stack.prior_mean.size());
  if (n == 0) throw std::invalid_argument("solve_history_qp: empty prior");
  if (stack.operators.size() != stack.observations.size())
    throw std::invalid_argument("solve_history_qp: operator and observation lists differ in length");

  QpResult result;
  result.x = stack.prior_mean.cwiseMax(0.0).cwiseMin(1.0);

  // Distinct rows, keyed by (sorted support, value).
  std::vector<std::pair<std::vector<std::size_t>, double>> rows;
  for (std::size_t s = 0; s < stack.operators.size(); ++s) {
    const auto& op = stack.operators[s];
    const auto& obs = stack.observations[s];
    if (op.cols() != n || static_cast<std::size_t>(obs.size()) != op.rows())
      throw std::invalid_argument("solve_history_qp: inconsistent history entry");
    if (!obs.allFinite()) throw DataError("solve_history_qp: non-finite observation");
    for (std::size_t r = 0; r < op.rows(); ++r) {
      auto cells = op.row(r).cells;
      std::sort(cells.begin(), cells.end());
      rows.emplace_back(std::move(cells), obs[static_cast<Eigen::Index>(r)]);
    }
  }
  std::sort(rows.begin(), rows.end());
  rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
  result.rows = rows.size();
  if (rows.empty()) {
    result.converged = true;
    return result;
  }

  std::vector<int> reduced(n, -1);
  std::vector<std::size_t> cells;
  for (const auto& r : rows)
    for (std::size_t c : r.first)
      if (reduced[c] < 0) {
        reduced[c] = static_cast<int>(cells.size());
        cells.push_back(c);
      }

  const auto m = static_cast<Eigen::Index>(rows.size());
  const auto nv = static_cast<Eigen::Index>(cells.size());
  std::vector<Eigen::Triplet<double>> trips;
  Eigen::VectorXd o(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto& r = rows[static_cast<std::size_t>(i)];
    const double w = 1.0 / static_cast<double>(r.first.size());
    for (std::size_t c : r.first) trips.emplace_back(static_cast<int>(i), reduced[c], w);
    o[i] = r.second;
  }
  Eigen::SparseMatrix<double> a(m, nv);
  a.setFromTriplets(trips.begin(), trips.end());
  Eigen::VectorXd z0(nv);
  for (Eigen::Index j = 0; j < nv; ++j) z0[j] = stack.prior_mean[static_cast<Eigen::Index>(cells[static_cast<std::size_t>(j)])];

  detail::DualNewton exact{a, z0, o, 0.0};
  auto [y, ok, iters, res] = exact.solve(options.tolerance, options.max_iterations);
  Eigen::VectorXd x = exact.primal(y);
  result.iterations = iters;
  if (!ok) {
    detail::DualNewton relaxed{a, z0, o, 1.0 / options.penalty};
    auto [y2, ok2, iters2, res2] = relaxed.solve(options.tolerance, options.max_iterations);
    x = relaxed.primal(y2);
    result.penalized = true;
    ok = ok2;
    res = res2;
    result.iterations += iters2;
  }
  result.converged = ok;
  result.kkt_residual = res;
  for (Eigen::Index j = 0; j < nv; ++j) result.x[static_cast<Eigen::Index>(cells[static_cast<std::size_t>(j)])] = x[j];
  return result;
}

}  // namespace mapcomm
