#pragma once

#include "la_core.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <utility>
#include <vector>

namespace sgkkt {

using LinearMap = std::function<Vector(const Vector&)>;

struct FgmresConfig {
  double tol = 1e-8;
  int max_iters = 500;
  bool record_history = true;
};

struct SolveReport {
  int iterations = 0;
  bool converged = false;
  std::vector<double> residual_history;  // relative residuals, starting at 1
  double wall_time = 0.0;                // seconds
  double final_rel_residual = 1.0;       // from the Givens recurrence
  double true_rel_residual = 1.0;        // ||b - A x|| / ||b|| recomputed
};

// Flexible GMRES without restart, right preconditioned, zero initial guess.
// Modified Gram-Schmidt with a second pass when the first leaves a relative
// projection above 1e-8.
inline std::pair<Vector, SolveReport> fgmres(const LinearMap& apply_a, const LinearMap& apply_p, const Vector& b,
                                             const FgmresConfig& cfg) {
  if (!(cfg.tol > 0.0 && cfg.tol < 1.0)) throw Error("fgmres: tol must lie in (0, 1)");
  if (cfg.max_iters < 1) throw Error("fgmres: max_iters must be >= 1");
  const double b_norm = b.norm();
  if (!(b_norm > 0.0)) throw Error("fgmres: right-hand side is zero");
  const auto start = std::chrono::steady_clock::now();

  SolveReport rep;
  rep.residual_history.push_back(1.0);
  const int m = cfg.max_iters;
  std::vector<Vector> basis{b / b_norm};
  std::vector<Vector> directions;
  DenseMatrix hess = DenseMatrix::Zero(m + 1, m);
  std::vector<double> cs, sn;
  Vector g = Vector::Zero(m + 1);
  g[0] = b_norm;

  int j = 0;
  for (; j < m; ++j) {
    directions.push_back(apply_p(basis[static_cast<std::size_t>(j)]));
    Vector w = apply_a(directions.back());
    const double w_norm0 = w.norm();
    for (int i = 0; i <= j; ++i) {
      const double h = basis[static_cast<std::size_t>(i)].dot(w);
      hess(i, j) = h;
      w -= h * basis[static_cast<std::size_t>(i)];
    }
    double w_norm = w.norm();
    double loss = 0.0;
    for (int i = 0; i <= j && w_norm > 0.0; ++i)
      loss = std::max(loss, std::abs(basis[static_cast<std::size_t>(i)].dot(w)) / w_norm);
    if (loss > 1e-8) {
      for (int i = 0; i <= j; ++i) {
        const double h = basis[static_cast<std::size_t>(i)].dot(w);
        hess(i, j) += h;
        w -= h * basis[static_cast<std::size_t>(i)];
      }
      w_norm = w.norm();
    }
    hess(j + 1, j) = w_norm;

    for (int i = 0; i < j; ++i) {
      const double t = cs[static_cast<std::size_t>(i)] * hess(i, j) + sn[static_cast<std::size_t>(i)] * hess(i + 1, j);
      hess(i + 1, j) = -sn[static_cast<std::size_t>(i)] * hess(i, j) + cs[static_cast<std::size_t>(i)] * hess(i + 1, j);
      hess(i, j) = t;
    }
    const double denom = std::hypot(hess(j, j), hess(j + 1, j));
    const double c = denom == 0.0 ? 1.0 : hess(j, j) / denom;
    const double s = denom == 0.0 ? 0.0 : hess(j + 1, j) / denom;
    cs.push_back(c);
    sn.push_back(s);
    hess(j, j) = denom;
    hess(j + 1, j) = 0.0;
    g[j + 1] = -s * g[j];
    g[j] = c * g[j];

    const double rel = std::abs(g[j + 1]) / b_norm;
    if (cfg.record_history) rep.residual_history.push_back(rel);
    rep.final_rel_residual = rel;
    const bool breakdown = w_norm <= 1e-14 * std::max(w_norm0, 1e-300);
    if (rel <= cfg.tol || breakdown) {
      rep.converged = true;
      ++j;
      break;
    }
    basis.push_back(w / w_norm);
  }
  rep.iterations = j;

  Vector y = Vector::Zero(j);
  for (int i = j - 1; i >= 0; --i) {
    double s = g[i];
    for (int k = i + 1; k < j; ++k) s -= hess(i, k) * y[k];
    y[i] = hess(i, i) == 0.0 ? 0.0 : s / hess(i, i);
  }
  Vector x = Vector::Zero(b.size());
  for (int i = 0; i < j; ++i) x += y[i] * directions[static_cast<std::size_t>(i)];

  rep.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  rep.true_rel_residual = (b - apply_a(x)).norm() / b_norm;
  if (!cfg.record_history) rep.residual_history = {1.0, rep.final_rel_residual};
  return {std::move(x), std::move(rep)};
}

}  // namespace sgkkt
