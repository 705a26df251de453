#pragma once

#include "galerkin_ops.hpp"
#include "parallel.hpp"

#include <cmath>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

namespace sgkkt {

struct ChebyshevConfig {
  int its = 5;
  double lambda_min = 0.25;
  double lambda_max = 2.25;

  double alpha() const { return 0.5 * (lambda_min + lambda_max); }
  double rho() const { return (lambda_max - lambda_min) / (lambda_max + lambda_min); }
};

// Chebyshev semi-iteration for M X = B with Jacobi scaling alpha*diag(M); every
// column is iterated independently. omega starts at 1 and follows
// omega <- 1 / (1 - omega rho^2 / 4) before each step.
inline DenseMatrix chebyshev_mass_solve(const SparseMatrix& M, const DenseMatrix& b, const ChebyshevConfig& cfg) {
  if (cfg.its < 1) throw Error("chebyshev_mass_solve: its must be >= 1");
  if (b.rows() != M.rows()) throw Error("chebyshev_mass_solve: rhs row count mismatch");
  const Vector diag = M.diagonal();
  for (Index i = 0; i < diag.size(); ++i)
    if (diag[i] == 0.0) throw Error("chebyshev_mass_solve: zero diagonal entry in row " + std::to_string(i));
  const Vector d_inv = (cfg.alpha() * diag).cwiseInverse();
  const double rho2 = cfg.rho() * cfg.rho();
  DenseMatrix x = DenseMatrix::Zero(b.rows(), b.cols());
  DenseMatrix x_prev = x;
  DenseMatrix next(b.rows(), b.cols());
  double omega = 1.0;
  for (int k = 0; k < cfg.its; ++k) {
    omega = 1.0 / (1.0 - omega * rho2 / 4.0);
    next = d_inv.asDiagonal() * (b - M * x);
    next += x - x_prev;
    next *= omega;
    next += x_prev;
    x_prev.swap(x);
    x.swap(next);
  }
  return x;
}

inline Vector chebyshev_mass_solve(const SparseMatrix& M, const Vector& b, const ChebyshevConfig& cfg) {
  return chebyshev_mass_solve(M, DenseMatrix(b), cfg).col(0);
}

// Mass-block solver: fixed-step Chebyshev or a direct factorization.
class MassSolver {
 public:
  static MassSolver chebyshev(SparseMatrix M, int its) {
    MassSolver s;
    s.M_ = std::move(M);
    s.cheb_.its = its;
    if (its < 1) throw Error("MassSolver: Chebyshev steps must be >= 1");
    return s;
  }
  static MassSolver direct(SparseMatrix M) {
    MassSolver s;
    s.lu_.emplace(M);
    s.M_ = std::move(M);
    return s;
  }

  DenseMatrix solve(const DenseMatrix& b) const {
    return lu_ ? lu_->solve(b) : chebyshev_mass_solve(M_, b, cheb_);
  }
  std::string name() const { return lu_ ? "direct" : "cheb" + std::to_string(cheb_.its); }
  const SparseMatrix& matrix() const { return M_; }

 private:
  MassSolver() = default;
  SparseMatrix M_;
  ChebyshevConfig cheb_;
  std::optional<LUFactors> lu_;
};

struct HgsConfig {
  Index n_tau = 1;
  LevelPartition levels;
  LUFactors inner;  // factorization of the leading term's spatial matrix
};

// One symmetric hierarchical Gauss-Seidel sweep for sum_l H_l (x) Z_l, starting from
// zero: levels 0..p forward, then p-1..0 backward. Each level solves with the
// inner factorization; off-level couplings use the first n_tau terms. Couplings
// between columns of the same level are not included.
inline DenseMatrix hgs_apply(const KroneckerSumOperator& z, const DenseMatrix& r, const HgsConfig& cfg) {
  check_shape(z, r, "hgs_apply");
  if (cfg.n_tau < 1 || cfg.n_tau > z.n_terms()) throw Error("hgs_apply: n_tau outside [1, n_A]");
  if (cfg.levels.boundaries.empty() || cfg.levels.boundaries.back() != z.n_xi())
    throw Error("hgs_apply: level partition does not match N_xi");
  const Index n_xi = z.n_xi();
  const int p = cfg.levels.num_levels() - 1;
  DenseMatrix v = DenseMatrix::Zero(r.rows(), n_xi);
  DenseMatrix rhs;
  auto solve_level = [&](int d) {
    const ColumnRange lvl{cfg.levels.begin(d), cfg.levels.end(d)};
    rhs = r.middleCols(lvl.begin, lvl.size());
    accumulate_sliced(z, v, {0, lvl.begin}, lvl, cfg.n_tau, -1.0, rhs);
    accumulate_sliced(z, v, {lvl.end, n_xi}, lvl, cfg.n_tau, -1.0, rhs);
    v.middleCols(lvl.begin, lvl.size()) = cfg.inner.solve(rhs);
  };
  for (int d = 0; d <= p; ++d) solve_level(d);
  for (int d = p - 1; d >= 0; --d) solve_level(d);
  return v;
}

using BlockSolve = std::function<DenseMatrix(const DenseMatrix&)>;

// N steps of x <- x + P(b - Z x) from x = 0.
inline DenseMatrix richardson(const KroneckerSumOperator& z, const DenseMatrix& b, int steps, const BlockSolve& prec) {
  if (steps < 1) throw Error("richardson: need at least one step");
  DenseMatrix x = prec(b);
  for (int k = 1; k < steps; ++k) x += prec(b - kron_apply(z, x));
  return x;
}

inline DenseMatrix richardson_hgs(const KroneckerSumOperator& z, const DenseMatrix& b, int steps, const HgsConfig& cfg) {
  return richardson(z, b, steps, [&](const DenseMatrix& res) { return hgs_apply(z, res, cfg); });
}

// sum_l H_l (x) Z_l with Z_1 = A_1 + sqrt((1+gamma)/beta) M and Z_l = A_l otherwise.
inline KroneckerSumOperator schur_factor_operator(const SteadyKKT& sys) {
  std::vector<SparseMatrix> terms = sys.stiffness.A;
  terms.front() = terms.front() + std::sqrt((1.0 + sys.gamma) / sys.beta) * sys.M;
  return {sys.stiffness.H, std::move(terms)};
}

// Block-diagonal preconditioner diag(M_gamma, beta M, Z M_gamma^-1 Z).
struct KKTBlockPrecond {
  MassSolver mass;
  KroneckerSumOperator schur_terms;
  SparseMatrix M;
  Vector h_gamma;
  double beta = 1.0;
  BlockSolve z_solve;  // approximate inverse of schur_terms
};

inline KKTBlockPrecond make_block_precond(const SteadyKKT& sys, MassSolver mass, Index n_tau, const LevelPartition& levels,
                                          int richardson_steps = 1) {
  KroneckerSumOperator z = schur_factor_operator(sys);
  HgsConfig hgs{n_tau, levels, LUFactors(z.A.front())};
  KKTBlockPrecond p{std::move(mass), z, sys.M, sys.h_gamma, sys.beta, {}};
  p.z_solve = [z = std::move(z), hgs = std::move(hgs), richardson_steps](const DenseMatrix& r) {
    return richardson_hgs(z, r, richardson_steps, hgs);
  };
  return p;
}

inline DenseMatrix steady_schur_apply(const DenseMatrix& r, const KKTBlockPrecond& p) {
  const DenseMatrix z1 = p.z_solve(r);
  return p.z_solve((p.M * z1) * p.h_gamma.asDiagonal());
}

inline KKTBlocks steady_kkt_precond_apply(const KKTBlocks& r, const KKTBlockPrecond& p) {
  check_blocks(r, p.M.rows(), p.h_gamma.size(), "steady_kkt_precond_apply");
  KKTBlocks v;
  v.y = p.mass.solve(r.y) * p.h_gamma.cwiseInverse().asDiagonal();
  v.u = p.mass.solve(r.u) / p.beta;
  v.lam = steady_schur_apply(r.lam, p);
  return v;
}

// Coupled hierarchical sweep over degree levels with the deterministic KKT block
// [M 0 -A_1; 0 beta M M; -A_1 M 0] as level solver.
struct HgsocPrecond {
  KroneckerSumOperator stiffness;
  LevelPartition levels;
  Index n_tau = 1;
  Index n_h = 0;
  LUFactors ptilde;
};

inline SparseMatrix deterministic_kkt(const SparseMatrix& M, const SparseMatrix& A1, double beta) {
  const Index n = M.rows();
  std::vector<Triplet> t;
  auto put = [&](const SparseMatrix& b, Index r0, Index c0, double s) {
    for (Index r = 0; r < b.rows(); ++r)
      for (SparseMatrix::InnerIterator it(b, r); it; ++it)
        t.emplace_back(static_cast<int>(r0 + r), static_cast<int>(c0 + it.col()), s * it.value());
  };
  put(M, 0, 0, 1.0);
  put(A1, 0, 2 * n, -1.0);
  put(M, n, n, beta);
  put(M, n, 2 * n, 1.0);
  put(A1, 2 * n, 0, -1.0);
  put(M, 2 * n, n, 1.0);
  return sparse_from_triplets(3 * n, 3 * n, t);
}

inline HgsocPrecond make_hgsoc(const SteadyKKT& sys, const LevelPartition& levels, Index n_tau) {
  if (n_tau < 0 || n_tau > sys.stiffness.n_terms()) throw Error("make_hgsoc: n_tau outside [0, n_A]");
  return {sys.stiffness, levels, n_tau, sys.n_h(), LUFactors(deterministic_kkt(sys.M, sys.stiffness.A.front(), sys.beta))};
}

inline KKTBlocks hgsoc_apply(const KKTBlocks& r, const HgsocPrecond& p) {
  check_blocks(r, p.n_h, p.stiffness.n_xi(), "hgsoc_apply");
  const Index n = p.n_h;
  const Index n_xi = p.stiffness.n_xi();
  const int top = p.levels.num_levels() - 1;
  KKTBlocks v = KKTBlocks::zero(n, n_xi);
  DenseMatrix rhs;
  auto solve_level = [&](int d) {
    const ColumnRange lvl{p.levels.begin(d), p.levels.end(d)};
    rhs.resize(3 * n, lvl.size());
    rhs.topRows(n) = r.y.middleCols(lvl.begin, lvl.size());
    rhs.middleRows(n, n) = r.u.middleCols(lvl.begin, lvl.size());
    rhs.bottomRows(n) = r.lam.middleCols(lvl.begin, lvl.size());
    // Mass-matrix couplings are diagonal in the stochastic index and never cross levels.
    for (const ColumnRange other : {ColumnRange{0, lvl.begin}, ColumnRange{lvl.end, n_xi}}) {
      accumulate_sliced(p.stiffness, v.lam, other, lvl, p.n_tau, 1.0, rhs.topRows(n));
      accumulate_sliced(p.stiffness, v.y, other, lvl, p.n_tau, 1.0, rhs.bottomRows(n));
    }
    const DenseMatrix sol = p.ptilde.solve(rhs);
    v.y.middleCols(lvl.begin, lvl.size()) = sol.topRows(n);
    v.u.middleCols(lvl.begin, lvl.size()) = sol.middleRows(n, n);
    v.lam.middleCols(lvl.begin, lvl.size()) = sol.bottomRows(n);
  };
  for (int d = 0; d <= top; ++d) solve_level(d);
  for (int d = top - 1; d >= 0; --d) solve_level(d);
  return v;
}

// Per-step block-diagonal preconditioner for the all-at-once system. The
// adjoint block approximates tau * Zt^-1 (D (x) M_gamma) Zt^-1 with
// Zt = H_1 (x) [(1 + tau sqrt((1+gamma)/beta)) M + tau A_1] + tau sum_{l>1} H_l (x) A_l.
struct TimePrecond {
  MassSolver mass;
  KroneckerSumOperator step_terms;
  SparseMatrix M;
  Vector h_gamma;
  double beta = 1.0;
  double tau = 1.0;
  std::vector<double> d;
  BlockSolve z_solve;
  int threads = 1;
};

inline KroneckerSumOperator time_step_operator(const TimeKKT& sys) {
  const double tau = sys.stencil.tau;
  std::vector<SparseMatrix> terms;
  for (const auto& a : sys.base.stiffness.A) terms.push_back(tau * a);
  terms.front() = terms.front() + (1.0 + tau * std::sqrt((1.0 + sys.base.gamma) / sys.base.beta)) * sys.base.M;
  return {sys.base.stiffness.H, std::move(terms)};
}

inline TimePrecond make_time_precond(const TimeKKT& sys, MassSolver mass, Index n_tau, const LevelPartition& levels,
                                     int richardson_steps = 1, int threads = thread_count()) {
  KroneckerSumOperator z = time_step_operator(sys);
  HgsConfig hgs{n_tau, levels, LUFactors(z.A.front())};
  TimePrecond p{std::move(mass), z, sys.base.M, sys.base.h_gamma, sys.base.beta, sys.stencil.tau, sys.stencil.d, {},
                threads};
  p.z_solve = [z = std::move(z), hgs = std::move(hgs), richardson_steps](const DenseMatrix& r) {
    return richardson_hgs(z, r, richardson_steps, hgs);
  };
  return p;
}

inline void time_precond_step(const TimeBlocks& r, const TimePrecond& p, int k, TimeBlocks& v) {
  const auto ks = static_cast<std::size_t>(k);
  const double dk = p.d[ks];
  v.y[ks] = p.mass.solve(r.y[ks]) * (p.tau * dk * p.h_gamma.array()).cwiseInverse().matrix().asDiagonal();
  v.u[ks] = p.mass.solve(r.u[ks]) / (p.beta * p.tau * dk);
  const DenseMatrix z1 = p.z_solve(r.lam[ks]);
  v.lam[ks] = p.tau * p.z_solve((dk * (p.M * z1)) * p.h_gamma.asDiagonal());
}

// Steps are independent and may run in any order or concurrently.
inline TimeBlocks time_kkt_precond_apply(const TimeBlocks& r, const TimePrecond& p, const std::vector<int>& order) {
  const int nt = static_cast<int>(p.d.size());
  if (r.n_t() != nt || static_cast<int>(order.size()) != nt)
    throw Error("time_kkt_precond_apply: expected " + std::to_string(nt) + " time steps");
  TimeBlocks v;
  v.y.resize(static_cast<std::size_t>(nt));
  v.u.resize(static_cast<std::size_t>(nt));
  v.lam.resize(static_cast<std::size_t>(nt));
  parallel_for(nt, [&](int i) { time_precond_step(r, p, order[static_cast<std::size_t>(i)], v); }, p.threads);
  return v;
}

inline TimeBlocks time_kkt_precond_apply(const TimeBlocks& r, const TimePrecond& p) {
  std::vector<int> order(p.d.size());
  std::iota(order.begin(), order.end(), 0);
  return time_kkt_precond_apply(r, p, order);
}

}  // namespace sgkkt
