#pragma once

#include "fem_q1.hpp"
#include "la_core.hpp"
#include "stochastic_basis.hpp"

#include <memory>
#include <string>
#include <vector>

namespace sgkkt {

// Column k of a matricized vector holds the spatial coefficients of psi_k.
inline DenseMatrix matricize(const Vector& v, Index n_h, Index n_xi) {
  if (v.size() != n_h * n_xi)
    throw Error("matricize: length " + std::to_string(v.size()) + " != " + std::to_string(n_h) + "*" +
                std::to_string(n_xi));
  return Eigen::Map<const DenseMatrix>(v.data(), n_h, n_xi);
}

inline Vector vectorize(const DenseMatrix& x) { return Eigen::Map<const Vector>(x.data(), x.size()); }

struct ColumnRange {
  Index begin = 0;
  Index end = 0;
  Index size() const { return end - begin; }
};

// sum_l H_l (x) A_l, kept as term lists.
struct KroneckerSumOperator {
  std::vector<SparseMatrix> H;
  std::vector<SparseMatrix> A;

  KroneckerSumOperator() = default;
  KroneckerSumOperator(std::vector<SparseMatrix> h, std::vector<SparseMatrix> a) : H(std::move(h)), A(std::move(a)) {
    if (H.size() != A.size() || H.empty())
      throw Error("KroneckerSumOperator: " + std::to_string(H.size()) + " H terms vs " + std::to_string(A.size()) +
                  " A terms");
    for (std::size_t l = 0; l < H.size(); ++l) {
      if (H[l].rows() != H[0].rows() || H[l].cols() != H[0].rows())
        throw Error("KroneckerSumOperator: H terms must be square and equal-sized");
      if (A[l].rows() != A[0].rows() || A[l].cols() != A[0].rows())
        throw Error("KroneckerSumOperator: A terms must be square and equal-sized");
    }
  }

  Index n_terms() const { return static_cast<Index>(H.size()); }
  Index n_h() const { return A.front().rows(); }
  Index n_xi() const { return H.front().rows(); }
};

inline void check_shape(const KroneckerSumOperator& op, const DenseMatrix& x, const char* where) {
  if (x.rows() != op.n_h() || x.cols() != op.n_xi())
    throw Error(std::string(where) + ": expected " + std::to_string(op.n_h()) + "x" + std::to_string(op.n_xi()) +
                ", got " + std::to_string(x.rows()) + "x" + std::to_string(x.cols()));
}

// out += scale * sum_{t < n_tau} A_t X(:, src) H_t(src, dst). Terms whose H block is
// empty are skipped.
inline void accumulate_sliced(const KroneckerSumOperator& op, const DenseMatrix& x, ColumnRange src, ColumnRange dst,
                              Index n_tau, double scale, Eigen::Ref<DenseMatrix> out) {
  if (src.size() <= 0 || dst.size() <= 0) return;
  DenseMatrix y(x.rows(), dst.size());
  for (Index t = 0; t < std::min(n_tau, op.n_terms()); ++t) {
    const SparseMatrix& h = op.H[static_cast<std::size_t>(t)];
    bool any = false;
    for (Index r = src.begin; r < src.end; ++r)
      for (SparseMatrix::InnerIterator it(h, r); it; ++it) {
        if (it.col() < dst.begin || it.col() >= dst.end) continue;
        if (!any) {
          y.setZero();
          any = true;
        }
        y.col(it.col() - dst.begin) += it.value() * x.col(r);
      }
    if (any) out.noalias() += scale * (op.A[static_cast<std::size_t>(t)] * y);
  }
}

inline DenseMatrix kron_apply_sliced(const KroneckerSumOperator& op, const DenseMatrix& x, ColumnRange src,
                                     ColumnRange dst, Index n_tau) {
  check_shape(op, x, "kron_apply_sliced");
  if (src.begin < 0 || src.end > op.n_xi() || dst.begin < 0 || dst.end > op.n_xi())
    throw Error("kron_apply_sliced: column range outside [0, N_xi)");
  if (n_tau < 0 || n_tau > op.n_terms()) throw Error("kron_apply_sliced: n_tau outside [0, n_A]");
  DenseMatrix out = DenseMatrix::Zero(x.rows(), dst.size());
  accumulate_sliced(op, x, src, dst, n_tau, 1.0, out);
  return out;
}

inline DenseMatrix kron_apply(const KroneckerSumOperator& op, const DenseMatrix& x) {
  check_shape(op, x, "kron_apply");
  DenseMatrix out = DenseMatrix::Zero(x.rows(), x.cols());
  accumulate_sliced(op, x, {0, op.n_xi()}, {0, op.n_xi()}, op.n_terms(), 1.0, out);
  return out;
}

struct KKTBlocks {
  DenseMatrix y, u, lam;

  static KKTBlocks zero(Index n_h, Index n_xi) {
    return {DenseMatrix::Zero(n_h, n_xi), DenseMatrix::Zero(n_h, n_xi), DenseMatrix::Zero(n_h, n_xi)};
  }
};

inline Vector pack(const KKTBlocks& b) {
  const Index s = b.y.size();
  Vector v(3 * s);
  v.segment(0, s) = vectorize(b.y);
  v.segment(s, s) = vectorize(b.u);
  v.segment(2 * s, s) = vectorize(b.lam);
  return v;
}

inline KKTBlocks unpack(const Vector& v, Index n_h, Index n_xi) {
  const Index s = n_h * n_xi;
  if (v.size() != 3 * s) throw Error("unpack: vector length does not match 3*N_h*N_xi");
  return {matricize(v.segment(0, s), n_h, n_xi), matricize(v.segment(s, s), n_h, n_xi),
          matricize(v.segment(2 * s, s), n_h, n_xi)};
}

// Steady stochastic optimal control KKT operator.
struct SteadyKKT {
  SparseMatrix M;
  KroneckerSumOperator stiffness;  // sum_l H_l (x) A_l
  Vector h_gamma;                  // diagonal of H_gamma
  double beta = 1.0;
  double gamma = 1.0;

  Index n_h() const { return M.rows(); }
  Index n_xi() const { return stiffness.n_xi(); }
  Index size() const { return 3 * n_h() * n_xi(); }
};

inline SteadyKKT make_steady_kkt(SparseMatrix mass, std::vector<SparseMatrix> stiffness_terms,
                                 const TripleProductSet& h, double beta) {
  if (!(beta > 0.0)) throw Error("SteadyKKT: beta must be > 0");
  if (h.gamma < 0.0) throw Error("SteadyKKT: gamma must be >= 0");
  SteadyKKT k;
  k.stiffness = KroneckerSumOperator(h.H, std::move(stiffness_terms));
  if (mass.rows() != k.stiffness.n_h() || mass.cols() != mass.rows())
    throw Error("SteadyKKT: mass matrix does not match stiffness size");
  k.M = std::move(mass);
  k.h_gamma = h.h_gamma;
  k.beta = beta;
  k.gamma = h.gamma;
  return k;
}

inline void check_blocks(const KKTBlocks& b, Index n_h, Index n_xi, const char* where) {
  for (const DenseMatrix* m : {&b.y, &b.u, &b.lam})
    if (m->rows() != n_h || m->cols() != n_xi)
      throw Error(std::string(where) + ": block shape " + std::to_string(m->rows()) + "x" +
                  std::to_string(m->cols()) + " != " + std::to_string(n_h) + "x" + std::to_string(n_xi));
}

inline KKTBlocks steady_kkt_apply(const SteadyKKT& sys, const KKTBlocks& w) {
  check_blocks(w, sys.n_h(), sys.n_xi(), "steady_kkt_apply");
  KKTBlocks r;
  const DenseMatrix m_lam = sys.M * w.lam;
  const DenseMatrix m_u = sys.M * w.u;
  r.y = (sys.M * w.y) * sys.h_gamma.asDiagonal();
  r.y -= kron_apply(sys.stiffness, w.lam);
  r.u = sys.beta * m_u + m_lam;
  r.lam = m_u - kron_apply(sys.stiffness, w.y);
  return r;
}

inline KKTBlocks steady_rhs(const SteadyKKT& sys, const DenseMatrix& y_d) {
  if (y_d.rows() != sys.n_h() || y_d.cols() != sys.n_xi()) throw Error("steady_rhs: y_d shape mismatch");
  KKTBlocks b = KKTBlocks::zero(sys.n_h(), sys.n_xi());
  b.y = sys.M * y_d;
  return b;
}

// Nodal interpolation of the indicator of the closed square [-1,0]^2, placed in the
// deterministic column.
inline DenseMatrix desired_state(const Grid& g, Index n_xi) {
  DenseMatrix yd = DenseMatrix::Zero(g.num_interior(), n_xi);
  for (int node = 0; node < g.num_nodes(); ++node) {
    const int k = g.interior_index[static_cast<std::size_t>(node)];
    if (k < 0) continue;
    const auto x = g.node(node);
    const double tol = 1e-12;
    if (x[0] <= tol && x[1] <= tol) yd(k, 0) = 1.0;
  }
  return yd;
}

// Implicit Euler on [0, 1] with N_t steps.
struct TimeStencil {
  int n_t = 1;
  double tau = 1.0;
  SparseMatrix C;          // -1 on the first subdiagonal
  SparseMatrix D;          // diag(1/2, 1, ..., 1, 1/2)
  std::vector<double> d;   // diagonal of D
};

inline TimeStencil build_time_stencil(int n_t) {
  if (n_t < 1) throw Error("build_time_stencil: N_t must be >= 1");
  TimeStencil s;
  s.n_t = n_t;
  s.tau = 1.0 / n_t;
  s.d.assign(static_cast<std::size_t>(n_t), 1.0);
  s.d.front() = 0.5;
  s.d.back() = 0.5;
  std::vector<Triplet> c, d;
  for (int k = 0; k < n_t; ++k) {
    d.emplace_back(k, k, s.d[static_cast<std::size_t>(k)]);
    if (k > 0) c.emplace_back(k, k - 1, -1.0);
  }
  s.C = sparse_from_triplets(n_t, n_t, c);
  s.D = sparse_from_triplets(n_t, n_t, d);
  return s;
}

// Step-major blocks; pack order is all y steps, then u, then lambda.
struct TimeBlocks {
  std::vector<DenseMatrix> y, u, lam;

  static TimeBlocks zero(int n_t, Index n_h, Index n_xi) {
    TimeBlocks b;
    b.y.assign(static_cast<std::size_t>(n_t), DenseMatrix::Zero(n_h, n_xi));
    b.u = b.y;
    b.lam = b.y;
    return b;
  }
  int n_t() const { return static_cast<int>(y.size()); }
};

inline Vector pack(const TimeBlocks& b) {
  const Index s = b.y.front().size();
  const Index nt = b.n_t();
  Vector v(3 * nt * s);
  for (Index k = 0; k < nt; ++k) {
    v.segment(k * s, s) = vectorize(b.y[static_cast<std::size_t>(k)]);
    v.segment((nt + k) * s, s) = vectorize(b.u[static_cast<std::size_t>(k)]);
    v.segment((2 * nt + k) * s, s) = vectorize(b.lam[static_cast<std::size_t>(k)]);
  }
  return v;
}

inline TimeBlocks unpack(const Vector& v, int n_t, Index n_h, Index n_xi) {
  const Index s = n_h * n_xi;
  if (v.size() != 3 * n_t * s) throw Error("unpack: vector length does not match 3*N_t*N_h*N_xi");
  TimeBlocks b;
  for (Index k = 0; k < n_t; ++k) {
    b.y.push_back(matricize(v.segment(k * s, s), n_h, n_xi));
    b.u.push_back(matricize(v.segment((n_t + k) * s, s), n_h, n_xi));
    b.lam.push_back(matricize(v.segment((2 * n_t + k) * s, s), n_h, n_xi));
  }
  return b;
}

// All-at-once time-dependent KKT operator. The state operator of one step is
// L = H_1 (x) M + tau sum_l H_l (x) A_l, coupled to the previous step through -M.
struct TimeKKT {
  SteadyKKT base;
  TimeStencil stencil;
  DenseMatrix y0;
  DenseMatrix y_d;

  int n_t() const { return stencil.n_t; }
  Index n_h() const { return base.n_h(); }
  Index n_xi() const { return base.n_xi(); }
  Index size() const { return n_t() * base.size(); }
};

inline TimeKKT make_time_kkt(SteadyKKT base, int n_t, DenseMatrix y_d, DenseMatrix y0 = {}) {
  TimeKKT k;
  k.stencil = build_time_stencil(n_t);
  if (y0.size() == 0) y0 = DenseMatrix::Zero(base.n_h(), base.n_xi());
  if (y0.rows() != base.n_h() || y0.cols() != base.n_xi()) throw Error("TimeKKT: y0 shape mismatch");
  if (y_d.rows() != base.n_h() || y_d.cols() != base.n_xi()) throw Error("TimeKKT: y_d shape mismatch");
  k.base = std::move(base);
  k.y0 = std::move(y0);
  k.y_d = std::move(y_d);
  return k;
}

inline DenseMatrix time_state_apply(const TimeKKT& sys, const DenseMatrix& x) {
  DenseMatrix out = sys.base.M * x;
  out += sys.stencil.tau * kron_apply(sys.base.stiffness, x);
  return out;
}

inline void check_time_blocks(const TimeKKT& sys, const TimeBlocks& w, const char* where) {
  if (w.n_t() != sys.n_t() || static_cast<int>(w.u.size()) != sys.n_t() || static_cast<int>(w.lam.size()) != sys.n_t())
    throw Error(std::string(where) + ": expected " + std::to_string(sys.n_t()) + " time steps");
  for (int k = 0; k < sys.n_t(); ++k)
    check_blocks({w.y[static_cast<std::size_t>(k)], w.u[static_cast<std::size_t>(k)], w.lam[static_cast<std::size_t>(k)]},
                 sys.n_h(), sys.n_xi(), where);
}

inline TimeBlocks time_kkt_apply(const TimeKKT& sys, const TimeBlocks& w) {
  check_time_blocks(sys, w, "time_kkt_apply");
  const int nt = sys.n_t();
  const double tau = sys.stencil.tau;
  const auto& M = sys.base.M;
  TimeBlocks r;
  r.y.resize(static_cast<std::size_t>(nt));
  r.u.resize(static_cast<std::size_t>(nt));
  r.lam.resize(static_cast<std::size_t>(nt));
  for (int k = 0; k < nt; ++k) {
    const auto ks = static_cast<std::size_t>(k);
    const double dk = sys.stencil.d[ks];
    const DenseMatrix m_u = M * w.u[ks];
    const DenseMatrix m_lam = M * w.lam[ks];
    r.y[ks] = (tau * dk) * (M * w.y[ks]) * sys.base.h_gamma.asDiagonal();
    r.y[ks] -= time_state_apply(sys, w.lam[ks]);
    if (k + 1 < nt) r.y[ks] += M * w.lam[ks + 1];
    r.u[ks] = (sys.base.beta * tau * dk) * m_u + tau * m_lam;
    r.lam[ks] = tau * m_u - time_state_apply(sys, w.y[ks]);
    if (k > 0) r.lam[ks] += M * w.y[ks - 1];
  }
  return r;
}

inline TimeBlocks time_rhs(const TimeKKT& sys) {
  const int nt = sys.n_t();
  TimeBlocks b = TimeBlocks::zero(nt, sys.n_h(), sys.n_xi());
  const DenseMatrix m_yd = sys.base.M * sys.y_d;
  for (int k = 0; k < nt; ++k) b.y[static_cast<std::size_t>(k)] = (sys.stencil.tau * sys.stencil.d[static_cast<std::size_t>(k)]) * m_yd;
  b.lam.front() = sys.base.M * sys.y0;
  return b;
}

}  // namespace sgkkt
