#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace sgkkt {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using DenseMatrix = Eigen::MatrixXd;                                 // column-major
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor, int>;  // CSR
using Triplet = Eigen::Triplet<double, int>;

// Largest dense eigenproblem the library will attempt.
inline constexpr Index kMaxDenseEigenDim = 4096;

// Builds a compressed CSR matrix; duplicate entries are summed.
inline SparseMatrix sparse_from_triplets(Index rows, Index cols, const std::vector<Triplet>& entries) {
  for (const auto& t : entries) {
    if (t.row() < 0 || t.row() >= rows || t.col() < 0 || t.col() >= cols)
      throw Error("sparse_from_triplets: entry (" + std::to_string(t.row()) + "," + std::to_string(t.col()) +
                  ") outside " + std::to_string(rows) + "x" + std::to_string(cols));
    if (!std::isfinite(t.value())) throw Error("sparse_from_triplets: non-finite value");
  }
  SparseMatrix a(rows, cols);
  a.setFromTriplets(entries.begin(), entries.end());
  a.makeCompressed();
  return a;
}

inline SparseMatrix sparse_identity(Index n) {
  SparseMatrix a(n, n);
  a.setIdentity();
  a.makeCompressed();
  return a;
}

inline DenseMatrix to_dense(const SparseMatrix& a) { return DenseMatrix(a); }

// Row-by-row CSR accumulation.
inline Vector spmv(const SparseMatrix& a, const Vector& x) {
  if (x.size() != a.cols())
    throw Error("spmv: vector length " + std::to_string(x.size()) + " != ncols " + std::to_string(a.cols()));
  Vector y(a.rows());
  const int* outer = a.outerIndexPtr();
  const int* inner = a.innerIndexPtr();
  const double* val = a.valuePtr();
  for (Index i = 0; i < a.rows(); ++i) {
    double s = 0.0;
    for (int k = outer[i]; k < outer[i + 1]; ++k) s += val[k] * x[inner[k]];
    y[i] = s;
  }
  return y;
}

inline bool same_pattern(const SparseMatrix& a, const SparseMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols() || a.nonZeros() != b.nonZeros()) return false;
  for (Index i = 0; i <= a.rows(); ++i)
    if (a.outerIndexPtr()[i] != b.outerIndexPtr()[i]) return false;
  for (Index k = 0; k < a.nonZeros(); ++k)
    if (a.innerIndexPtr()[k] != b.innerIndexPtr()[k]) return false;
  return true;
}

// Sparse LU with threshold partial pivoting. Immutable; copies share the factorization.
class LUFactors {
 public:
  explicit LUFactors(const SparseMatrix& a) : n_(a.rows()) {
    if (a.rows() != a.cols())
      throw Error("sparse_lu: matrix is " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                  ", not square");
    auto lu = std::make_shared<Solver>();
    Eigen::SparseMatrix<double> col_major(a);
    col_major.makeCompressed();
    lu->analyzePattern(col_major);
    lu->factorize(col_major);
    if (lu->info() != Eigen::Success) throw Error("sparse_lu: singular matrix: " + lu->lastErrorMessage());
    lu_ = std::move(lu);
  }

  Index size() const { return n_; }

  Vector solve(const Vector& b) const {
    if (b.size() != n_) throw Error("lu_solve: rhs length mismatch");
    return lu_->solve(b);
  }

  // Solves for every column of b.
  DenseMatrix solve(const DenseMatrix& b) const {
    if (b.rows() != n_) throw Error("lu_solve: rhs row count mismatch");
    return lu_->solve(b);
  }

 private:
  using Solver = Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>>;
  Index n_ = 0;
  std::shared_ptr<Solver> lu_;
};

inline LUFactors sparse_lu(const SparseMatrix& a) { return LUFactors(a); }

struct EigResult {
  Vector eigenvalues;        // ascending
  DenseMatrix eigenvectors;  // column i pairs with eigenvalues[i]
};

inline double max_abs(const DenseMatrix& a) { return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff(); }

inline bool is_symmetric(const DenseMatrix& a, double rel_tol = 1e-12) {
  if (a.rows() != a.cols()) return false;
  return max_abs(a - a.transpose()) <= rel_tol * std::max(1.0, max_abs(a));
}

inline EigResult sym_eig(const DenseMatrix& a) {
  if (a.rows() != a.cols()) throw Error("sym_eig: matrix not square");
  if (a.rows() > kMaxDenseEigenDim) throw Error("sym_eig: dimension " + std::to_string(a.rows()) + " exceeds cap");
  if (!is_symmetric(a)) throw Error("sym_eig: matrix not symmetric within tolerance");
  const DenseMatrix sym = 0.5 * (a + a.transpose());
  Eigen::SelfAdjointEigenSolver<DenseMatrix> es(sym);
  if (es.info() != Eigen::Success) throw Error("sym_eig: eigensolver did not converge");
  return {es.eigenvalues(), es.eigenvectors()};
}

// Pencil (A, B): B = L Lᵀ, then the standard problem for L⁻¹ A L⁻ᵀ.
// Eigenvectors are returned B-orthonormal.
inline EigResult gen_sym_eig(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != a.cols() || b.rows() != b.cols() || a.rows() != b.rows())
    throw Error("gen_sym_eig: shape mismatch");
  if (!is_symmetric(a)) throw Error("gen_sym_eig: A not symmetric within tolerance");
  if (!is_symmetric(b)) throw Error("gen_sym_eig: B not symmetric within tolerance");
  Eigen::LLT<DenseMatrix> llt(0.5 * (b + b.transpose()));
  if (llt.info() != Eigen::Success) throw Error("gen_sym_eig: B is not positive definite");
  const auto l = llt.matrixL();
  DenseMatrix c = l.solve(0.5 * (a + a.transpose()));
  c = l.solve(c.transpose()).transpose();
  c = 0.5 * (c + c.transpose());
  EigResult r = sym_eig(c);
  r.eigenvectors = llt.matrixU().solve(r.eigenvectors);
  return r;
}

inline double spectral_norm(const DenseMatrix& a) {
  if (a.size() == 0) return 0.0;
  const DenseMatrix g = a.transpose() * a;
  const EigResult r = sym_eig(0.5 * (g + g.transpose()));
  return std::sqrt(std::max(0.0, r.eigenvalues(r.eigenvalues.size() - 1)));
}

}  // namespace sgkkt
