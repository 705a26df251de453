#pragma once

#include "format.hpp"
#include "galerkin_ops.hpp"
#include "stochastic_basis.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace sgkkt {

inline constexpr Index kMaxChainDim = 2048;
inline constexpr double kBoundSlack = 1e-9;

inline DenseMatrix dense_kron(const DenseMatrix& a, const DenseMatrix& b) {
  DenseMatrix k(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j) k.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return k;
}

inline DenseMatrix symmetrized(const DenseMatrix& a) { return 0.5 * (a + a.transpose()); }

// Optional pointwise coefficient information for the explicit rho bound.
struct FieldBounds {
  std::vector<double> sup_abs;  // max |a_l| over quadrature points, per coefficient term
  double mean_min = 0.0;        // min of the leading coefficient
};

inline FieldBounds field_bounds(const std::vector<CoefficientField>& fields) {
  FieldBounds fb;
  for (const auto& f : fields) fb.sup_abs.push_back(f.max_abs());
  fb.mean_min = std::numeric_limits<double>::infinity();
  for (double v : fields.front().values) fb.mean_min = std::min(fb.mean_min, v);
  return fb;
}

// Dense operators of the Schur-complement approximation chain. Every Schur
// form is (1/tau) Z W Zᵀ with W = (D (x) M_gamma)^-1; the steady problem is the
// case N_t = 1, tau = 1, D = 1 without time coupling and without the mass term
// in the state operator.
struct SchurChain {
  bool time_dependent = false;
  int n_t = 1;
  double tau = 1.0;
  double beta = 1.0;
  double gamma = 1.0;
  Index n_h = 0, n_xi = 0, n_terms = 0;

  std::vector<DenseMatrix> H;         // stochastic coupling matrices
  std::vector<DenseMatrix> A;         // plain stiffness terms
  std::vector<SparseMatrix> H_sparse;
  DenseMatrix M;                      // spatial mass
  DenseMatrix K;                      // leading spatial block of the truncated factors
  DenseMatrix W, A_t, N, C_M, Z_bar, Z_tilde;
  DenseMatrix S_exact, S_bar, S_tilde;
  std::map<Index, DenseMatrix> Z_r, S_r, Z_hgs, S_hgs;
  FieldBounds field;
};

namespace detail {

inline DenseMatrix schur_form(const DenseMatrix& z, const DenseMatrix& w, double tau) {
  return symmetrized(z * w * z.transpose() / tau);
}

inline DenseMatrix kron_sum_dense(const std::vector<DenseMatrix>& h, const std::vector<DenseMatrix>& a, Index from,
                                  Index to, double scale) {
  DenseMatrix s = DenseMatrix::Zero(h.front().rows() * a.front().rows(), h.front().cols() * a.front().cols());
  for (Index l = from; l < to; ++l) s += scale * dense_kron(h[static_cast<std::size_t>(l)], a[static_cast<std::size_t>(l)]);
  return s;
}

inline void build_chain(SchurChain& c, const SparseMatrix& mass, const KroneckerSumOperator& stiffness,
                        const Vector& h_gamma, const SparseMatrix& C, const std::vector<double>& d,
                        const std::vector<Index>& r_values) {
  const Index nx = c.n_h * c.n_xi;
  if (c.n_t * nx > kMaxChainDim)
    throw Error("build_schur_chain: dimension " + std::to_string(c.n_t * nx) + " exceeds " + std::to_string(kMaxChainDim));
  c.n_terms = stiffness.n_terms();
  c.M = to_dense(mass);
  for (Index l = 0; l < c.n_terms; ++l) {
    c.H.push_back(to_dense(stiffness.H[static_cast<std::size_t>(l)]));
    c.A.push_back(to_dense(stiffness.A[static_cast<std::size_t>(l)]));
  }
  c.H_sparse = stiffness.H;
  const DenseMatrix id_xi = DenseMatrix::Identity(c.n_xi, c.n_xi);
  const DenseMatrix id_t = DenseMatrix::Identity(c.n_t, c.n_t);
  const DenseMatrix mx = dense_kron(id_xi, c.M);
  const DenseMatrix mgamma = dense_kron(DenseMatrix(h_gamma.asDiagonal()), c.M);
  DenseMatrix dmat = DenseMatrix::Zero(c.n_t, c.n_t);
  for (int k = 0; k < c.n_t; ++k) dmat(k, k) = d[static_cast<std::size_t>(k)];

  const double shift = c.tau * std::sqrt((1.0 + c.gamma) / c.beta);
  DenseMatrix state = c.tau * kron_sum_dense(c.H, c.A, 0, c.n_terms, 1.0);
  if (c.time_dependent) state += mx;
  c.C_M = dense_kron(to_dense(C), mx);
  c.A_t = dense_kron(id_t, state) + c.C_M;
  c.N = dense_kron(id_t, mx);
  c.W = dense_kron(dmat, mgamma).inverse();
  c.W = symmetrized(c.W);
  c.Z_bar = c.A_t + shift * c.N;
  c.Z_tilde = c.Z_bar - c.C_M;

  const DenseMatrix dm_inv = dense_kron(dmat, mx).inverse();
  c.S_exact = symmetrized(c.A_t * c.W * c.A_t.transpose() / c.tau + (c.tau / c.beta) * c.N * dm_inv * c.N.transpose());
  c.S_bar = schur_form(c.Z_bar, c.W, c.tau);
  c.S_tilde = schur_form(c.Z_tilde, c.W, c.tau);

  c.K = c.tau * c.A.front() + shift * c.M;
  if (c.time_dependent) c.K += c.M;
  const DenseMatrix x1 = dense_kron(id_t, dense_kron(id_xi, c.K));
  for (Index r : r_values) {
    if (r < 1 || r > c.n_terms) throw Error("build_schur_chain: r=" + std::to_string(r) + " outside [1, n_A]");
    const DenseMatrix zr = dense_kron(id_t, dense_kron(id_xi, c.K) + kron_sum_dense(c.H, c.A, 1, r, c.tau));
    DenseMatrix xr = DenseMatrix::Zero(nx, nx);
    for (Index l = 1; l < r; ++l)
      xr += c.tau * dense_kron(to_dense(elementwise_lower_split(stiffness.H[static_cast<std::size_t>(l)])),
                               c.A[static_cast<std::size_t>(l)]);
    const DenseMatrix xrt = dense_kron(id_t, xr);
    const DenseMatrix lhs = x1 + xrt;
    const DenseMatrix zh = symmetrized(lhs * x1.llt().solve(lhs.transpose()));
    c.Z_r[r] = zr;
    c.S_r[r] = schur_form(zr, c.W, c.tau);
    c.Z_hgs[r] = zh;
    c.S_hgs[r] = schur_form(zh, c.W, c.tau);
  }
}

}  // namespace detail

inline SchurChain build_schur_chain(const SteadyKKT& sys, const std::vector<Index>& r_values, FieldBounds field = {}) {
  SchurChain c;
  c.n_h = sys.n_h();
  c.n_xi = sys.n_xi();
  c.beta = sys.beta;
  c.gamma = sys.gamma;
  c.field = std::move(field);
  detail::build_chain(c, sys.M, sys.stiffness, sys.h_gamma, SparseMatrix(1, 1), {1.0}, r_values);
  return c;
}

inline SchurChain build_schur_chain(const TimeKKT& sys, const std::vector<Index>& r_values, FieldBounds field = {}) {
  SchurChain c;
  c.time_dependent = true;
  c.n_t = sys.n_t();
  c.tau = sys.stencil.tau;
  c.n_h = sys.n_h();
  c.n_xi = sys.n_xi();
  c.beta = sys.base.beta;
  c.gamma = sys.base.gamma;
  c.field = std::move(field);
  detail::build_chain(c, sys.base.M, sys.base.stiffness, sys.base.h_gamma, sys.stencil.C, sys.stencil.d, r_values);
  return c;
}

struct BoundReport {
  std::string link;
  double lambda_min = 0.0;
  double lambda_max = 0.0;
  double bound_lo = 0.0;
  double bound_hi = 0.0;
  bool applicable = true;
  bool pass = false;
  std::vector<std::pair<std::string, double>> diagnostics;
  std::string note;

  double diagnostic(const std::string& key) const {
    for (const auto& [k, v] : diagnostics)
      if (k == key) return v;
    throw Error("BoundReport: no diagnostic named " + key);
  }
};

namespace detail {

inline void fill_interval(BoundReport& rep, const DenseMatrix& a, const DenseMatrix& b) {
  const EigResult er = gen_sym_eig(a, b);
  rep.lambda_min = er.eigenvalues[0];
  rep.lambda_max = er.eigenvalues[er.eigenvalues.size() - 1];
}

inline bool inside(const BoundReport& r) {
  return r.lambda_min >= r.bound_lo - kBoundSlack && r.lambda_max <= r.bound_hi + kBoundSlack;
}

inline double max_abs_eig(const DenseMatrix& a, const DenseMatrix& b) {
  const EigResult er = gen_sym_eig(a, b);
  return std::max(std::abs(er.eigenvalues[0]), std::abs(er.eigenvalues[er.eigenvalues.size() - 1]));
}

}  // namespace detail

// Exact Schur complement against the factorized approximation:
// lambda in [1/(2(1+alpha*)), 1), alpha* from the condition number of the state operator.
inline BoundReport check_exact_vs_bar(const SchurChain& c) {
  BoundReport rep;
  rep.link = "exact_vs_bar";
  detail::fill_interval(rep, c.S_exact, c.S_bar);
  const EigResult ata = sym_eig(symmetrized(c.A_t.transpose() * c.A_t));
  const double kappa = std::sqrt(ata.eigenvalues[ata.eigenvalues.size() - 1] / ata.eigenvalues[0]);
  const double sk = std::sqrt(kappa);
  const double alpha = sk > 1.0 ? std::pow((sk + 1.0) / (sk - 1.0), 2) - 1.0 : std::numeric_limits<double>::infinity();
  rep.bound_lo = std::isinf(alpha) ? 0.0 : 1.0 / (2.0 * (1.0 + alpha));
  rep.bound_hi = 1.0;
  rep.pass = rep.lambda_min >= rep.bound_lo - kBoundSlack && rep.lambda_max < rep.bound_hi + kBoundSlack &&
             rep.lambda_min > 0.0;
  rep.diagnostics = {{"kappa_A_t", kappa}, {"alpha", alpha}};
  return rep;
}

// Dropping the time coupling: lambda(S_tilde^-1 S_bar) in [(1-theta)^2, (1+theta)^2].
inline BoundReport check_bar_vs_tilde(const SchurChain& c) {
  if (!c.time_dependent) throw Error("check_bar_vs_tilde: steady chain has no time coupling");
  BoundReport rep;
  rep.link = "bar_vs_tilde";
  detail::fill_interval(rep, c.S_bar, c.S_tilde);

  const DenseMatrix num = symmetrized(c.C_M * c.W * c.C_M.transpose());
  const DenseMatrix den = symmetrized(c.Z_tilde * c.W * c.Z_tilde.transpose());
  const EigResult th = gen_sym_eig(num, den);
  const double theta = std::sqrt(std::max(0.0, th.eigenvalues[th.eigenvalues.size() - 1]));
  rep.bound_lo = theta >= 1.0 ? 0.0 : (1.0 - theta) * (1.0 - theta);
  rep.bound_hi = (1.0 + theta) * (1.0 + theta);
  rep.pass = detail::inside(rep);

  // mu: tau sqrt((1+gamma)/beta) sigma_min(N W^1/2) = mu ||(I (x) L) W^1/2||.
  const double shift = c.tau * std::sqrt((1.0 + c.gamma) / c.beta);
  const DenseMatrix state = c.Z_tilde - shift * c.N;
  const EigResult nw = sym_eig(symmetrized(c.N * c.W * c.N.transpose()));
  const EigResult lw = sym_eig(symmetrized(state * c.W * state.transpose()));
  const double sigma_nw = std::sqrt(std::max(0.0, nw.eigenvalues[0]));
  const double norm_lw = std::sqrt(std::max(0.0, lw.eigenvalues[lw.eigenvalues.size() - 1]));
  const double mu = shift * sigma_nw / norm_lw;
  const EigResult me = sym_eig(c.M);
  const double m_min = me.eigenvalues[0];
  const double m_max = me.eigenvalues[me.eigenvalues.size() - 1];
  const double kappa_half = std::sqrt(m_max / m_min);
  const EigResult st = sym_eig(c.S_tilde);
  const double s_tilde_min = st.eigenvalues[0];
  const bool mu_ok = mu > 1.0;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const double theta_bound =
      mu_ok ? std::sqrt(2.0 * c.beta) * kappa_half / (std::sqrt(1.0 + c.gamma) * (1.0 - 1.0 / mu) * c.tau) : nan;
  const double lmin_bound = mu_ok ? (c.tau / c.beta) * std::pow(1.0 - 1.0 / mu, 2) * m_min : nan;
  rep.diagnostics = {{"theta", theta},
                     {"theta_bound", theta_bound},
                     {"mu", mu},
                     {"kappa_M_half", kappa_half},
                     {"lambda_min_S_tilde", s_tilde_min},
                     {"lambda_min_S_tilde_bound", lmin_bound},
                     {"theta_bound_holds", mu_ok ? static_cast<double>(theta <= theta_bound + kBoundSlack) : nan},
                     {"lambda_min_bound_holds",
                      mu_ok ? static_cast<double>(s_tilde_min >= lmin_bound * (1.0 - kBoundSlack)) : nan}};
  if (!mu_ok) rep.note = "mu <= 1: analytic theta bound not applicable";
  return rep;
}

// Truncation after r terms: lambda(S_tilde^-1 S_r) in [(1-eps1)^2, (1+eps2)^2], with
// eps from the pencil (sum_{l<=r} H_l (x) A_l, sum_l H_l (x) A_l).
inline BoundReport check_tilde_vs_truncated(const SchurChain& c, Index r) {
  const auto it = c.S_r.find(r);
  if (it == c.S_r.end()) throw Error("check_tilde_vs_truncated: chain was built without r=" + std::to_string(r));
  BoundReport rep;
  rep.link = "tilde_vs_truncated(r=" + std::to_string(r) + ")";
  detail::fill_interval(rep, it->second, c.S_tilde);
  const DenseMatrix full = symmetrized(detail::kron_sum_dense(c.H, c.A, 0, c.n_terms, 1.0));
  const DenseMatrix part = symmetrized(detail::kron_sum_dense(c.H, c.A, 0, r, 1.0));
  const EigResult pe = gen_sym_eig(part, full);
  const double eps1 = std::max(0.0, 1.0 - pe.eigenvalues[0]);
  const double eps2 = std::max(0.0, pe.eigenvalues[pe.eigenvalues.size() - 1] - 1.0);
  rep.bound_lo = eps1 >= 1.0 ? 0.0 : (1.0 - eps1) * (1.0 - eps1);
  rep.bound_hi = (1.0 + eps2) * (1.0 + eps2);
  rep.pass = detail::inside(rep);
  rep.diagnostics = {{"r", static_cast<double>(r)}, {"eps1", eps1}, {"eps2", eps2}};
  return rep;
}

// Symmetric Gauss-Seidel splitting against the truncated factor:
// lambda(S_r^-1 S_hGS) in [1, (1 + Delta^2/(1-Delta))^2] when Delta_r < 1.
inline BoundReport check_hgs_link(const SchurChain& c, Index r) {
  const auto it = c.S_hgs.find(r);
  if (it == c.S_hgs.end()) throw Error("check_hgs_link: chain was built without r=" + std::to_string(r));
  BoundReport rep;
  rep.link = "hgs(r=" + std::to_string(r) + ")";
  detail::fill_interval(rep, it->second, c.S_r.at(r));

  double delta = 0.0;
  bool one_per_row = true;
  bool rho_bound_ok = true;
  std::vector<std::pair<std::string, double>> diag{{"r", static_cast<double>(r)}};
  const DenseMatrix k = symmetrized(c.K);
  for (Index l = 1; l < r; ++l) {
    const auto ls = static_cast<std::size_t>(l);
    const SparseMatrix low = elementwise_lower_split(c.H_sparse[ls]);
    std::vector<int> row_count(static_cast<std::size_t>(low.rows()), 0), col_count(row_count);
    for (Index i = 0; i < low.rows(); ++i)
      for (SparseMatrix::InnerIterator e(low, i); e; ++e) {
        ++row_count[static_cast<std::size_t>(i)];
        ++col_count[static_cast<std::size_t>(e.col())];
      }
    for (std::size_t i = 0; i < row_count.size(); ++i)
      if (row_count[i] > 1 || col_count[i] > 1) one_per_row = false;
    const double h_norm = spectral_norm(c.H[ls]);
    const double rho_unscaled = detail::max_abs_eig(symmetrized(c.A[ls]), k);
    const double rho = c.tau * rho_unscaled;
    delta += h_norm * rho;
    const std::string tag = std::to_string(l + 1);
    diag.emplace_back("rho_" + tag, rho);
    diag.emplace_back("rho_unscaled_" + tag, rho_unscaled);
    if (l < static_cast<Index>(c.field.sup_abs.size()) && c.field.mean_min > 0.0) {
      const double bound = c.field.sup_abs[ls] / (c.tau * c.field.mean_min);
      diag.emplace_back("rho_unscaled_bound_" + tag, bound);
      if (rho_unscaled > bound * (1.0 + kBoundSlack)) rho_bound_ok = false;
    }
  }
  diag.emplace_back("Delta", delta);
  // The splitting itself satisfies Z_hGS >= Z_r; report its pencil next to the Schur one.
  const Vector zeig = gen_sym_eig(c.Z_hgs.at(r), symmetrized(c.Z_r.at(r))).eigenvalues;
  diag.emplace_back("lambda_min_Z_pencil", zeig.minCoeff());
  diag.emplace_back("lambda_max_Z_pencil", zeig.maxCoeff());
  diag.emplace_back("L_one_nonzero_per_row_col", one_per_row ? 1.0 : 0.0);
  diag.emplace_back("rho_bound_holds", rho_bound_ok ? 1.0 : 0.0);
  rep.diagnostics = std::move(diag);

  rep.bound_lo = 1.0;
  rep.applicable = delta < 1.0 && one_per_row;
  rep.diagnostics.emplace_back("upper_bound_applicable", rep.applicable ? 1.0 : 0.0);
  if (rep.applicable) {
    rep.bound_hi = std::pow(1.0 + delta * delta / (1.0 - delta), 2);
  } else {
    rep.bound_hi = std::numeric_limits<double>::infinity();
    rep.note = delta >= 1.0 ? "Delta_r >= 1: upper bound not applicable"
                            : "splitting has more than one nonzero per row or column: upper bound not applicable";
  }
  rep.pass = detail::inside(rep);
  return rep;
}

inline std::string diagnostics_text(const BoundReport& r) {
  std::string s;
  for (const auto& [k, v] : r.diagnostics) {
    if (!s.empty()) s += ';';
    s += k + "=" + format_double(v);
  }
  return s;
}

inline std::string reports_csv(const std::vector<BoundReport>& reports) {
  std::ostringstream os;
  os << "link,lambda_min,lambda_max,bound_lo,bound_hi,pass,diagnostics\n";
  for (const auto& r : reports)
    os << '"' << r.link << "\"," << format_double(r.lambda_min) << ',' << format_double(r.lambda_max) << ','
       << format_double(r.bound_lo) << ',' << format_double(r.bound_hi) << ','
       << (r.pass ? "true" : "false") << ",\""
       << diagnostics_text(r) << "\"\n";
  return os.str();
}

inline std::string reports_text(const std::vector<BoundReport>& reports) {
  std::ostringstream os;
  for (const auto& r : reports) {
    os << r.link << ": [" << format_double(r.lambda_min) << ", " << format_double(r.lambda_max) << "] within ["
       << format_double(r.bound_lo) << ", " << format_double(r.bound_hi) << "] -> "
       << (r.pass ? "PASS" : "FAIL") << (r.applicable ? "" : " (not applicable)") << '\n';
    os << "  " << diagnostics_text(r) << '\n';
    if (!r.note.empty()) os << "  note: " << r.note << '\n';
  }
  return os.str();
}

}  // namespace sgkkt
