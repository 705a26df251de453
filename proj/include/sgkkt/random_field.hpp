#pragma once

#include "fem_q1.hpp"
#include "stochastic_basis.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <tuple>
#include <vector>

namespace sgkkt {

// Separable exponential covariance sigma_k^2 exp(-|dx|/ell1 - |dy|/ell2).
struct CovarianceSpec {
  double sigma_k = 0.0;
  double ell1 = 1.0;
  double ell2 = 1.0;
  double mean = 1.0;

  void validate() const {
    if (!(sigma_k >= 0.0)) throw Error("CovarianceSpec: sigma_k must be >= 0");
    if (!(ell1 > 0.0) || !(ell2 > 0.0)) throw Error("CovarianceSpec: correlation lengths must be > 0");
  }

  double operator()(double x1, double y1, double x2, double y2) const {
    return sigma_k * sigma_k * std::exp(-std::abs(x1 - x2) / ell1 - std::abs(y1 - y2) / ell2);
  }
};

struct KLModes {
  std::vector<double> eigenvalues;               // nonincreasing
  std::vector<CoefficientField> mode_fields;     // sqrt(theta_i) kappa_i at Gauss points
  CoefficientField mean_field;

  int m_xi() const { return static_cast<int>(mode_fields.size()); }
};

namespace detail {

inline void fix_sign(std::vector<double>& v) {
  double scale = 0.0;
  for (double x : v) scale = std::max(scale, std::abs(x));
  if (scale == 0.0) return;
  for (double x : v)
    if (std::abs(x) > 1e-10 * scale) {
      if (x < 0.0)
        for (double& y : v) y = -y;
      return;
    }
}

// 1-D Nystrom problem on the Gauss abscissae of one grid axis (2 per cell, weight h/2).
struct AxisModes {
  Vector eigenvalues;  // descending
  DenseMatrix modes;   // column a: L2-normalized eigenfunction samples
};

inline AxisModes axis_modes(const Grid& g, double ell) {
  const Index np = 2 * g.n;
  Vector x(np);
  for (int i = 0; i < g.n; ++i)
    for (int a = 0; a < 2; ++a)
      x[2 * i + a] = -1.0 + (i + 0.5) * g.h + 0.5 * g.h * q1::gauss_reference(a)[0];
  const double w = 0.5 * g.h;
  DenseMatrix k(np, np);
  for (Index r = 0; r < np; ++r)
    for (Index c = 0; c < np; ++c) k(r, c) = w * std::exp(-std::abs(x[r] - x[c]) / ell);
  const EigResult er = sym_eig(k);
  AxisModes out{er.eigenvalues.reverse(), er.eigenvectors.rowwise().reverse() / std::sqrt(w)};
  return out;
}

}  // namespace detail

// Nystrom KL at the element Gauss points. The covariance is separable and the
// points form a tensor grid, so the 2-D weighted eigenproblem factors into two
// 1-D problems; modes are tensor products ordered by eigenvalue, ties broken by
// (x-index, y-index).
inline KLModes kl_expand(const CovarianceSpec& spec, const Grid& g, int m_xi) {
  spec.validate();
  const int n_points = 4 * g.num_elements();
  if (m_xi < 1 || m_xi > n_points)
    throw Error("kl_expand: m_xi=" + std::to_string(m_xi) + " outside [1, " + std::to_string(n_points) + "]");
  const detail::AxisModes ax = detail::axis_modes(g, spec.ell1);
  const detail::AxisModes ay = detail::axis_modes(g, spec.ell2);
  const Index np = 2 * g.n;

  std::vector<std::tuple<double, Index, Index>> pairs;
  pairs.reserve(static_cast<std::size_t>(np * np));
  for (Index a = 0; a < np; ++a)
    for (Index b = 0; b < np; ++b)
      pairs.emplace_back(std::max(0.0, ax.eigenvalues[a]) * std::max(0.0, ay.eigenvalues[b]), a, b);
  std::stable_sort(pairs.begin(), pairs.end(), [](const auto& l, const auto& r) {
    if (std::get<0>(l) != std::get<0>(r)) return std::get<0>(l) > std::get<0>(r);
    return std::tie(std::get<1>(l), std::get<2>(l)) < std::tie(std::get<1>(r), std::get<2>(r));
  });

  KLModes out;
  out.mean_field = constant_field(g, spec.mean);
  for (int i = 0; i < m_xi; ++i) {
    const auto [lambda, a, b] = pairs[static_cast<std::size_t>(i)];
    const double theta = spec.sigma_k * spec.sigma_k * lambda;
    std::vector<double> v(static_cast<std::size_t>(n_points));
    for (int e = 0; e < g.num_elements(); ++e)
      for (int q = 0; q < 4; ++q) {
        const Index ix = 2 * (e % g.n) + q % 2;
        const Index iy = 2 * (e / g.n) + q / 2;
        v[static_cast<std::size_t>(4 * e + q)] = ax.modes(ix, a) * ay.modes(iy, b);
      }
    detail::fix_sign(v);
    for (double& x : v) x *= std::sqrt(theta);
    out.eigenvalues.push_back(theta);
    out.mode_fields.push_back({g.num_elements(), std::move(v)});
  }
  return out;
}

// Direct 2-D Nystrom on all 4 n^2 Gauss points, weight (h/2)^2 each. Needs no
// separability; degenerate eigenspaces come back in solver-dependent bases.
inline KLModes kl_expand_dense(const CovarianceSpec& spec, const Grid& g, int m_xi) {
  spec.validate();
  const int n_points = 4 * g.num_elements();
  if (m_xi < 1 || m_xi > n_points)
    throw Error("kl_expand_dense: m_xi=" + std::to_string(m_xi) + " outside [1, " + std::to_string(n_points) + "]");
  if (n_points > kMaxDenseEigenDim) throw Error("kl_expand_dense: too many sample points for a dense solve");
  std::vector<std::array<double, 2>> pts(static_cast<std::size_t>(n_points));
  for (int e = 0; e < g.num_elements(); ++e)
    for (int q = 0; q < 4; ++q) pts[static_cast<std::size_t>(4 * e + q)] = gauss_point(g, e, q);
  const double w = 0.25 * g.h * g.h;
  DenseMatrix c(n_points, n_points);
  for (int r = 0; r < n_points; ++r)
    for (int s = 0; s < n_points; ++s) {
      const auto& p = pts[static_cast<std::size_t>(r)];
      const auto& t = pts[static_cast<std::size_t>(s)];
      c(r, s) = w * spec(p[0], p[1], t[0], t[1]);
    }
  const EigResult er = sym_eig(c);
  KLModes out;
  out.mean_field = constant_field(g, spec.mean);
  for (int i = 0; i < m_xi; ++i) {
    const Index col = n_points - 1 - i;
    const double theta = std::max(0.0, er.eigenvalues[col]);
    std::vector<double> v(static_cast<std::size_t>(n_points));
    for (int r = 0; r < n_points; ++r) v[static_cast<std::size_t>(r)] = er.eigenvectors(r, col) / std::sqrt(w);
    detail::fix_sign(v);
    for (double& x : v) x *= std::sqrt(theta);
    out.eigenvalues.push_back(theta);
    out.mode_fields.push_back({g.num_elements(), std::move(v)});
  }
  return out;
}

// One field per coefficient gPC index.
struct GpcCoefficientField {
  std::vector<CoefficientField> coeff_fields;

  Index n_terms() const { return static_cast<Index>(coeff_fields.size()); }
};

// Mean plus the scaled modes, aligned with the degree-1 coefficient index set.
inline GpcCoefficientField affine_coefficient(const KLModes& modes) {
  GpcCoefficientField f;
  f.coeff_fields.push_back(modes.mean_field);
  for (const auto& m : modes.mode_fields) f.coeff_fields.push_back(m);
  return f;
}

// gPC projection of exp(g0 + sum_i g_i xi_i), g_i the mode samples and
// g0 = log(mean) - sum_i g_i^2 / 2 so the expected value is `mean` pointwise.
inline GpcCoefficientField lognormal_coefficient(const KLModes& modes, const MultiIndexSet& coeff_basis) {
  if (coeff_basis.m_xi != modes.m_xi())
    throw Error("lognormal_coefficient: basis has m_xi=" + std::to_string(coeff_basis.m_xi) + ", modes have " +
                std::to_string(modes.m_xi()));
  const int n_el = modes.mean_field.n_elements;
  const std::size_t n_points = modes.mean_field.values.size();
  GpcCoefficientField f;
  f.coeff_fields.assign(static_cast<std::size_t>(coeff_basis.size()),
                        CoefficientField{n_el, std::vector<double>(n_points)});
  std::vector<double> g(static_cast<std::size_t>(modes.m_xi()));
  for (std::size_t s = 0; s < n_points; ++s) {
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = modes.mode_fields[i].values[s];
    const double mean = modes.mean_field.values[s];
    for (Index k = 0; k < coeff_basis.size(); ++k) {
      double v = mean;
      const MultiIndex& a = coeff_basis[k];
      for (std::size_t i = 0; i < g.size(); ++i) v *= std::pow(g[i], a[i]) / std::sqrt(factorial(a[i]));
      f.coeff_fields[static_cast<std::size_t>(k)].values[s] = v;
    }
  }
  return f;
}

// Field realization sum_k c_k(x) psi_k(xi).
inline CoefficientField realize(const GpcCoefficientField& f, const MultiIndexSet& coeff_basis,
                                const std::vector<double>& xi) {
  if (coeff_basis.size() != f.n_terms()) throw Error("realize: basis size does not match field count");
  CoefficientField out = f.coeff_fields.front();
  std::fill(out.values.begin(), out.values.end(), 0.0);
  for (Index k = 0; k < f.n_terms(); ++k) {
    const double psi = evaluate_basis(coeff_basis[k], xi);
    const auto& src = f.coeff_fields[static_cast<std::size_t>(k)].values;
    for (std::size_t s = 0; s < src.size(); ++s) out.values[s] += psi * src[s];
  }
  return out;
}

}  // namespace sgkkt
