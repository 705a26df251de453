#pragma once

#include "la_core.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace sgkkt {

using MultiIndex = std::vector<int>;

inline double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return std::round(r);
}

inline double factorial(int n) {
  double r = 1.0;
  for (int i = 2; i <= n; ++i) r *= i;
  return r;
}

// Total-degree gPC index set, graded by degree.
struct MultiIndexSet {
  int m_xi = 0;
  int p = 0;
  std::vector<MultiIndex> indices;
  std::vector<int> degree_end;  // degree_end[d] = number of indices of degree <= d

  Index size() const { return static_cast<Index>(indices.size()); }
  const MultiIndex& operator[](Index k) const { return indices[static_cast<std::size_t>(k)]; }
  static int degree(const MultiIndex& a) {
    int d = 0;
    for (int v : a) d += v;
    return d;
  }
};

namespace detail {

// All tuples of length `len` summing to `total`, first component descending.
inline void compositions(int len, int total, MultiIndex& prefix, std::vector<MultiIndex>& out) {
  if (len == 1) {
    prefix.push_back(total);
    out.push_back(prefix);
    prefix.pop_back();
    return;
  }
  for (int first = total; first >= 0; --first) {
    prefix.push_back(first);
    compositions(len - 1, total - first, prefix, out);
    prefix.pop_back();
  }
}

}  // namespace detail

inline MultiIndexSet enumerate_multi_indices(int m_xi, int p) {
  if (m_xi < 1) throw Error("enumerate_multi_indices: m_xi must be >= 1");
  if (p < 0) throw Error("enumerate_multi_indices: p must be >= 0");
  MultiIndexSet set;
  set.m_xi = m_xi;
  set.p = p;
  MultiIndex prefix;
  for (int d = 0; d <= p; ++d) {
    detail::compositions(m_xi, d, prefix, set.indices);
    set.degree_end.push_back(static_cast<int>(set.indices.size()));
  }
  return set;
}

// Normalized probabilists' Hermite polynomial He_k(x)/sqrt(k!).
inline double hermite_normalized(int k, double x) {
  double prev = 1.0;
  if (k == 0) return prev;
  double cur = x;
  for (int j = 1; j < k; ++j) {
    const double next = x * cur - j * prev;
    prev = cur;
    cur = next;
  }
  return cur / std::sqrt(factorial(k));
}

inline double evaluate_basis(const MultiIndex& a, const std::vector<double>& xi) {
  double v = 1.0;
  for (std::size_t i = 0; i < a.size(); ++i) v *= hermite_normalized(a[i], xi[i]);
  return v;
}

// E[h_i h_j h_k] for normalized Hermite polynomials under the standard Gaussian.
inline double univariate_triple(int i, int j, int k) {
  if (i < 0 || j < 0 || k < 0) return 0.0;
  const int total = i + j + k;
  if (total % 2 != 0) return 0.0;
  const int s = total / 2;
  if (s < i || s < j || s < k) return 0.0;
  const double num = factorial(i) * factorial(j) * factorial(k);
  return num / (factorial(s - i) * factorial(s - j) * factorial(s - k)) / std::sqrt(num);
}

struct TripleProductSet {
  std::vector<SparseMatrix> H;  // H[l](j, k) = E[psi_l psi_j psi_k]
  SparseMatrix H_sigma;
  SparseMatrix H_gamma;
  Vector h_gamma;  // diagonal of H_gamma
  double gamma = 1.0;

  Index n_terms() const { return static_cast<Index>(H.size()); }
  Index n_xi() const { return H.empty() ? 0 : H.front().rows(); }
};

inline double triple_product(const MultiIndex& l, const MultiIndex& j, const MultiIndex& k) {
  double v = 1.0;
  for (std::size_t i = 0; i < l.size() && v != 0.0; ++i) v *= univariate_triple(l[i], j[i], k[i]);
  return v;
}

inline TripleProductSet build_H(const MultiIndexSet& basis, const MultiIndexSet& coeff, double gamma = 1.0) {
  if (basis.m_xi != coeff.m_xi)
    throw Error("build_H: basis has m_xi=" + std::to_string(basis.m_xi) + ", coefficient set has " +
                std::to_string(coeff.m_xi));
  if (gamma < 0.0) throw Error("build_H: gamma must be nonnegative");
  const Index n = basis.size();
  TripleProductSet t;
  t.gamma = gamma;
  t.H.reserve(static_cast<std::size_t>(coeff.size()));
  for (Index l = 0; l < coeff.size(); ++l) {
    std::vector<Triplet> entries;
    for (Index j = 0; j < n; ++j)
      for (Index k = 0; k < n; ++k) {
        const double v = triple_product(coeff[l], basis[j], basis[k]);
        if (v != 0.0) entries.emplace_back(static_cast<int>(j), static_cast<int>(k), v);
      }
    t.H.push_back(sparse_from_triplets(n, n, entries));
  }
  std::vector<Triplet> sigma;
  t.h_gamma = Vector::Ones(n);
  for (Index j = 1; j < n; ++j) {
    sigma.emplace_back(static_cast<int>(j), static_cast<int>(j), 1.0);
    t.h_gamma[j] = 1.0 + gamma;
  }
  t.H_sigma = sparse_from_triplets(n, n, sigma);
  std::vector<Triplet> hg;
  for (Index j = 0; j < n; ++j) hg.emplace_back(static_cast<int>(j), static_cast<int>(j), t.h_gamma[j]);
  t.H_gamma = sparse_from_triplets(n, n, hg);
  return t;
}

// Cumulative column counts per degree: level d spans [begin(d), end(d)).
struct LevelPartition {
  std::vector<int> boundaries;

  int num_levels() const { return static_cast<int>(boundaries.size()); }
  int begin(int d) const { return d == 0 ? 0 : boundaries[static_cast<std::size_t>(d - 1)]; }
  int end(int d) const { return boundaries[static_cast<std::size_t>(d)]; }
  int level_of(int column) const {
    for (int d = 0; d < num_levels(); ++d)
      if (column < end(d)) return d;
    return -1;
  }
};

inline LevelPartition level_partition(const MultiIndexSet& basis) {
  LevelPartition lp;
  for (int d = 0; d <= basis.p; ++d) lp.boundaries.push_back(static_cast<int>(binomial(basis.m_xi + d, d)));
  if (lp.boundaries.back() != basis.size()) throw Error("level_partition: basis is not a full total-degree set");
  return lp;
}

// Strictly lower level-block part: entries whose row level exceeds the column level.
inline SparseMatrix strictly_lower_levels(const SparseMatrix& h, const LevelPartition& lp) {
  std::vector<Triplet> entries;
  for (Index r = 0; r < h.rows(); ++r)
    for (SparseMatrix::InnerIterator it(h, r); it; ++it)
      if (lp.level_of(static_cast<int>(r)) > lp.level_of(static_cast<int>(it.col())))
        entries.emplace_back(static_cast<int>(r), static_cast<int>(it.col()), it.value());
  return sparse_from_triplets(h.rows(), h.cols(), entries);
}

// h = L + Lᵀ with L the strict lower triangle plus half the diagonal.
inline SparseMatrix elementwise_lower_split(const SparseMatrix& h) {
  std::vector<Triplet> entries;
  for (Index r = 0; r < h.rows(); ++r)
    for (SparseMatrix::InnerIterator it(h, r); it; ++it) {
      if (it.col() < r)
        entries.emplace_back(static_cast<int>(r), static_cast<int>(it.col()), it.value());
      else if (it.col() == r)
        entries.emplace_back(static_cast<int>(r), static_cast<int>(r), 0.5 * it.value());
    }
  return sparse_from_triplets(h.rows(), h.cols(), entries);
}

}  // namespace sgkkt
