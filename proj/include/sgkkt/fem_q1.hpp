#pragma once

#include "la_core.hpp"

#include <array>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

namespace sgkkt {

// Uniform Q1 grid on [-1,1]^2. Nodes are numbered lexicographically with x fastest;
// node (i, j) sits at (-1 + i h, -1 + j h).
struct Grid {
  int n = 0;  // cells per side
  double h = 0.0;
  std::vector<int> interior_index;  // full node index -> interior index, -1 on the boundary

  int num_nodes() const { return (n + 1) * (n + 1); }
  int num_interior() const { return (n - 1) * (n - 1); }
  int num_elements() const { return n * n; }
  int node_index(int i, int j) const { return j * (n + 1) + i; }
  bool is_boundary(int node) const { return interior_index[static_cast<std::size_t>(node)] < 0; }

  std::array<double, 2> node(int idx) const {
    const int i = idx % (n + 1);
    const int j = idx / (n + 1);
    return {-1.0 + i * h, -1.0 + j * h};
  }

  // Counter-clockwise from the lower-left corner.
  std::array<int, 4> element_nodes(int e) const {
    const int i = e % n;
    const int j = e / n;
    return {node_index(i, j), node_index(i + 1, j), node_index(i + 1, j + 1), node_index(i, j + 1)};
  }

  std::array<double, 2> element_center(int e) const {
    return {-1.0 + (e % n + 0.5) * h, -1.0 + (e / n + 0.5) * h};
  }
};

inline Grid build_grid(int n) {
  if (n < 2) throw Error("build_grid: need at least 2 cells per side, got " + std::to_string(n));
  Grid g;
  g.n = n;
  g.h = 2.0 / n;
  g.interior_index.assign(static_cast<std::size_t>(g.num_nodes()), -1);
  for (int j = 1; j < n; ++j)
    for (int i = 1; i < n; ++i) g.interior_index[static_cast<std::size_t>(g.node_index(i, j))] = (j - 1) * (n - 1) + (i - 1);
  return g;
}

namespace q1 {

inline constexpr int kGaussPerElement = 4;
inline const double kGaussOffset = 1.0 / std::sqrt(3.0);

// Reference coordinates of Gauss point q = a + 2b.
inline std::array<double, 2> gauss_reference(int q) {
  return {(q % 2 == 0 ? -1.0 : 1.0) * kGaussOffset, (q / 2 == 0 ? -1.0 : 1.0) * kGaussOffset};
}

inline constexpr std::array<double, 4> kNodeXi = {-1.0, 1.0, 1.0, -1.0};
inline constexpr std::array<double, 4> kNodeEta = {-1.0, -1.0, 1.0, 1.0};

inline double shape(int a, double xi, double eta) {
  return 0.25 * (1.0 + kNodeXi[a] * xi) * (1.0 + kNodeEta[a] * eta);
}

// Reference-coordinate gradient of shape function a.
inline std::array<double, 2> shape_grad(int a, double xi, double eta) {
  return {0.25 * kNodeXi[a] * (1.0 + kNodeEta[a] * eta), 0.25 * kNodeEta[a] * (1.0 + kNodeXi[a] * xi)};
}

}  // namespace q1

inline std::array<double, 2> gauss_point(const Grid& g, int e, int q) {
  const auto c = g.element_center(e);
  const auto r = q1::gauss_reference(q);
  return {c[0] + 0.5 * g.h * r[0], c[1] + 0.5 * g.h * r[1]};
}

// Samples at the 2x2 Gauss points of every element, element-major.
struct CoefficientField {
  int n_elements = 0;
  std::vector<double> values;  // values[4 e + q]

  double at(int e, int q) const { return values[static_cast<std::size_t>(4 * e + q)]; }
  double max_abs() const {
    double m = 0.0;
    for (double v : values) m = std::max(m, std::abs(v));
    return m;
  }
};

inline CoefficientField constant_field(const Grid& g, double value) {
  return {g.num_elements(), std::vector<double>(static_cast<std::size_t>(4 * g.num_elements()), value)};
}

inline CoefficientField sample_coefficient(const Grid& g, const std::function<double(double, double)>& f) {
  CoefficientField field{g.num_elements(), std::vector<double>(static_cast<std::size_t>(4 * g.num_elements()))};
  for (int e = 0; e < g.num_elements(); ++e)
    for (int q = 0; q < 4; ++q) {
      const auto x = gauss_point(g, e, q);
      const double v = f(x[0], x[1]);
      if (!std::isfinite(v)) throw Error("sample_coefficient: non-finite sample in element " + std::to_string(e));
      field.values[static_cast<std::size_t>(4 * e + q)] = v;
    }
  return field;
}

namespace detail {

template <class ElementKernel>
SparseMatrix assemble_full(const Grid& g, ElementKernel&& kernel) {
  std::vector<Triplet> entries;
  entries.reserve(static_cast<std::size_t>(16 * g.num_elements()));
  std::array<std::array<double, 4>, 4> ke{};
  for (int e = 0; e < g.num_elements(); ++e) {
    kernel(e, ke);
    const auto nodes = g.element_nodes(e);
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) entries.emplace_back(nodes[a], nodes[b], ke[a][b]);
  }
  return sparse_from_triplets(g.num_nodes(), g.num_nodes(), entries);
}

}  // namespace detail

// Keeps the interior rows and columns (homogeneous Dirichlet elimination).
inline SparseMatrix restrict_to_interior(const Grid& g, const SparseMatrix& full) {
  std::vector<Triplet> entries;
  entries.reserve(static_cast<std::size_t>(full.nonZeros()));
  for (Index r = 0; r < full.rows(); ++r) {
    const int ri = g.interior_index[static_cast<std::size_t>(r)];
    if (ri < 0) continue;
    for (SparseMatrix::InnerIterator it(full, r); it; ++it) {
      const int ci = g.interior_index[static_cast<std::size_t>(it.col())];
      if (ci >= 0) entries.emplace_back(ri, ci, it.value());
    }
  }
  return sparse_from_triplets(g.num_interior(), g.num_interior(), entries);
}

inline SparseMatrix assemble_mass_full(const Grid& g) {
  const double jac = 0.25 * g.h * g.h;
  return detail::assemble_full(g, [&](int, std::array<std::array<double, 4>, 4>& ke) {
    for (auto& row : ke) row.fill(0.0);
    for (int q = 0; q < 4; ++q) {
      const auto r = q1::gauss_reference(q);
      for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) ke[a][b] += jac * q1::shape(a, r[0], r[1]) * q1::shape(b, r[0], r[1]);
    }
  });
}

inline SparseMatrix assemble_mass(const Grid& g) { return restrict_to_interior(g, assemble_mass_full(g)); }

inline SparseMatrix assemble_stiffness_full(const Grid& g, const CoefficientField& field) {
  if (field.n_elements != g.num_elements() || field.values.size() != static_cast<std::size_t>(4 * g.num_elements()))
    throw Error("assemble_stiffness: field has " + std::to_string(field.values.size()) + " samples, grid needs " +
                std::to_string(4 * g.num_elements()));
  // Physical gradient = (2/h) * reference gradient, times jacobian h^2/4: net factor 1.
  return detail::assemble_full(g, [&](int e, std::array<std::array<double, 4>, 4>& ke) {
    for (auto& row : ke) row.fill(0.0);
    for (int q = 0; q < 4; ++q) {
      const auto r = q1::gauss_reference(q);
      const double k = field.at(e, q);
      std::array<std::array<double, 2>, 4> grad{};
      for (int a = 0; a < 4; ++a) grad[a] = q1::shape_grad(a, r[0], r[1]);
      for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) ke[a][b] += k * (grad[a][0] * grad[b][0] + grad[a][1] * grad[b][1]);
    }
  });
}

inline SparseMatrix assemble_stiffness(const Grid& g, const CoefficientField& field) {
  return restrict_to_interior(g, assemble_stiffness_full(g, field));
}

}  // namespace sgkkt
