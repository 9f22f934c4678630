// Tensor collocation grids (Gauss-Legendre per axis) and the direct-summation
// transforms between spectral coefficients and grid samples. Forward is the
// quadrature projection <f, phi_k>, inverse is plain evaluation; with grids
// sized by the dealiasing rule both are exact on band-limited data.
#pragma once

#include <array>
#include <cstring>
#include <memory>
#include <stdexcept>
#include <vector>

#include "pvwave/basis.hpp"
#include "pvwave/gauss.hpp"

namespace pvwave {

struct CollocationGrid {
  BoxDomain domain;
  std::array<int, 3> dims{1, 1, 1};
  std::array<std::vector<double>, 3> nodes;
  std::array<std::vector<double>, 3> weights;
  int size = 1;

  std::array<double, 3> point(int flat) const {
    std::array<double, 3> x{0.0, 0.0, 0.0};
    for (int a = 0; a < domain.dim; ++a) {
      const int n = dims[static_cast<std::size_t>(a)];
      x[static_cast<std::size_t>(a)] = nodes[static_cast<std::size_t>(a)][static_cast<std::size_t>(flat % n)];
      flat /= n;
    }
    return x;
  }

  double weight(int flat) const {
    double w = 1.0;
    for (int a = 0; a < domain.dim; ++a) {
      const int n = dims[static_cast<std::size_t>(a)];
      w *= weights[static_cast<std::size_t>(a)][static_cast<std::size_t>(flat % n)];
      flat /= n;
    }
    return w;
  }
};

inline CollocationGrid make_grid(const BoxDomain& domain, std::array<int, 3> points) {
  CollocationGrid g;
  g.domain = domain;
  g.size = 1;
  for (int a = 0; a < domain.dim; ++a) {
    const int n = points[static_cast<std::size_t>(a)];
    if (n < 1) throw std::invalid_argument("make_grid: need at least one point per axis");
    auto rule = gauss_legendre(n, domain.extent(a));
    g.dims[static_cast<std::size_t>(a)] = n;
    g.nodes[static_cast<std::size_t>(a)] = std::move(rule.nodes);
    g.weights[static_cast<std::size_t>(a)] = std::move(rule.weights);
    g.size *= n;
  }
  return g;
}

// Grid sized so that quadratic products of band-m fields project onto band m
// without aliasing (integrand trig content 3m per axis): the 3/2 rule in
// Gauss form.
inline CollocationGrid dealiased_grid(const BoxDomain& domain, std::array<int, 3> cutoff,
                                      int pad = 16) {
  std::array<int, 3> pts{1, 1, 1};
  for (int a = 0; a < domain.dim; ++a)
    pts[static_cast<std::size_t>(a)] =
        gauss_points_for_content(3 * cutoff[static_cast<std::size_t>(a)], pad);
  return make_grid(domain, pts);
}

// Per-axis evaluation tables of one basis on one grid.
struct TransformPlan {
  const Basis* basis = nullptr;
  const CollocationGrid* grid = nullptr;
  // E[a][j*count + m] = factor value at node j; D likewise for the derivative.
  std::array<std::vector<double>, 3> value_table;
  std::array<std::vector<double>, 3> deriv_table;
};

inline TransformPlan make_plan(const Basis& basis, const CollocationGrid& grid) {
  if (basis.domain.dim != grid.domain.dim)
    throw std::invalid_argument("make_plan: basis/grid dimension mismatch");
  TransformPlan p;
  p.basis = &basis;
  p.grid = &grid;
  for (int a = 0; a < basis.domain.dim; ++a) {
    const auto& ax = basis.axes[static_cast<std::size_t>(a)];
    const auto& nodes = grid.nodes[static_cast<std::size_t>(a)];
    const int nj = static_cast<int>(nodes.size());
    const int nm = ax.count();
    auto& E = p.value_table[static_cast<std::size_t>(a)];
    auto& D = p.deriv_table[static_cast<std::size_t>(a)];
    E.resize(static_cast<std::size_t>(nj) * nm);
    D.resize(static_cast<std::size_t>(nj) * nm);
    for (int j = 0; j < nj; ++j) {
      for (int m = 0; m < nm; ++m) {
        const int k = ax.kmin + m;
        E[static_cast<std::size_t>(j) * nm + m] = factor_value(ax.parity, k, ax.length, nodes[static_cast<std::size_t>(j)]);
        D[static_cast<std::size_t>(j) * nm + m] = factor_derivative(ax.parity, k, ax.length, nodes[static_cast<std::size_t>(j)]);
      }
    }
  }
  return p;
}

namespace detail {

// y[..., r, ...] = sum_j M[j*rows + r] * x[..., j, ...]  contracted along `axis`;
// M is indexed by (input j, output r). dims are the input tensor dims.
inline void contract_axis(const double* x, std::array<int, 3> dims, int axis, const double* M,
                          int rows, double* y) {
  int inner = 1;
  for (int a = 0; a < axis; ++a) inner *= dims[static_cast<std::size_t>(a)];
  const int nj = dims[static_cast<std::size_t>(axis)];
  int outer = 1;
  for (int a = axis + 1; a < 3; ++a) outer *= dims[static_cast<std::size_t>(a)];
  for (int o = 0; o < outer; ++o) {
    const double* xo = x + static_cast<std::ptrdiff_t>(o) * nj * inner;
    double* yo = y + static_cast<std::ptrdiff_t>(o) * rows * inner;
    for (int r = 0; r < rows; ++r)
      for (int i = 0; i < inner; ++i) yo[static_cast<std::ptrdiff_t>(r) * inner + i] = 0.0;
    for (int j = 0; j < nj; ++j) {
      const double* xj = xo + static_cast<std::ptrdiff_t>(j) * inner;
      const double* Mj = M + static_cast<std::ptrdiff_t>(j) * rows;
      for (int r = 0; r < rows; ++r) {
        const double m = Mj[r];
        if (m == 0.0) continue;
        double* yr = yo + static_cast<std::ptrdiff_t>(r) * inner;
        for (int i = 0; i < inner; ++i) yr[i] += m * xj[i];
      }
    }
  }
}

}  // namespace detail

// Coefficients (sorted mode order) -> grid samples. If deriv_axis >= 0 the
// derivative table is used along that axis, yielding samples of the partial
// derivative; the mixed-parity intermediate lives only on the grid.
inline void inverse_transform(const TransformPlan& plan, const std::vector<double>& coeffs,
                              std::vector<double>& out, int deriv_axis = -1) {
  const Basis& b = *plan.basis;
  const CollocationGrid& g = *plan.grid;
  if (static_cast<int>(coeffs.size()) != b.size())
    throw std::invalid_argument("inverse_transform: coefficient/basis size mismatch");

  std::vector<double> tensor(static_cast<std::size_t>(b.tensor_size), 0.0);
  for (std::size_t i = 0; i < coeffs.size(); ++i)
    tensor[static_cast<std::size_t>(b.tensor_index[i])] = coeffs[i];

  std::array<int, 3> dims = b.tensor_dims;
  std::vector<double> buf;
  for (int a = 0; a < b.domain.dim; ++a) {
    const int nj = g.dims[static_cast<std::size_t>(a)];
    const int nm = dims[static_cast<std::size_t>(a)];
    const auto& table = (a == deriv_axis) ? plan.deriv_table[static_cast<std::size_t>(a)]
                                          : plan.value_table[static_cast<std::size_t>(a)];
    // table is [j*nm + m]; contraction needs M[(input m) * rows + (output j)].
    std::vector<double> M(static_cast<std::size_t>(nm) * nj);
    for (int j = 0; j < nj; ++j)
      for (int m = 0; m < nm; ++m)
        M[static_cast<std::size_t>(m) * nj + j] = table[static_cast<std::size_t>(j) * nm + m];
    std::size_t outsz = 1;
    std::array<int, 3> newdims = dims;
    newdims[static_cast<std::size_t>(a)] = nj;
    for (int q = 0; q < 3; ++q) outsz *= static_cast<std::size_t>(newdims[static_cast<std::size_t>(q)]);
    buf.assign(outsz, 0.0);
    detail::contract_axis(tensor.data(), dims, a, M.data(), nj, buf.data());
    tensor.swap(buf);
    dims = newdims;
  }
  out = std::move(tensor);
}

// Grid samples -> coefficients (sorted mode order) via quadrature projection.
inline void forward_transform(const TransformPlan& plan, const std::vector<double>& values,
                              std::vector<double>& coeffs) {
  const Basis& b = *plan.basis;
  const CollocationGrid& g = *plan.grid;
  if (static_cast<int>(values.size()) != g.size)
    throw std::invalid_argument("forward_transform: value/grid size mismatch");

  std::vector<double> tensor = values;
  std::array<int, 3> dims = g.dims;
  std::vector<double> buf;
  for (int a = 0; a < b.domain.dim; ++a) {
    const int nj = g.dims[static_cast<std::size_t>(a)];
    const int nm = b.tensor_dims[static_cast<std::size_t>(a)];
    const auto& table = plan.value_table[static_cast<std::size_t>(a)];
    const auto& w = g.weights[static_cast<std::size_t>(a)];
    // M[(input j) * rows + (output m)] = w_j * E[j, m]
    std::vector<double> M(static_cast<std::size_t>(nj) * nm);
    for (int j = 0; j < nj; ++j)
      for (int m = 0; m < nm; ++m)
        M[static_cast<std::size_t>(j) * nm + m] =
            w[static_cast<std::size_t>(j)] * table[static_cast<std::size_t>(j) * nm + m];
    std::size_t outsz = 1;
    std::array<int, 3> newdims = dims;
    newdims[static_cast<std::size_t>(a)] = nm;
    for (int q = 0; q < 3; ++q) outsz *= static_cast<std::size_t>(newdims[static_cast<std::size_t>(q)]);
    buf.assign(outsz, 0.0);
    detail::contract_axis(tensor.data(), dims, a, M.data(), nm, buf.data());
    tensor.swap(buf);
    dims = newdims;
  }
  coeffs.assign(static_cast<std::size_t>(b.size()), 0.0);
  for (std::size_t i = 0; i < coeffs.size(); ++i)
    coeffs[i] = tensor[static_cast<std::size_t>(b.tensor_index[i])];
}

}  // namespace pvwave
