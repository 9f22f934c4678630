// Explicit orthonormal eigenbases of the scaled Laplacians on a box, one
// basis kind per boundary-condition family and field component. Eigenvalues
// are closed-form; modes are ordered ascending by eigenvalue with a
// lexicographic tie-break so runs are reproducible.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "pvwave/box_domain.hpp"

namespace pvwave {

enum class Parity { Sine, Cosine };

struct BasisKind {
  enum class Tag {
    DirichletScalar,
    NeumannScalar,          // zero-mean: constant mode excluded
    DirichletVectorComponent,
    FreeSlipVectorComponent  // sine in `axis`, cosine in the other axes
  };
  Tag tag = Tag::DirichletScalar;
  int axis = -1;  // only meaningful for FreeSlipVectorComponent

  bool operator==(const BasisKind&) const = default;
};

inline BasisKind dirichlet_scalar() { return {BasisKind::Tag::DirichletScalar, -1}; }
inline BasisKind neumann_scalar() { return {BasisKind::Tag::NeumannScalar, -1}; }
inline BasisKind dirichlet_vector_component() {
  return {BasisKind::Tag::DirichletVectorComponent, -1};
}
inline BasisKind free_slip_vector_component(int axis) {
  return {BasisKind::Tag::FreeSlipVectorComponent, axis};
}

inline std::string kind_name(const BasisKind& k) {
  switch (k.tag) {
    case BasisKind::Tag::DirichletScalar: return "dirichlet-scalar";
    case BasisKind::Tag::NeumannScalar: return "neumann-scalar";
    case BasisKind::Tag::DirichletVectorComponent: return "dirichlet-vector";
    case BasisKind::Tag::FreeSlipVectorComponent:
      return "free-slip-vector(axis " + std::to_string(k.axis + 1) + ")";
  }
  return "?";
}

struct ModeSpec {
  std::array<int, 3> k{0, 0, 0};
  double eigenvalue = 0.0;  // unscaled Laplacian eigenvalue sum((k_i pi / L_i)^2)
};

// One-dimensional factor family along an axis: contiguous wavenumber range of
// a single parity. k ranges are [kmin, kmax].
struct AxisFactors {
  Parity parity = Parity::Sine;
  int kmin = 1;
  int kmax = 1;
  double length = 0.0;

  int count() const { return kmax - kmin + 1; }
};

inline double factor_norm_constant(Parity parity, int k, double length) {
  if (parity == Parity::Cosine && k == 0) return std::sqrt(1.0 / length);
  return std::sqrt(2.0 / length);
}

inline double factor_value(Parity parity, int k, double length, double x) {
  const double n = factor_norm_constant(parity, k, length);
  const double arg = k * M_PI * x / length;
  return parity == Parity::Sine ? n * std::sin(arg) : n * std::cos(arg);
}

inline double factor_derivative(Parity parity, int k, double length, double x) {
  const double n = factor_norm_constant(parity, k, length);
  const double kap = k * M_PI / length;
  const double arg = kap * x;
  return parity == Parity::Sine ? n * kap * std::cos(arg) : -n * kap * std::sin(arg);
}

struct Basis {
  BoxDomain domain;
  BasisKind kind;
  std::array<int, 3> cutoff{0, 0, 0};
  std::array<AxisFactors, 3> axes;  // axes[a] valid for a < domain.dim
  std::vector<ModeSpec> modes;      // sorted ascending by eigenvalue, lex tie-break
  std::vector<int> tensor_index;    // sorted mode -> flat tensor slot
  std::array<int, 3> tensor_dims{1, 1, 1};
  int tensor_size = 1;

  int size() const { return static_cast<int>(modes.size()); }

  int flat(const std::array<int, 3>& k) const {
    int idx = 0;
    for (int a = domain.dim - 1; a >= 0; --a) {
      const auto& ax = axes[static_cast<std::size_t>(a)];
      idx = idx * tensor_dims[static_cast<std::size_t>(a)] + (k[static_cast<std::size_t>(a)] - ax.kmin);
    }
    return idx;
  }

  double eval(const ModeSpec& mode, const std::array<double, 3>& x) const {
    double v = 1.0;
    for (int a = 0; a < domain.dim; ++a) {
      const auto& ax = axes[static_cast<std::size_t>(a)];
      v *= factor_value(ax.parity, mode.k[static_cast<std::size_t>(a)], ax.length,
                        x[static_cast<std::size_t>(a)]);
    }
    return v;
  }
};

inline Basis build_basis(const BoxDomain& domain, const BasisKind& kind,
                         std::array<int, 3> cutoff) {
  for (int a = 0; a < domain.dim; ++a) {
    if (cutoff[static_cast<std::size_t>(a)] < 1)
      throw std::invalid_argument("build_basis: cutoff must be >= 1 per axis");
  }
  if (kind.tag == BasisKind::Tag::FreeSlipVectorComponent) {
    if (domain.dim != 3)
      throw std::invalid_argument("build_basis: free-slip components require dim = 3");
    if (kind.axis < 0 || kind.axis >= domain.dim)
      throw std::invalid_argument("build_basis: free-slip axis out of range");
  }

  Basis b;
  b.domain = domain;
  b.kind = kind;
  b.cutoff = cutoff;

  for (int a = 0; a < domain.dim; ++a) {
    AxisFactors ax;
    ax.length = domain.extent(a);
    const int m = cutoff[static_cast<std::size_t>(a)];
    switch (kind.tag) {
      case BasisKind::Tag::DirichletScalar:
      case BasisKind::Tag::DirichletVectorComponent:
        ax.parity = Parity::Sine;
        ax.kmin = 1;
        ax.kmax = m;
        break;
      case BasisKind::Tag::NeumannScalar:
        ax.parity = Parity::Cosine;
        ax.kmin = 0;
        ax.kmax = m;
        break;
      case BasisKind::Tag::FreeSlipVectorComponent:
        if (a == kind.axis) {
          ax.parity = Parity::Sine;
          ax.kmin = 1;
        } else {
          ax.parity = Parity::Cosine;
          ax.kmin = 0;
        }
        ax.kmax = m;
        break;
    }
    b.axes[static_cast<std::size_t>(a)] = ax;
    b.tensor_dims[static_cast<std::size_t>(a)] = ax.count();
  }
  b.tensor_size = 1;
  for (int a = 0; a < domain.dim; ++a) b.tensor_size *= b.tensor_dims[static_cast<std::size_t>(a)];

  // Enumerate the tensor index set, skipping the Neumann constant mode.
  std::array<int, 3> k{0, 0, 0};
  const auto push_all = [&](auto&& self, int axis) -> void {
    if (axis == domain.dim) {
      if (kind.tag == BasisKind::Tag::NeumannScalar) {
        bool all_zero = true;
        for (int a = 0; a < domain.dim; ++a)
          if (k[static_cast<std::size_t>(a)] != 0) all_zero = false;
        if (all_zero) return;  // quotient by constants
      }
      ModeSpec m;
      m.k = k;
      double lam = 0.0;
      for (int a = 0; a < domain.dim; ++a) {
        const double kap = k[static_cast<std::size_t>(a)] * M_PI / domain.extent(a);
        lam += kap * kap;
      }
      m.eigenvalue = lam;
      b.modes.push_back(m);
      return;
    }
    const auto& ax = b.axes[static_cast<std::size_t>(axis)];
    for (int kk = ax.kmin; kk <= ax.kmax; ++kk) {
      k[static_cast<std::size_t>(axis)] = kk;
      self(self, axis + 1);
    }
  };
  push_all(push_all, 0);

  std::sort(b.modes.begin(), b.modes.end(), [](const ModeSpec& lhs, const ModeSpec& rhs) {
    if (lhs.eigenvalue != rhs.eigenvalue) return lhs.eigenvalue < rhs.eigenvalue;
    return lhs.k < rhs.k;
  });

  b.tensor_index.resize(b.modes.size());
  for (std::size_t i = 0; i < b.modes.size(); ++i) b.tensor_index[i] = b.flat(b.modes[i].k);
  return b;
}

inline double eval_mode(const Basis& basis, const ModeSpec& mode, const std::array<double, 3>& x) {
  if (!inside_closed_box(basis.domain, x))
    throw std::invalid_argument("eval_mode: point outside the closed box");
  return basis.eval(mode, x);
}

}  // namespace pvwave
