// Rectangular domain geometry: the stage for every basis in this library.
#pragma once

#include <array>
#include <stdexcept>
#include <string>

namespace pvwave {

struct BoxDomain {
  int dim = 2;                                 // 2 or 3
  std::array<double, 3> extents{0.0, 0.0, 0.0};  // box [0,L1] x ... x [0,Ld]

  double extent(int axis) const { return extents[static_cast<std::size_t>(axis)]; }
};

inline BoxDomain make_box(int dim, std::array<double, 3> extents) {
  if (dim != 2 && dim != 3) throw std::invalid_argument("BoxDomain: dim must be 2 or 3");
  for (int a = 0; a < dim; ++a) {
    if (!(extents[static_cast<std::size_t>(a)] > 0.0))
      throw std::invalid_argument("BoxDomain: extent of axis " + std::to_string(a + 1) +
                                  " must be positive");
  }
  BoxDomain d;
  d.dim = dim;
  d.extents = extents;
  for (int a = dim; a < 3; ++a) d.extents[static_cast<std::size_t>(a)] = 0.0;
  return d;
}

inline BoxDomain unit_pi_box(int dim) {
  return make_box(dim, {M_PI, M_PI, M_PI});
}

inline bool inside_closed_box(const BoxDomain& d, const std::array<double, 3>& x) {
  for (int a = 0; a < d.dim; ++a) {
    const double v = x[static_cast<std::size_t>(a)];
    if (v < 0.0 || v > d.extent(a)) return false;
  }
  return true;
}

}  // namespace pvwave
