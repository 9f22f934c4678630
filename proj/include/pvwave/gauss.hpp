// Gauss-Legendre nodes and weights on [0, L].
#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace pvwave {

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

// Nodes/weights of the n-point Gauss-Legendre rule mapped from [-1,1] to [0,L].
// Newton iteration on P_n with the Chebyshev-like initial guess; accurate to
// machine precision for n up to a few hundred, which covers every grid here.
inline QuadratureRule gauss_legendre(int n, double length) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: need at least one point");
  if (!(length > 0.0)) throw std::invalid_argument("gauss_legendre: length must be positive");
  QuadratureRule rule;
  rule.nodes.resize(static_cast<std::size_t>(n));
  rule.weights.resize(static_cast<std::size_t>(n));
  const int half = (n + 1) / 2;
  for (int i = 0; i < half; ++i) {
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      // Legendre recurrence for P_n(x) and P_{n-1}(x).
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    // refresh dp at the converged node
    {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
    }
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[static_cast<std::size_t>(i)] = 0.5 * length * (1.0 - x);
    rule.nodes[static_cast<std::size_t>(n - 1 - i)] = 0.5 * length * (1.0 + x);
    rule.weights[static_cast<std::size_t>(i)] = 0.5 * length * w;
    rule.weights[static_cast<std::size_t>(n - 1 - i)] = 0.5 * length * w;
  }
  return rule;
}

// Number of Gauss points that integrates trig content up to wavenumber index
// `content` (i.e. integrands built from sin/cos(k pi x / L), k <= content) to
// round-off. Even content cancels by symmetry; odd content is the binding
// case and needs content + ~12 points (measured), padded here for smooth
// non-trigonometric factors such as harmonic-extension profiles.
inline int gauss_points_for_content(int content, int pad = 16) {
  return content + 1 + pad;
}

}  // namespace pvwave
