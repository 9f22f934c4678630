// Coefficient containers: SpectralField for one component, StateU bundling
// the pressure/velocity pair under a boundary-condition family, Trajectory
// for time-sampled states. StateSpace fixes the bases and the diffusion
// multipliers so norms and operators agree on scaling.
#pragma once

#include <array>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "pvwave/basis.hpp"

namespace pvwave {

enum class BcFamily {
  DirichletDirichlet,  // (2a)
  NeumannHodge,        // (2b), d = 3
  NeumannDirichlet,    // (2c)
  DirichletHodge       // (2d), d = 3
};

inline std::string family_name(BcFamily f) {
  switch (f) {
    case BcFamily::DirichletDirichlet: return "dirichlet-dirichlet";
    case BcFamily::NeumannHodge: return "neumann-hodge";
    case BcFamily::NeumannDirichlet: return "neumann-dirichlet";
    case BcFamily::DirichletHodge: return "dirichlet-hodge";
  }
  return "?";
}

inline BcFamily parse_family(const std::string& s) {
  if (s == "dirichlet-dirichlet") return BcFamily::DirichletDirichlet;
  if (s == "neumann-hodge") return BcFamily::NeumannHodge;
  if (s == "neumann-dirichlet") return BcFamily::NeumannDirichlet;
  if (s == "dirichlet-hodge") return BcFamily::DirichletHodge;
  throw std::invalid_argument("unknown boundary-condition family '" + s + "'");
}

inline bool family_requires_3d(BcFamily f) {
  return f == BcFamily::NeumannHodge || f == BcFamily::DirichletHodge;
}

// Admissible sigma range per family. Hodge families are pinned to sigma = 1;
// the Neumann-Dirichlet range is open at 1/2.
inline void check_sigma(BcFamily f, double sigma) {
  const auto fail = [&](const std::string& range) {
    throw std::invalid_argument("sigma " + std::to_string(sigma) + " outside " + range +
                                " for family " + family_name(f));
  };
  switch (f) {
    case BcFamily::DirichletDirichlet:
      if (!(sigma >= 0.5 && sigma <= 1.0)) fail("[1/2, 1]");
      break;
    case BcFamily::NeumannDirichlet:
      if (!(sigma > 0.5 && sigma <= 1.0)) fail("(1/2, 1]");
      break;
    case BcFamily::NeumannHodge:
    case BcFamily::DirichletHodge:
      if (sigma != 1.0) fail("{1}");
      break;
  }
}

inline BasisKind pressure_kind(BcFamily f) {
  switch (f) {
    case BcFamily::DirichletDirichlet:
    case BcFamily::DirichletHodge: return dirichlet_scalar();
    case BcFamily::NeumannHodge:
    case BcFamily::NeumannDirichlet: return neumann_scalar();
  }
  return dirichlet_scalar();
}

inline BasisKind velocity_kind(BcFamily f, int component) {
  switch (f) {
    case BcFamily::DirichletDirichlet:
    case BcFamily::NeumannDirichlet: return dirichlet_vector_component();
    case BcFamily::NeumannHodge:
    case BcFamily::DirichletHodge: return free_slip_vector_component(component);
  }
  return dirichlet_vector_component();
}

struct StateSpace {
  BoxDomain domain;
  BcFamily family = BcFamily::DirichletDirichlet;
  double sigma = 1.0;
  double zeta = 1.0;  // pressure diffusion coefficient
  double mu = 1.0;    // velocity diffusion coefficient
  std::array<int, 3> cutoff{0, 0, 0};
  std::vector<Basis> bases;                        // [0] = p, [1..d] = v components
  std::vector<std::vector<double>> multipliers;    // per component: coeff * eigenvalue, sorted order
  int total_size = 0;

  int components() const { return domain.dim + 1; }
  double diffusion_coeff(int comp) const { return comp == 0 ? zeta : mu; }
  double min_multiplier() const {
    double m = multipliers[0][0];
    for (const auto& v : multipliers)
      for (double x : v) m = std::min(m, x);
    return m;
  }
  double max_multiplier() const {
    double m = 0.0;
    for (const auto& v : multipliers)
      for (double x : v) m = std::max(m, x);
    return m;
  }
};

inline std::shared_ptr<const StateSpace> make_state_space(const BoxDomain& domain, BcFamily family,
                                                          double sigma, double zeta, double mu,
                                                          std::array<int, 3> cutoff) {
  if (family_requires_3d(family) && domain.dim != 3)
    throw std::invalid_argument("family " + family_name(family) + " requires dim = 3");
  check_sigma(family, sigma);
  if (!(zeta > 0.0) || !(mu > 0.0))
    throw std::invalid_argument("diffusion coefficients zeta, mu must be positive");
  auto sp = std::make_shared<StateSpace>();
  sp->domain = domain;
  sp->family = family;
  sp->sigma = sigma;
  sp->zeta = zeta;
  sp->mu = mu;
  sp->cutoff = cutoff;
  sp->bases.push_back(build_basis(domain, pressure_kind(family), cutoff));
  for (int c = 0; c < domain.dim; ++c)
    sp->bases.push_back(build_basis(domain, velocity_kind(family, c), cutoff));
  sp->total_size = 0;
  for (std::size_t c = 0; c < sp->bases.size(); ++c) {
    const Basis& b = sp->bases[c];
    std::vector<double> mult(static_cast<std::size_t>(b.size()));
    const double coeff = c == 0 ? zeta : mu;
    for (std::size_t i = 0; i < mult.size(); ++i) mult[i] = coeff * b.modes[i].eigenvalue;
    sp->multipliers.push_back(std::move(mult));
    sp->total_size += b.size();
  }
  return sp;
}

struct SpectralField {
  const Basis* basis = nullptr;
  std::vector<double> coeffs;
};

struct StateU {
  std::shared_ptr<const StateSpace> space;
  std::vector<SpectralField> comp;  // [0] = p, [1..d] = v

  SpectralField& p() { return comp[0]; }
  const SpectralField& p() const { return comp[0]; }
  SpectralField& v(int i) { return comp[static_cast<std::size_t>(i) + 1]; }
  const SpectralField& v(int i) const { return comp[static_cast<std::size_t>(i) + 1]; }
  int components() const { return static_cast<int>(comp.size()); }
};

inline StateU zero_state(std::shared_ptr<const StateSpace> space) {
  StateU u;
  u.space = std::move(space);
  u.comp.resize(static_cast<std::size_t>(u.space->components()));
  for (int c = 0; c < u.space->components(); ++c) {
    u.comp[static_cast<std::size_t>(c)].basis = &u.space->bases[static_cast<std::size_t>(c)];
    u.comp[static_cast<std::size_t>(c)].coeffs.assign(
        static_cast<std::size_t>(u.space->bases[static_cast<std::size_t>(c)].size()), 0.0);
  }
  return u;
}

inline void check_same_space(const StateU& a, const StateU& b, const char* what) {
  if (a.space.get() != b.space.get())
    throw std::invalid_argument(std::string(what) + ": states from different spaces");
}

inline void axpy(double a, const StateU& x, StateU& y) {
  check_same_space(x, y, "axpy");
  for (std::size_t c = 0; c < y.comp.size(); ++c)
    for (std::size_t i = 0; i < y.comp[c].coeffs.size(); ++i)
      y.comp[c].coeffs[i] += a * x.comp[c].coeffs[i];
}

inline void scale(StateU& u, double a) {
  for (auto& f : u.comp)
    for (double& x : f.coeffs) x *= a;
}

// H inner product: the bases are L2-orthonormal, so it is the plain
// coefficient dot product.
inline double inner(const StateU& a, const StateU& b) {
  check_same_space(a, b, "inner");
  double s = 0.0;
  for (std::size_t c = 0; c < a.comp.size(); ++c)
    for (std::size_t i = 0; i < a.comp[c].coeffs.size(); ++i)
      s += a.comp[c].coeffs[i] * b.comp[c].coeffs[i];
  return s;
}

inline double h_norm(const StateU& u) { return std::sqrt(inner(u, u)); }

inline double max_abs_coeff(const StateU& u) {
  double m = 0.0;
  for (const auto& f : u.comp)
    for (double x : f.coeffs) m = std::max(m, std::abs(x));
  return m;
}

struct Trajectory {
  std::vector<double> times;
  std::vector<StateU> states;
  std::vector<StateU> dstates;  // equation-consistent time derivatives; may be empty

  bool has_derivatives() const { return dstates.size() == states.size() && !dstates.empty(); }
  int samples() const { return static_cast<int>(times.size()); }
};

inline std::vector<double> trapezoid_weights(const std::vector<double>& times) {
  const std::size_t n = times.size();
  std::vector<double> w(n, 0.0);
  if (n < 2) return w;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double h = times[i + 1] - times[i];
    if (!(h > 0.0)) throw std::invalid_argument("trajectory times must be strictly increasing");
    w[i] += 0.5 * h;
    w[i + 1] += 0.5 * h;
  }
  return w;
}

// Linear interpolation in time (clamped at the ends). Newton iterates reuse
// trajectories across steps through this.
inline StateU interpolate(const Trajectory& traj, double t) {
  if (traj.states.empty()) throw std::invalid_argument("interpolate: empty trajectory");
  if (t <= traj.times.front()) return traj.states.front();
  if (t >= traj.times.back()) return traj.states.back();
  std::size_t hi = 1;
  while (traj.times[hi] < t) ++hi;
  const double t0 = traj.times[hi - 1], t1 = traj.times[hi];
  const double a = (t - t0) / (t1 - t0);
  StateU u = traj.states[hi - 1];
  scale(u, 1.0 - a);
  axpy(a, traj.states[hi], u);
  return u;
}

}  // namespace pvwave
