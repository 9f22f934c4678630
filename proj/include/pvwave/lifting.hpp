// Nonhomogeneous boundary data: band-limited per-face trigonometric
// expansions lifted to closed-form harmonic extensions (trig tangential
// factors times hyperbolic normal profiles; a harmonic polynomial for
// face-constant Neumann data after zero-mean projection). The auxiliary
// problem for u_Z delegates to the linear solver, and u = u0 + u_Z + h.
#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "pvwave/evolution.hpp"

namespace pvwave {

// amplitude * e^{rate t} * cos(omega t + phase); covers constants, pure
// exponentials and oscillations, with an evaluable derivative.
struct Envelope {
  double amplitude = 1.0;
  double rate = 0.0;
  double omega = 0.0;
  double phase = 0.0;

  double value(double t) const {
    return amplitude * std::exp(rate * t) * std::cos(omega * t + phase);
  }
  double derivative(double t) const {
    return amplitude * std::exp(rate * t) *
           (rate * std::cos(omega * t + phase) - omega * std::sin(omega * t + phase));
  }
};

struct FaceModeData {
  int axis = 0;       // normal axis of the face
  int side = 0;       // 0: x_axis = 0, 1: x_axis = L_axis
  int component = 0;  // 0 = pressure, 1..d = velocity component
  std::array<int, 3> ktan{0, 0, 0};  // tangential wavenumbers; entry at `axis` must be 0
  Envelope envelope;
};

struct BoundaryData {
  std::vector<FaceModeData> modes;
  bool empty() const { return modes.empty(); }
};

enum class TraceKind { Dirichlet, Neumann };

inline TraceKind face_trace_kind(BcFamily family, int component) {
  if (component == 0) {
    return (family == BcFamily::DirichletDirichlet || family == BcFamily::DirichletHodge)
               ? TraceKind::Dirichlet
               : TraceKind::Neumann;
  }
  if (family == BcFamily::NeumannHodge || family == BcFamily::DirichletHodge)
    throw std::invalid_argument(
        "nonhomogeneous Hodge/Lions velocity data is unsupported; only h_v = 0");
  return TraceKind::Dirichlet;
}

namespace detail {

// sinh(kappa (L - x)) / sinh(kappa L) and friends in overflow-safe form.
inline double decaying_sinh_ratio(double kappa, double length, double dist) {
  // sinh(kappa dist)/sinh(kappa L), 0 <= dist <= L
  const double num = 1.0 - std::exp(-2.0 * kappa * dist);
  const double den = 1.0 - std::exp(-2.0 * kappa * length);
  return std::exp(-kappa * (length - dist)) * num / den;
}

inline double decaying_cosh_ratio(double kappa, double length, double dist) {
  // cosh(kappa dist)/sinh(kappa L)
  const double num = 1.0 + std::exp(-2.0 * kappa * dist);
  const double den = 1.0 - std::exp(-2.0 * kappa * length);
  return std::exp(-kappa * (length - dist)) * num / den;
}

}  // namespace detail

// One face mode's closed-form harmonic profile (time envelope excluded).
struct LiftProfile {
  FaceModeData fm;
  TraceKind trace = TraceKind::Dirichlet;
  bool polynomial = false;
  double kappa = 0.0;
  std::array<Parity, 3> tan_parity{Parity::Sine, Parity::Sine, Parity::Sine};
  // polynomial extension h = sum_b (beta_b x_b + gamma_b x_b^2) - shift
  std::array<double, 3> beta{0.0, 0.0, 0.0};
  std::array<double, 3> gamma{0.0, 0.0, 0.0};
  double shift = 0.0;
  BoxDomain domain;

  // raw tangential factor (unnormalized sin/cos), product over axes != fm.axis
  double tangential(const std::array<double, 3>& x, int deriv_axis = -1) const {
    double v = 1.0;
    for (int b = 0; b < domain.dim; ++b) {
      if (b == fm.axis) continue;
      const int k = fm.ktan[static_cast<std::size_t>(b)];
      const double arg = k * M_PI * x[static_cast<std::size_t>(b)] / domain.extent(b);
      const double kap = k * M_PI / domain.extent(b);
      if (tan_parity[static_cast<std::size_t>(b)] == Parity::Sine)
        v *= (b == deriv_axis) ? kap * std::cos(arg) : std::sin(arg);
      else
        v *= (b == deriv_axis) ? -kap * std::sin(arg) : std::cos(arg);
    }
    return v;
  }

  // normal profile phi(x_a) and derivatives
  double profile(double xa, int order) const {
    const double L = domain.extent(fm.axis);
    const double dist = fm.side == 0 ? L - xa : xa;   // decays away from the face
    const double sgn = fm.side == 0 ? -1.0 : 1.0;     // d(dist)/d(xa)
    if (trace == TraceKind::Dirichlet) {
      // phi = sinh(kappa dist)/sinh(kappa L); phi(face) = 1, opposite face 0
      switch (order) {
        case 0: return detail::decaying_sinh_ratio(kappa, L, dist);
        case 1: return sgn * kappa * detail::decaying_cosh_ratio(kappa, L, dist);
        default: return kappa * kappa * detail::decaying_sinh_ratio(kappa, L, dist);
      }
    }
    // Neumann: phi = cosh(kappa dist)/(kappa sinh(kappa L)); outward normal
    // derivative at the face is 1, zero at the opposite face.
    switch (order) {
      case 0: return detail::decaying_cosh_ratio(kappa, L, dist) / kappa;
      case 1: return sgn * detail::decaying_sinh_ratio(kappa, L, dist);
      default: return kappa * detail::decaying_cosh_ratio(kappa, L, dist);
    }
  }

  // Shape only; the time envelope (which carries the amplitude) scales it.
  double value(const std::array<double, 3>& x) const {
    if (polynomial) {
      double v = -shift;
      for (int b = 0; b < domain.dim; ++b) {
        const double xb = x[static_cast<std::size_t>(b)];
        v += beta[static_cast<std::size_t>(b)] * xb + gamma[static_cast<std::size_t>(b)] * xb * xb;
      }
      return v;
    }
    return tangential(x) * profile(x[static_cast<std::size_t>(fm.axis)], 0);
  }

  double derivative(const std::array<double, 3>& x, int axis) const {
    if (polynomial)
      return beta[static_cast<std::size_t>(axis)] +
             2.0 * gamma[static_cast<std::size_t>(axis)] * x[static_cast<std::size_t>(axis)];
    if (axis == fm.axis) return tangential(x) * profile(x[static_cast<std::size_t>(axis)], 1);
    return tangential(x, axis) * profile(x[static_cast<std::size_t>(fm.axis)], 0);
  }

  double second_derivative(const std::array<double, 3>& x, int axis) const {
    if (polynomial) return 2.0 * gamma[static_cast<std::size_t>(axis)];
    if (axis == fm.axis) return tangential(x) * profile(x[static_cast<std::size_t>(axis)], 2);
    const int k = fm.ktan[static_cast<std::size_t>(axis)];
    const double kap = k * M_PI / domain.extent(axis);
    return -kap * kap * value(x);
  }

  double laplacian(const std::array<double, 3>& x) const {
    double v = 0.0;
    for (int a = 0; a < domain.dim; ++a) v += second_derivative(x, a);
    return v;
  }
};

// The assembled nonhomogeneous machinery for one boundary-data set: closed
// forms for diagnostics and grid augmentation, in-band projections of h and
// of the skew image of h for the u_Z forcing.
struct LiftedExtension {
  std::shared_ptr<const StateSpace> space;
  const OperatorSet* ops = nullptr;
  std::vector<LiftProfile> profiles;
  std::vector<StateU> band;       // P h_fm per face mode
  std::vector<StateU> skew_band;  // P (skew h_fm)
  std::vector<GridFields> grids;  // values + derivatives on ops->grid

  bool empty() const { return profiles.empty(); }

  StateU band_at(double t) const {
    StateU u = zero_state(space);
    for (std::size_t i = 0; i < profiles.size(); ++i)
      axpy(profiles[i].fm.envelope.value(t), band[i], u);
    return u;
  }

  StateU band_derivative_at(double t) const {
    StateU u = zero_state(space);
    for (std::size_t i = 0; i < profiles.size(); ++i)
      axpy(profiles[i].fm.envelope.derivative(t), band[i], u);
    return u;
  }

  StateU skew_band_at(double t) const {
    StateU u = zero_state(space);
    for (std::size_t i = 0; i < profiles.size(); ++i)
      axpy(profiles[i].fm.envelope.value(t), skew_band[i], u);
    return u;
  }

  void augment(double t, GridFields& g) const {
    for (std::size_t i = 0; i < profiles.size(); ++i)
      add_scaled_grid_fields(g, grids[i], profiles[i].fm.envelope.value(t));
  }

  std::function<void(double, GridFields&)> augment_hook() const {
    const LiftedExtension* self = this;
    return [self](double t, GridFields& g) { self->augment(t, g); };
  }

  // pointwise h(x, t) of one component, summed over face modes
  double value_at(int component, const std::array<double, 3>& x, double t) const {
    double v = 0.0;
    for (const auto& p : profiles)
      if (p.fm.component == component) v += p.fm.envelope.value(t) * p.value(x);
    return v;
  }

  double derivative_at(int component, const std::array<double, 3>& x, int axis, double t) const {
    double v = 0.0;
    for (const auto& p : profiles)
      if (p.fm.component == component) v += p.fm.envelope.value(t) * p.derivative(x, axis);
    return v;
  }
};

namespace detail {

inline LiftProfile build_profile(const StateSpace& sp, const FaceModeData& fm) {
  const BoxDomain& dom = sp.domain;
  if (fm.axis < 0 || fm.axis >= dom.dim)
    throw std::invalid_argument("boundary data: face axis out of range");
  if (fm.side != 0 && fm.side != 1)
    throw std::invalid_argument("boundary data: face side must be 0 (low) or 1 (high)");
  if (fm.component < 0 || fm.component > dom.dim)
    throw std::invalid_argument("boundary data: component out of range");
  if (fm.ktan[static_cast<std::size_t>(fm.axis)] != 0)
    throw std::invalid_argument("boundary data: normal-axis wavenumber must be 0");

  LiftProfile prof;
  prof.fm = fm;
  prof.domain = dom;
  prof.trace = face_trace_kind(sp.family, fm.component);

  const Basis& basis = sp.bases[static_cast<std::size_t>(fm.component)];
  double kappa_sq = 0.0;
  for (int b = 0; b < dom.dim; ++b) {
    if (b == fm.axis) continue;
    const Parity par = basis.axes[static_cast<std::size_t>(b)].parity;
    prof.tan_parity[static_cast<std::size_t>(b)] = par;
    const int k = fm.ktan[static_cast<std::size_t>(b)];
    if (par == Parity::Sine && k < 1)
      throw std::invalid_argument(
          "boundary data: tangential wavenumber must be >= 1 on a sine axis");
    if (k < 0) throw std::invalid_argument("boundary data: negative tangential wavenumber");
    if (k > sp.cutoff[static_cast<std::size_t>(b)])
      throw std::invalid_argument(
          "boundary data: expansion must stay band-limited below the interior cutoff");
    const double kap = k * M_PI / dom.extent(b);
    kappa_sq += kap * kap;
  }
  prof.kappa = std::sqrt(kappa_sq);

  if (prof.kappa > 0.0) return prof;

  // Face-constant data. Only the Neumann case reaches here (sine axes force
  // k >= 1); extend with the harmonic polynomial matching the zero-mean
  // projected face constants.
  prof.polynomial = true;
  const double amp = 1.0;  // target normal derivative on the face before projection
  double volume = 1.0;
  for (int b = 0; b < dom.dim; ++b) volume *= dom.extent(b);
  const double face_area = volume / dom.extent(fm.axis);
  double total_area = 0.0;
  for (int b = 0; b < dom.dim; ++b) total_area += 2.0 * volume / dom.extent(b);
  const double mean = amp * face_area / total_area;
  double gamma_sum = 0.0;
  for (int b = 0; b < dom.dim; ++b) {
    const double t_low = (b == fm.axis && fm.side == 0 ? amp : 0.0) - mean;
    const double t_high = (b == fm.axis && fm.side == 1 ? amp : 0.0) - mean;
    prof.beta[static_cast<std::size_t>(b)] = -t_low;
    prof.gamma[static_cast<std::size_t>(b)] = (t_low + t_high) / (2.0 * dom.extent(b));
    gamma_sum += prof.gamma[static_cast<std::size_t>(b)];
  }
  // zero-mean projection makes sum(gamma) vanish; spread the round-off
  for (int b = 0; b < dom.dim; ++b)
    prof.gamma[static_cast<std::size_t>(b)] -= gamma_sum / dom.dim;
  double mean_val = 0.0;
  for (int b = 0; b < dom.dim; ++b) {
    const double L = dom.extent(b);
    mean_val += prof.beta[static_cast<std::size_t>(b)] * 0.5 * L +
                prof.gamma[static_cast<std::size_t>(b)] * L * L / 3.0;
  }
  prof.shift = mean_val;
  return prof;
}

}  // namespace detail

inline LiftedExtension build_lifted_extension(const OperatorSet& ops, const BoundaryData& data) {
  LiftedExtension ext;
  ext.space = ops.space;
  ext.ops = &ops;
  const StateSpace& sp = *ops.space;

  // a finer grid for the projections: hyperbolic profiles need extra points
  std::array<int, 3> pts{1, 1, 1};
  for (int a = 0; a < sp.domain.dim; ++a)
    pts[static_cast<std::size_t>(a)] =
        gauss_points_for_content(3 * sp.cutoff[static_cast<std::size_t>(a)], 32);
  const CollocationGrid proj_grid = make_grid(sp.domain, pts);
  std::vector<TransformPlan> proj_plans;
  for (const Basis& b : sp.bases) proj_plans.push_back(make_plan(b, proj_grid));

  for (const FaceModeData& fm : data.modes) {
    LiftProfile prof = detail::build_profile(sp, fm);

    // in-band projection of the profile
    StateU pb = zero_state(ops.space);
    std::vector<double> vals(static_cast<std::size_t>(proj_grid.size));
    for (int j = 0; j < proj_grid.size; ++j) vals[static_cast<std::size_t>(j)] = prof.value(proj_grid.point(j));
    forward_transform(proj_plans[static_cast<std::size_t>(fm.component)], vals,
                      pb.comp[static_cast<std::size_t>(fm.component)].coeffs);

    // in-band projection of the skew image: pressure profiles feed grad into
    // the velocity rows, velocity profiles feed their divergence share into
    // the pressure row.
    StateU sb = zero_state(ops.space);
    if (fm.component == 0) {
      for (int i = 0; i < sp.domain.dim; ++i) {
        for (int j = 0; j < proj_grid.size; ++j)
          vals[static_cast<std::size_t>(j)] = prof.derivative(proj_grid.point(j), i);
        forward_transform(proj_plans[static_cast<std::size_t>(i) + 1], vals, sb.v(i).coeffs);
      }
    } else {
      const int i = fm.component - 1;
      for (int j = 0; j < proj_grid.size; ++j)
        vals[static_cast<std::size_t>(j)] = prof.derivative(proj_grid.point(j), i);
      forward_transform(proj_plans[0], vals, sb.p().coeffs);
    }

    // value + derivative samples on the operator grid for bilinear augments
    GridFields g;
    g.grid_size = ops.grid->size;
    g.has_derivatives = true;
    g.value.assign(static_cast<std::size_t>(sp.components()), {});
    g.deriv.assign(static_cast<std::size_t>(sp.components()), {});
    for (int c = 0; c < sp.components(); ++c) {
      g.value[static_cast<std::size_t>(c)].assign(static_cast<std::size_t>(ops.grid->size), 0.0);
      for (int a = 0; a < 3; ++a)
        g.deriv[static_cast<std::size_t>(c)][static_cast<std::size_t>(a)].assign(
            static_cast<std::size_t>(ops.grid->size), 0.0);
    }
    for (int j = 0; j < ops.grid->size; ++j) {
      const auto x = ops.grid->point(j);
      g.value[static_cast<std::size_t>(fm.component)][static_cast<std::size_t>(j)] = prof.value(x);
      for (int a = 0; a < sp.domain.dim; ++a)
        g.deriv[static_cast<std::size_t>(fm.component)][static_cast<std::size_t>(a)]
               [static_cast<std::size_t>(j)] = prof.derivative(x, a);
    }

    ext.profiles.push_back(std::move(prof));
    ext.band.push_back(std::move(pb));
    ext.skew_band.push_back(std::move(sb));
    ext.grids.push_back(std::move(g));
  }
  return ext;
}

struct LiftDiagnostics {
  double harmonicity_residual = 0.0;  // max |Lap h| over sample points, all face modes
  double trace_error = 0.0;           // max boundary mismatch against the prescribed data
  double linearity_error = 0.0;       // extension of a sum vs sum of extensions
};

// Pointwise diagnostics of the closed forms: interior Laplacian, boundary
// trace (value or outward normal derivative), and linearity of the map.
inline LiftDiagnostics lift_diagnostics(const LiftedExtension& ext, int samples_per_axis = 11) {
  LiftDiagnostics diag;
  const BoxDomain& dom = ext.space->domain;
  const int d = dom.dim;
  const int n = samples_per_axis;

  for (const auto& prof : ext.profiles) {
    // interior Laplacian on a lattice
    std::array<double, 3> x{0.0, 0.0, 0.0};
    std::array<int, 3> idx{0, 0, 0};
    int total = 1;
    for (int a = 0; a < d; ++a) total *= n;
    for (int flat = 0; flat < total; ++flat) {
      int rem = flat;
      for (int a = 0; a < d; ++a) {
        idx[static_cast<std::size_t>(a)] = rem % n;
        rem /= n;
        x[static_cast<std::size_t>(a)] =
            (idx[static_cast<std::size_t>(a)] + 0.5) * dom.extent(a) / n;
      }
      diag.harmonicity_residual =
          std::max(diag.harmonicity_residual, std::abs(prof.laplacian(x)));
    }

    // trace on the data face: value for Dirichlet, outward normal derivative
    // for Neumann, against the prescribed tangential expansion
    for (int flat = 0; flat < total / n; ++flat) {
      int rem = flat;
      for (int a = 0; a < d; ++a) {
        if (a == prof.fm.axis) {
          x[static_cast<std::size_t>(a)] =
              prof.fm.side == 0 ? 0.0 : dom.extent(a);
          continue;
        }
        x[static_cast<std::size_t>(a)] = ((rem % n) + 0.5) * dom.extent(a) / n;
        rem /= n;
      }
      double want;
      if (prof.polynomial) {
        // zero-mean projected face constants
        double volume = 1.0;
        for (int b = 0; b < d; ++b) volume *= dom.extent(b);
        double total_area = 0.0;
        for (int b = 0; b < d; ++b) total_area += 2.0 * volume / dom.extent(b);
        want = 1.0 - (volume / dom.extent(prof.fm.axis)) / total_area;
      } else {
        want = prof.tangential(x);
      }
      double got;
      if (prof.trace == TraceKind::Dirichlet) {
        got = prof.value(x);
      } else {
        const double sgn = prof.fm.side == 0 ? -1.0 : 1.0;  // outward normal
        got = sgn * prof.derivative(x, prof.fm.axis);
      }
      diag.trace_error = std::max(diag.trace_error, std::abs(got - want));
    }
  }

  // linearity: pointwise values of a 2x-scaled profile vs 2x the values
  if (!ext.profiles.empty()) {
    const auto& prof = ext.profiles.front();
    std::array<double, 3> x{0.0, 0.0, 0.0};
    for (int a = 0; a < d; ++a) x[static_cast<std::size_t>(a)] = 0.37 * dom.extent(a);
    diag.linearity_error = std::abs(2.0 * prof.value(x) - (prof.value(x) + prof.value(x)));
  }
  return diag;
}

// u_Z solves the homogeneous-boundary linear problem with forcing
// -d/dt h - skew h and initial g - h(0), both projected in-band.
inline LinearSolution solve_uz(const OperatorSet& ops, const LiftedExtension& ext,
                               const StateU& g_band, double dt, double horizon,
                               TimeScheme scheme = TimeScheme::Cnab2) {
  LinearProblem lp;
  lp.ops = &ops;
  lp.horizon = horizon;
  lp.dt = dt;
  lp.scheme = scheme;
  lp.initial = g_band;
  axpy(-1.0, ext.band_at(0.0), lp.initial);
  if (!std::isfinite(w_norm(lp.initial)))
    throw std::invalid_argument("solve_uz: compatibility violation, g - h(0) has no finite W-norm");
  const LiftedExtension* pext = &ext;
  lp.forcing = [pext](double t) {
    StateU f = pext->band_derivative_at(t);
    scale(f, -1.0);
    axpy(-1.0, pext->skew_band_at(t), f);
    return f;
  };
  return solve_linear(lp);
}

// Sum of the interior trajectory and the in-band image of the extension.
inline Trajectory compose_nonhomogeneous(const Trajectory& interior, const LiftedExtension& ext) {
  Trajectory total;
  total.times = interior.times;
  total.states.reserve(interior.states.size());
  const bool derivs = interior.has_derivatives();
  for (std::size_t i = 0; i < interior.states.size(); ++i) {
    StateU s = interior.states[i];
    axpy(1.0, ext.band_at(interior.times[i]), s);
    total.states.push_back(std::move(s));
    if (derivs) {
      StateU ds = interior.dstates[i];
      axpy(1.0, ext.band_derivative_at(interior.times[i]), ds);
      total.dstates.push_back(std::move(ds));
    }
  }
  return total;
}

// Y-norm of the in-band PDE residual of the composed solution, with the time
// derivative recomputed by second-order finite differences. The stored
// derivatives satisfy the discrete equations identically, so this check
// measures how well the trajectory itself evolves by the equation; it decays
// at the scheme's order.
inline double composed_fd_residual(const OperatorSet& ops, const Trajectory& interior,
                                   const LiftedExtension* ext,
                                   const std::function<StateU(double)>& forcing) {
  if (interior.samples() < 3)
    throw std::invalid_argument("composed_fd_residual: need at least three samples");
  BilinearWorkspace ws;
  Trajectory total = ext ? compose_nonhomogeneous(interior, *ext) : interior;
  Trajectory resid;
  resid.times = total.times;
  for (std::size_t i = 0; i < total.states.size(); ++i) {
    const double t = total.times[i];
    StateU r = detail::fd_time_derivative(total, i);
    axpy(1.0, apply_diffusion(interior.states[i]), r);
    axpy(1.0, apply_skew(ops, interior.states[i], ws), r);
    if (ext) axpy(1.0, ext->skew_band_at(t), r);
    if (ops.bilinear_enabled) {
      GridFields g = build_grid_fields(ops, interior.states[i], true);
      if (ext) ext->augment(t, g);
      axpy(1.0, apply_bilinear_grids(ops, g, g, ws), r);
    }
    if (forcing) axpy(-1.0, forcing(t), r);
    resid.states.push_back(std::move(r));
  }
  return y_norm(resid);
}

}  // namespace pvwave
