// Newton outer iteration for the nonlinear problem and its nonhomogeneous
// variant, with the computable Kantorovich certificate: beta and C_T from the
// a priori probe, K = 2 C_B C_T from the measured bilinear constant, eta the
// norm of the first Newton step, condition beta K eta <= 1/2, and radii
// r_pm = (1 -+ sqrt(1 - 2 beta K eta)) / (beta K).
#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "pvwave/lifting.hpp"

namespace pvwave {

struct NkCertificate {
  double beta = 0.0;  // empirical ||Gamma*|| from the a priori probe
  double c_b = 0.0;   // empirical bilinear constant
  double c_t = 0.0;   // empirical embedding constant X -> C([0,T];W)
  double K = 0.0;     // 2 c_b c_t
  double eta = 0.0;   // ||Gamma* F(u*)||_X, measured as the first Newton-step norm
  double condition = 0.0;
  bool condition_pass = false;
  double r_minus = std::numeric_limits<double>::quiet_NaN();
  double r_plus = std::numeric_limits<double>::quiet_NaN();
  bool radii_defined = false;
  std::vector<double> residual_y;
  std::vector<double> residual_w;
  std::vector<double> iterate_xnorm;  // X-distance of each iterate from the start
  bool converged = false;
  bool diverged = false;
  double containment_max = 0.0;
  bool containment_ok = false;
  int iterations = 0;
  double tolerance = 1e-9;
  std::string warning;
};

struct NonlinearProblem {
  const OperatorSet* ops = nullptr;
  std::function<StateU(double)> forcing;  // null = zero
  StateU initial;
  BoundaryData boundary;  // empty = homogeneous
  double horizon = 1.0;
  double dt = 1e-2;
  double tolerance = 1e-9;
  int max_iterations = 20;
  double smallness_radius = 0.0;  // advisory gate: warn when data exceeds it
  int probe_samples = 12;
  std::uint64_t probe_seed = 17;
  double probe_dt = 0.0;  // 0: use dt
  TimeScheme scheme = TimeScheme::Cnab2;
};

struct ResidualNorms {
  double y = 0.0;
  double w = 0.0;
  double total() const { return std::sqrt(y * y + w * w); }
};

// condition, verdict, radii and containment from the measured constants
inline void complete_certificate(NkCertificate& cert) {
  cert.K = 2.0 * cert.c_b * cert.c_t;
  cert.condition = cert.beta * cert.K * cert.eta;
  cert.condition_pass = cert.condition <= 0.5;
  const double disc = 1.0 - 2.0 * cert.condition;
  cert.radii_defined = disc >= 0.0 && cert.beta * cert.K > 0.0;
  if (cert.radii_defined) {
    cert.r_minus = (1.0 - std::sqrt(disc)) / (cert.beta * cert.K);
    cert.r_plus = (1.0 + std::sqrt(disc)) / (cert.beta * cert.K);
  } else {
    cert.r_minus = std::numeric_limits<double>::quiet_NaN();
    cert.r_plus = std::numeric_limits<double>::quiet_NaN();
  }
  cert.containment_max = 0.0;
  for (double xn : cert.iterate_xnorm) cert.containment_max = std::max(cert.containment_max, xn);
  cert.containment_ok =
      cert.radii_defined && cert.containment_max <= cert.r_minus * (1.0 + 1e-6);
}

namespace detail {

// F(u)(t) = du + A u + S u + B[u + ext, u + ext] - f evaluated spectrally at
// the sample times with the stored derivative.
inline Trajectory nonlinear_residual_trajectory(const OperatorSet& ops, const Trajectory& u,
                                                const LiftedExtension* ext,
                                                const std::function<StateU(double)>& forcing,
                                                BilinearWorkspace& ws) {
  Trajectory resid;
  resid.times = u.times;
  for (std::size_t i = 0; i < u.states.size(); ++i) {
    const double t = u.times[i];
    StateU r = u.dstates[i];
    axpy(1.0, apply_diffusion(u.states[i]), r);
    axpy(1.0, apply_skew(ops, u.states[i], ws), r);
    if (ext) {
      // the extension contributes d/dt P h and P (skew h) to the band residual
      axpy(1.0, ext->band_derivative_at(t), r);
      axpy(1.0, ext->skew_band_at(t), r);
    }
    if (ops.bilinear_enabled) {
      GridFields g = build_grid_fields(ops, u.states[i], true);
      if (ext) ext->augment(t, g);
      axpy(1.0, apply_bilinear_grids(ops, g, g, ws), r);
    }
    if (forcing) axpy(-1.0, forcing(t), r);
    resid.states.push_back(std::move(r));
  }
  return resid;
}

}  // namespace detail

// Y-norm of the PDE residual and W-norm of the initial mismatch.
inline ResidualNorms residual(const Trajectory& u, const NonlinearProblem& prob,
                              const LiftedExtension* ext = nullptr) {
  if (!u.has_derivatives())
    throw std::invalid_argument("residual: trajectory lacks stored derivatives");
  BilinearWorkspace ws;
  ResidualNorms r;
  Trajectory rt = detail::nonlinear_residual_trajectory(*prob.ops, u, ext, prob.forcing, ws);
  r.y = y_norm(rt);
  StateU mism = u.states.front();
  if (ext == nullptr) axpy(-1.0, prob.initial, mism);  // nonhomogeneous target is u0(0) = 0
  r.w = w_norm(mism);
  return r;
}

struct NewtonResult {
  Trajectory interior;   // the Newton unknown: u for homogeneous, u0 for lifted runs
  Trajectory uz;         // auxiliary linear part (lifted runs)
  Trajectory composed;   // interior + u_Z + P h (equals interior when homogeneous)
  LiftedExtension lifted;
  NkCertificate certificate;
  bool aborted = false;
  std::string diagnostic;
};

inline NewtonResult newton_solve(const NonlinearProblem& prob) {
  const OperatorSet& ops = *prob.ops;
  NewtonResult result;
  NkCertificate& cert = result.certificate;
  cert.tolerance = prob.tolerance;
  BilinearWorkspace ws;

  const bool lifted_run = !prob.boundary.empty();
  std::function<StateU(double)> forcing = prob.forcing;
  StateU target_initial = prob.initial;

  Trajectory uz_traj;
  if (lifted_run) {
    result.lifted = build_lifted_extension(ops, prob.boundary);
    LinearSolution uzsol = solve_uz(ops, result.lifted, prob.initial, prob.dt, prob.horizon,
                                    prob.scheme);
    if (uzsol.aborted) {
      result.aborted = true;
      result.diagnostic = "u_Z solve aborted: " + uzsol.diagnostic;
      return result;
    }
    uz_traj = std::move(uzsol.traj);
    target_initial = zero_state(ops.space);  // the Newton unknown u0 starts at 0
  }
  const LiftedExtension* ext = lifted_run ? &result.lifted : nullptr;

  // data-smallness gate is advisory
  {
    Trajectory ft;
    const int n = std::max(1, static_cast<int>(std::llround(prob.horizon / prob.dt)));
    for (int i = 0; i <= n; ++i) ft.times.push_back(prob.horizon * i / n);
    for (double t : ft.times)
      ft.states.push_back(forcing ? forcing(t) : zero_state(ops.space));
    const double data_norm = y_norm(ft) + w_norm(prob.initial);
    if (prob.smallness_radius > 0.0 && data_norm > prob.smallness_radius)
      cert.warning = "data norm " + std::to_string(data_norm) +
                     " exceeds the configured smallness radius " +
                     std::to_string(prob.smallness_radius) + " (advisory)";
  }

  // the current iterate: u^0 = 0 with stored zero derivatives
  Trajectory iterate;
  {
    const int n = std::max(1, static_cast<int>(std::llround(prob.horizon / prob.dt)));
    const double dt = prob.horizon / n;
    for (int i = 0; i <= n; ++i) {
      iterate.times.push_back(dt * i);
      iterate.states.push_back(zero_state(ops.space));
      iterate.dstates.push_back(zero_state(ops.space));
    }
  }

  // the composition u^k (+ u_Z for lifted runs) drives the frozen coefficient
  const auto frozen_for = [&](const Trajectory& it) {
    FrozenCoefficient fc;
    fc.traj = it;
    if (lifted_run) {
      for (std::size_t i = 0; i < fc.traj.states.size(); ++i)
        axpy(1.0, uz_traj.states[i], fc.traj.states[i]);
      fc.augment = result.lifted.augment_hook();
    }
    fc.traj.dstates.clear();
    return fc;
  };

  const auto residual_of = [&](const Trajectory& it) {
    Trajectory with_uz = it;
    if (lifted_run)
      for (std::size_t i = 0; i < with_uz.states.size(); ++i) {
        axpy(1.0, uz_traj.states[i], with_uz.states[i]);
        axpy(1.0, uz_traj.dstates[i], with_uz.dstates[i]);
      }
    ResidualNorms rn;
    Trajectory rt = detail::nonlinear_residual_trajectory(ops, with_uz, ext, forcing, ws);
    rn.y = y_norm(rt);
    StateU mism = it.states.front();
    axpy(-1.0, target_initial, mism);
    rn.w = w_norm(mism);
    return std::make_pair(rn, std::move(rt));
  };

  auto [rn, resid_traj] = residual_of(iterate);
  cert.residual_y.push_back(rn.y);
  cert.residual_w.push_back(rn.w);
  cert.iterate_xnorm.push_back(0.0);

  int growth_streak = 0;
  bool first_step_recorded = false;
  for (int k = 0; k < prob.max_iterations && rn.total() > prob.tolerance; ++k) {
    LinearProblem lp;
    lp.ops = &ops;
    lp.u_star = frozen_for(iterate);
    lp.horizon = prob.horizon;
    lp.dt = prob.dt;
    lp.scheme = prob.scheme;
    const Trajectory* rt = &resid_traj;
    lp.forcing = [rt](double t) {
      StateU f = interpolate(*rt, t);
      scale(f, -1.0);
      return f;
    };
    lp.initial = target_initial;
    axpy(-1.0, iterate.states.front(), lp.initial);

    LinearSolution step = solve_linear(lp, 0.0);
    if (step.aborted) {
      result.aborted = true;
      result.diagnostic = "Newton step " + std::to_string(k) + " aborted: " + step.diagnostic;
      break;
    }
    if (!first_step_recorded) {
      cert.eta = x_norm(step.traj);
      first_step_recorded = true;
    }
    for (std::size_t i = 0; i < iterate.states.size(); ++i) {
      axpy(1.0, step.traj.states[i], iterate.states[i]);
      axpy(1.0, step.traj.dstates[i], iterate.dstates[i]);
    }
    cert.iterations = k + 1;
    std::tie(rn, resid_traj) = residual_of(iterate);
    cert.residual_y.push_back(rn.y);
    cert.residual_w.push_back(rn.w);
    cert.iterate_xnorm.push_back(x_norm(iterate));

    const std::size_t m = cert.residual_y.size();
    const auto tot = [&](std::size_t i) {
      return std::sqrt(cert.residual_y[i] * cert.residual_y[i] +
                       cert.residual_w[i] * cert.residual_w[i]);
    };
    growth_streak = (m >= 2 && tot(m - 1) > tot(m - 2)) ? growth_streak + 1 : 0;
    if (growth_streak >= 3) {
      result.aborted = true;
      cert.diverged = true;
      result.diagnostic = "divergence: residual grew on three consecutive iterations";
      break;
    }
  }
  cert.converged = !result.aborted && rn.total() <= prob.tolerance;

  // certificate constants (all empirical, deterministic under the seed)
  {
    const double pdt = prob.probe_dt > 0.0 ? prob.probe_dt : prob.dt;
    FrozenCoefficient base;
    if (lifted_run) {
      base.traj = uz_traj;
      base.traj.dstates.clear();
      base.augment = result.lifted.augment_hook();
    }
    AprioriProbe ap = apriori_probe(ops, prob.probe_samples, prob.probe_seed, pdt, prob.horizon,
                                    lifted_run ? &base : nullptr);
    cert.beta = ap.c_g;
    cert.c_t = ap.c_t;
    cert.c_b = bilinear_constant_probe(ops, ops.space->sigma, 100, prob.probe_seed + 1);
    complete_certificate(cert);
  }

  result.interior = std::move(iterate);
  if (lifted_run) {
    result.uz = std::move(uz_traj);
    Trajectory sum = result.interior;
    for (std::size_t i = 0; i < sum.states.size(); ++i) {
      axpy(1.0, result.uz.states[i], sum.states[i]);
      axpy(1.0, result.uz.dstates[i], sum.dstates[i]);
    }
    result.composed = compose_nonhomogeneous(sum, result.lifted);
  } else {
    result.composed = result.interior;
  }
  return result;
}

inline std::string certificate_report(const NkCertificate& cert) {
  std::ostringstream os;
  os.setf(std::ios::scientific);
  os.precision(12);
  os << "newton-kantorovich certificate\n";
  os << "beta: " << cert.beta << "  (empirical: a priori probe)\n";
  os << "C_B: " << cert.c_b << "  (empirical: bilinear estimate probe)\n";
  os << "C_T: " << cert.c_t << "  (empirical: trajectory embedding probe)\n";
  os << "K: " << cert.K << "  (= 2 C_B C_T)\n";
  os << "eta: " << cert.eta << "  (norm of the first Newton step)\n";
  os << "condition: " << cert.condition << "  (beta K eta, PASS requires <= 0.5)\n";
  os << "verdict: " << (cert.condition_pass ? "PASS" : "FAIL") << "\n";
  if (cert.radii_defined) {
    os << "r_minus: " << cert.r_minus << "\n";
    os << "r_plus: " << cert.r_plus << "\n";
  } else {
    os << "r_minus: undefined (negative discriminant)\n";
    os << "r_plus: undefined (negative discriminant)\n";
  }
  os << "containment: max iterate distance " << cert.containment_max
     << (cert.containment_ok ? " within r_minus\n"
                             : (cert.radii_defined ? " OUTSIDE r_minus\n" : " (no radius)\n"));
  os << "converged: " << (cert.converged ? "yes" : "no") << " after " << cert.iterations
     << " iterations at tolerance " << cert.tolerance << "\n";
  os << "iterate_residuals:\n";
  for (std::size_t i = 0; i < cert.residual_y.size(); ++i)
    os << "  k=" << i << " y=" << cert.residual_y[i] << " w=" << cert.residual_w[i] << "\n";
  if (!cert.warning.empty()) os << "warning: " << cert.warning << "\n";
  os << "note: constants are measured on the discrete system, not proven bounds; "
        "the uniqueness statement applies inside the r_plus ball around the start "
        "iterate only.\n";
  return os.str();
}

}  // namespace pvwave
