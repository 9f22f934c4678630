// Independent oracles: a dense Galerkin system assembled by quadrature and
// integrated with an adaptive Dormand-Prince 5(4) scheme, manufactured
// solutions with grid-exact forcing, and convergence-study drivers. The code
// here deliberately re-implements the operator evaluations with its own
// quadrature loops so the production path is checked against a structurally
// different route.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "pvwave/lifting.hpp"
#include "pvwave/newton.hpp"

namespace pvwave {

struct OracleConfig {
  int resolution_multiplier = 4;  // oracle quadrature points per axis ~ mult * (cutoff + 1)
  double tolerance = 1e-10;       // local error control of the reference integrator
  std::uint64_t seed = 99;
};

namespace oracle_detail {

struct StackedIndex {
  std::vector<int> offset;  // per component
  int total = 0;
};

inline StackedIndex stacked_index(const StateSpace& sp) {
  StackedIndex si;
  si.offset.resize(sp.bases.size());
  int acc = 0;
  for (std::size_t c = 0; c < sp.bases.size(); ++c) {
    si.offset[c] = acc;
    acc += sp.bases[c].size();
  }
  si.total = acc;
  return si;
}

inline void state_to_vector(const StateU& u, const StackedIndex& si, std::vector<double>& y) {
  y.assign(static_cast<std::size_t>(si.total), 0.0);
  for (std::size_t c = 0; c < u.comp.size(); ++c)
    for (std::size_t i = 0; i < u.comp[c].coeffs.size(); ++i)
      y[static_cast<std::size_t>(si.offset[c]) + i] = u.comp[c].coeffs[i];
}

inline StateU vector_to_state(std::shared_ptr<const StateSpace> space, const StackedIndex& si,
                              const std::vector<double>& y) {
  StateU u = zero_state(std::move(space));
  for (std::size_t c = 0; c < u.comp.size(); ++c)
    for (std::size_t i = 0; i < u.comp[c].coeffs.size(); ++i)
      u.comp[c].coeffs[i] = y[static_cast<std::size_t>(si.offset[c]) + i];
  return u;
}

}  // namespace oracle_detail

// Dense Galerkin system: diagonal diffusion, quadrature-assembled skew matrix
// and bilinear tensor B[i + n(j + n k)] = <B[phi_j, phi_k], phi_i>.
struct DenseSystem {
  std::shared_ptr<const StateSpace> space;
  oracle_detail::StackedIndex index;
  std::vector<double> diffusion;  // stacked diagonal
  std::vector<double> skew;       // n x n, row-major
  std::vector<double> btensor;    // n^3 when bilinear enabled
  bool has_bilinear = false;
  double alpha = 1.0, beta = 1.0, gamma = 1.0, delta = 1.0;

  int size() const { return index.total; }

  void rhs(double t, const std::vector<double>& y,
           const std::function<StateU(double)>& forcing, std::vector<double>& out) const {
    const int n = index.total;
    out.assign(static_cast<std::size_t>(n), 0.0);
    for (int i = 0; i < n; ++i)
      out[static_cast<std::size_t>(i)] = -diffusion[static_cast<std::size_t>(i)] * y[static_cast<std::size_t>(i)];
    for (int i = 0; i < n; ++i) {
      double acc = 0.0;
      const double* row = skew.data() + static_cast<std::ptrdiff_t>(i) * n;
      for (int j = 0; j < n; ++j) acc += row[j] * y[static_cast<std::size_t>(j)];
      out[static_cast<std::size_t>(i)] -= acc;
    }
    if (has_bilinear) {
      for (int k = 0; k < n; ++k) {
        const double yk = y[static_cast<std::size_t>(k)];
        if (yk == 0.0) continue;
        for (int j = 0; j < n; ++j) {
          const double w = y[static_cast<std::size_t>(j)] * yk;
          if (w == 0.0) continue;
          const double* col = btensor.data() + static_cast<std::ptrdiff_t>(n) * (j + static_cast<std::ptrdiff_t>(n) * k);
          for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] -= w * col[i];
        }
      }
    }
    if (forcing) {
      std::vector<double> f;
      oracle_detail::state_to_vector(forcing(t), index, f);
      for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] += f[static_cast<std::size_t>(i)];
    }
  }
};

// Quadrature assembly on an oracle grid, independent of the closed-form skew
// blocks and of the pseudospectral bilinear path.
inline DenseSystem assemble_dense_system(const OperatorSet& ops, const OracleConfig& cfg,
                                         bool with_bilinear) {
  const StateSpace& sp = *ops.space;
  DenseSystem sys;
  sys.space = ops.space;
  sys.index = oracle_detail::stacked_index(sp);
  sys.alpha = ops.alpha;
  sys.beta = ops.beta;
  sys.gamma = ops.gamma;
  sys.delta = ops.delta;
  sys.has_bilinear = with_bilinear && ops.bilinear_enabled;
  const int n = sys.index.total;

  sys.diffusion.assign(static_cast<std::size_t>(n), 0.0);
  for (std::size_t c = 0; c < sp.bases.size(); ++c)
    for (int i = 0; i < sp.bases[c].size(); ++i)
      sys.diffusion[static_cast<std::size_t>(sys.index.offset[c] + i)] =
          sp.multipliers[c][static_cast<std::size_t>(i)];

  std::array<int, 3> pts{1, 1, 1};
  for (int a = 0; a < sp.domain.dim; ++a)
    pts[static_cast<std::size_t>(a)] =
        std::max(cfg.resolution_multiplier * (sp.cutoff[static_cast<std::size_t>(a)] + 1),
        3 * sp.cutoff[static_cast<std::size_t>(a)]) + 24;
  const CollocationGrid grid = make_grid(sp.domain, pts);
  std::vector<TransformPlan> plans;
  for (const Basis& b : sp.bases) plans.push_back(make_plan(b, grid));

  const int d = sp.domain.dim;
  const std::size_t g = static_cast<std::size_t>(grid.size);

  // per-basis-function grids of values and first derivatives
  const auto unit_grids = [&](int comp, int mode) {
    std::vector<std::vector<double>> out(static_cast<std::size_t>(d) + 1);
    const Basis& b = sp.bases[static_cast<std::size_t>(comp)];
    std::vector<double> coeffs(static_cast<std::size_t>(b.size()), 0.0);
    coeffs[static_cast<std::size_t>(mode)] = 1.0;
    inverse_transform(plans[static_cast<std::size_t>(comp)], coeffs, out[0]);
    for (int a = 0; a < d; ++a)
      inverse_transform(plans[static_cast<std::size_t>(comp)], coeffs,
                        out[static_cast<std::size_t>(a) + 1], a);
    return out;
  };

  // skew: <(div v, grad p) phi_j, phi_i> by quadrature projection
  sys.skew.assign(static_cast<std::size_t>(n) * n, 0.0);
  std::vector<double> proj;
  for (std::size_t c = 0; c < sp.bases.size(); ++c) {
    for (int m = 0; m < sp.bases[c].size(); ++m) {
      const auto ug = unit_grids(static_cast<int>(c), m);
      const int col = sys.index.offset[c] + m;
      if (c == 0) {
        // grad p into the velocity rows
        for (int i = 0; i < d; ++i) {
          forward_transform(plans[static_cast<std::size_t>(i) + 1],
                            ug[static_cast<std::size_t>(i) + 1], proj);
          for (int r = 0; r < static_cast<int>(proj.size()); ++r)
            sys.skew[static_cast<std::size_t>(sys.index.offset[static_cast<std::size_t>(i) + 1] + r) * n +
                     col] = proj[static_cast<std::size_t>(r)];
        }
      } else {
        // d_i v_i into the pressure rows
        const int i = static_cast<int>(c) - 1;
        forward_transform(plans[0], ug[static_cast<std::size_t>(i) + 1], proj);
        for (int r = 0; r < static_cast<int>(proj.size()); ++r)
          sys.skew[static_cast<std::size_t>(r) * n + col] = proj[static_cast<std::size_t>(r)];
      }
    }
  }

  if (!sys.has_bilinear) return sys;

  // bilinear tensor by quadrature: own pointwise combination, then projection;
  // cache unit grids (values + derivatives) for every basis function
  sys.btensor.assign(static_cast<std::size_t>(n) * n * n, 0.0);
  std::vector<std::vector<std::vector<std::vector<double>>>> cache(sp.bases.size());
  for (std::size_t c = 0; c < sp.bases.size(); ++c) {
    cache[c].resize(static_cast<std::size_t>(sp.bases[c].size()));
    for (int m = 0; m < sp.bases[c].size(); ++m) cache[c][static_cast<std::size_t>(m)] = unit_grids(static_cast<int>(c), m);
  }

  std::vector<double> prod(g);
  for (int j = 0; j < n; ++j) {
    // locate component/mode of j
    int cj = 0;
    while (cj + 1 < static_cast<int>(sp.bases.size()) && j >= sys.index.offset[static_cast<std::size_t>(cj) + 1]) ++cj;
    const int mj = j - sys.index.offset[static_cast<std::size_t>(cj)];
    const auto& ugrid = cache[static_cast<std::size_t>(cj)][static_cast<std::size_t>(mj)];
    for (int k = 0; k < n; ++k) {
      int ck = 0;
      while (ck + 1 < static_cast<int>(sp.bases.size()) && k >= sys.index.offset[static_cast<std::size_t>(ck) + 1]) ++ck;
      const int mk = k - sys.index.offset[static_cast<std::size_t>(ck)];
      const auto& zgrid = cache[static_cast<std::size_t>(ck)][static_cast<std::size_t>(mk)];

      // pressure row: alpha q div v + beta w . grad p, u = phi_j carries derivatives
      for (std::size_t x = 0; x < g; ++x) {
        double val = 0.0;
        if (ck == 0) {  // z provides q
          if (cj != 0) {
            const int vi = cj - 1;  // div contribution only from component vi
            val += sys.alpha * zgrid[0][x] * ugrid[static_cast<std::size_t>(vi) + 1][x];
          }
        } else {  // z provides w_{ck-1}
          if (cj == 0) val += sys.beta * zgrid[0][x] * ugrid[static_cast<std::size_t>(ck)][x];
        }
        prod[x] = val;
      }
      forward_transform(plans[0], prod, proj);
      for (int r = 0; r < static_cast<int>(proj.size()); ++r)
        sys.btensor[static_cast<std::size_t>(r) +
                    static_cast<std::size_t>(n) * (static_cast<std::size_t>(j) +
                                                   static_cast<std::size_t>(n) * static_cast<std::size_t>(k))] =
            proj[static_cast<std::size_t>(r)];

      // velocity rows: gamma q d_i p + delta sum_jj w_jj d_i v_jj
      for (int i = 0; i < d; ++i) {
        bool nonzero = false;
        for (std::size_t x = 0; x < g; ++x) {
          double val = 0.0;
          if (ck == 0 && cj == 0)
            val += sys.gamma * zgrid[0][x] * ugrid[static_cast<std::size_t>(i) + 1][x];
          if (ck != 0 && cj != 0 && ck == cj)
            val += sys.delta * zgrid[0][x] * ugrid[static_cast<std::size_t>(i) + 1][x];
          prod[x] = val;
          if (val != 0.0) nonzero = true;
        }
        if (!nonzero) continue;
        forward_transform(plans[static_cast<std::size_t>(i) + 1], prod, proj);
        const int base = sys.index.offset[static_cast<std::size_t>(i) + 1];
        for (int r = 0; r < static_cast<int>(proj.size()); ++r)
          sys.btensor[static_cast<std::size_t>(base + r) +
                      static_cast<std::size_t>(n) * (static_cast<std::size_t>(j) +
                                                     static_cast<std::size_t>(n) * static_cast<std::size_t>(k))] =
              proj[static_cast<std::size_t>(r)];
      }
    }
  }
  return sys;
}

// Dense oracle contraction of the bilinear tensor at (u, z), for cross-checks
// against the pseudospectral path.
inline StateU dense_bilinear_apply(const DenseSystem& sys, const StateU& u, const StateU& z) {
  if (!sys.has_bilinear) throw std::invalid_argument("dense_bilinear_apply: tensor not assembled");
  std::vector<double> yu, yz, out(static_cast<std::size_t>(sys.size()), 0.0);
  oracle_detail::state_to_vector(u, sys.index, yu);
  oracle_detail::state_to_vector(z, sys.index, yz);
  const int n = sys.size();
  for (int k = 0; k < n; ++k) {
    const double zk = yz[static_cast<std::size_t>(k)];
    if (zk == 0.0) continue;
    for (int j = 0; j < n; ++j) {
      const double w = yu[static_cast<std::size_t>(j)] * zk;
      if (w == 0.0) continue;
      const double* col = sys.btensor.data() + static_cast<std::ptrdiff_t>(n) * (j + static_cast<std::ptrdiff_t>(n) * k);
      for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] += w * col[i];
    }
  }
  return oracle_detail::vector_to_state(sys.space, sys.index, out);
}

// Adaptive Dormand-Prince 5(4) reference integration, sampled on `times`.
inline Trajectory dense_galerkin_oracle(const DenseSystem& sys,
                                        const std::function<StateU(double)>& forcing,
                                        const StateU& initial, const std::vector<double>& times,
                                        double tol) {
  static const double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static const double a21 = 1.0 / 5;
  static const double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static const double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static const double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                      a54 = -212.0 / 729;
  static const double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                      a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  static const double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                      b6 = 11.0 / 84;
  static const double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                      e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

  const int n = sys.size();
  std::vector<double> y, k1, k2, k3, k4, k5, k6, k7, ytmp, ynew, yerr;
  oracle_detail::state_to_vector(initial, sys.index, y);

  Trajectory traj;
  traj.times = times;
  traj.states.reserve(times.size());
  traj.dstates.reserve(times.size());

  const auto push_sample = [&](double t) {
    traj.states.push_back(oracle_detail::vector_to_state(sys.space, sys.index, y));
    std::vector<double> dy;
    sys.rhs(t, y, forcing, dy);
    traj.dstates.push_back(oracle_detail::vector_to_state(sys.space, sys.index, dy));
  };

  double t = times.front();
  push_sample(t);
  double h = (times.back() - times.front()) / 100.0;
  sys.rhs(t, y, forcing, k1);

  const auto axpy_v = [n](std::vector<double>& dst, double a, const std::vector<double>& src) {
    for (int i = 0; i < n; ++i) dst[static_cast<std::size_t>(i)] += a * src[static_cast<std::size_t>(i)];
  };

  for (std::size_t s = 1; s < times.size(); ++s) {
    const double tend = times[s];
    while (t < tend - 1e-14) {
      h = std::min(h, tend - t);
      ytmp = y;
      axpy_v(ytmp, h * a21, k1);
      sys.rhs(t + c2 * h, ytmp, forcing, k2);
      ytmp = y;
      axpy_v(ytmp, h * a31, k1);
      axpy_v(ytmp, h * a32, k2);
      sys.rhs(t + c3 * h, ytmp, forcing, k3);
      ytmp = y;
      axpy_v(ytmp, h * a41, k1);
      axpy_v(ytmp, h * a42, k2);
      axpy_v(ytmp, h * a43, k3);
      sys.rhs(t + c4 * h, ytmp, forcing, k4);
      ytmp = y;
      axpy_v(ytmp, h * a51, k1);
      axpy_v(ytmp, h * a52, k2);
      axpy_v(ytmp, h * a53, k3);
      axpy_v(ytmp, h * a54, k4);
      sys.rhs(t + c5 * h, ytmp, forcing, k5);
      ytmp = y;
      axpy_v(ytmp, h * a61, k1);
      axpy_v(ytmp, h * a62, k2);
      axpy_v(ytmp, h * a63, k3);
      axpy_v(ytmp, h * a64, k4);
      axpy_v(ytmp, h * a65, k5);
      sys.rhs(t + h, ytmp, forcing, k6);
      ynew = y;
      axpy_v(ynew, h * b1, k1);
      axpy_v(ynew, h * b3, k3);
      axpy_v(ynew, h * b4, k4);
      axpy_v(ynew, h * b5, k5);
      axpy_v(ynew, h * b6, k6);
      sys.rhs(t + h, ynew, forcing, k7);
      yerr.assign(static_cast<std::size_t>(n), 0.0);
      axpy_v(yerr, h * e1, k1);
      axpy_v(yerr, h * e3, k3);
      axpy_v(yerr, h * e4, k4);
      axpy_v(yerr, h * e5, k5);
      axpy_v(yerr, h * e6, k6);
      axpy_v(yerr, h * e7, k7);
      double err = 0.0;
      for (int i = 0; i < n; ++i) {
        const double sc = tol + tol * std::max(std::abs(y[static_cast<std::size_t>(i)]),
                                               std::abs(ynew[static_cast<std::size_t>(i)]));
        err = std::max(err, std::abs(yerr[static_cast<std::size_t>(i)]) / sc);
      }
      if (err <= 1.0) {
        t += h;
        y.swap(ynew);
        k1.swap(k7);  // FSAL
      }
      const double fac = std::clamp(0.9 * std::pow(std::max(err, 1e-16), -0.2), 0.2, 5.0);
      h = std::max(h * fac, 1e-14);
    }
    t = tend;
    push_sample(t);
    sys.rhs(t, y, forcing, k1);
  }
  return traj;
}

struct Manufactured {
  StateU spatial;           // U0, the in-band interior profile
  Envelope env;             // interior time envelope
  Envelope boundary_env;    // shared envelope of all boundary face modes
  BoundaryData boundary;
  std::function<StateU(double)> forcing;  // in-band forcing of the full equation
  StateU g_band;                          // P u_ms(0)
  StateU h_band_total;                    // sum of P h_fm (zero for homogeneous)
  double residual_check = 0.0;            // construction-time consistency residual

  StateU reference(double t) const {
    StateU u = spatial;
    scale(u, env.value(t));
    axpy(boundary_env.value(t), h_band_total, u);
    return u;
  }
  StateU reference_derivative(double t) const {
    StateU u = spatial;
    scale(u, env.derivative(t));
    axpy(boundary_env.derivative(t), h_band_total, u);
    return u;
  }
  Trajectory reference_trajectory(const std::vector<double>& times) const {
    Trajectory traj;
    traj.times = times;
    for (double t : times) {
      traj.states.push_back(reference(t));
      traj.dstates.push_back(reference_derivative(t));
    }
    return traj;
  }
};

struct ManufacturedOptions {
  bool analytic = false;   // full-band profile with rho^|k| coefficient decay
  double rho = 0.45;
  double amplitude = 0.05;
  bool nonhomogeneous = false;
  double boundary_amplitude = 0.05;
  Envelope env{1.0, -1.0, 0.0, 0.0};
  Envelope boundary_env{1.0, -0.4, 0.0, 0.0};
  OracleConfig oracle;
};

// Separable manufactured solution u_ms = env(t) U0 + env_b(t) h, with the
// forcing assembled through independent quadrature so that u_ms solves the
// discrete system exactly (up to quadrature round-off).
inline Manufactured manufactured_solution(const OperatorSet& ops, const ManufacturedOptions& opt) {
  const StateSpace& sp = *ops.space;
  const int d = sp.domain.dim;
  Manufactured ms;
  ms.env = opt.env;
  ms.boundary_env = opt.boundary_env;
  ms.env.amplitude = 1.0;  // amplitudes live in the states
  ms.boundary_env.amplitude = 1.0;

  // interior profile
  ms.spatial = zero_state(ops.space);
  if (opt.analytic) {
    for (int c = 0; c < sp.components(); ++c) {
      const Basis& b = sp.bases[static_cast<std::size_t>(c)];
      for (int i = 0; i < b.size(); ++i) {
        const auto& k = b.modes[static_cast<std::size_t>(i)].k;
        int ksum = 0;
        for (int a = 0; a < d; ++a) ksum += k[static_cast<std::size_t>(a)];
        ms.spatial.comp[static_cast<std::size_t>(c)].coeffs[static_cast<std::size_t>(i)] =
            opt.amplitude * std::pow(opt.rho, ksum) *
            (c == 0 ? 1.0 : 0.4);  // velocity slightly smaller
      }
    }
  } else {
    // low-mode pattern: lowest pressure mode plus the lowest mode of each
    // velocity component
    ms.spatial.p().coeffs[0] = opt.amplitude;
    for (int i = 0; i < d; ++i) ms.spatial.v(i).coeffs[0] = 0.5 * opt.amplitude;
  }

  LiftedExtension ext;
  if (opt.nonhomogeneous) {
    BoundaryData bd;
    // pressure data on the low face of axis 0 with the first admissible
    // tangential mode; velocity data on axis 1 when the family allows it
    FaceModeData fm;
    fm.axis = 0;
    fm.side = 0;
    fm.component = 0;
    for (int b = 1; b < d; ++b) fm.ktan[static_cast<std::size_t>(b)] = 1;
    fm.envelope = opt.boundary_env;
    fm.envelope.amplitude = opt.boundary_amplitude;
    bd.modes.push_back(fm);
    if (sp.family == BcFamily::DirichletDirichlet || sp.family == BcFamily::NeumannDirichlet) {
      FaceModeData fv;
      fv.axis = d > 1 ? 1 : 0;
      fv.side = 1;
      fv.component = 1;
      for (int b = 0; b < d; ++b) {
        if (b == fv.axis) continue;
        fv.ktan[static_cast<std::size_t>(b)] = 1;
      }
      fv.envelope = opt.boundary_env;
      fv.envelope.amplitude = 0.6 * opt.boundary_amplitude;
      bd.modes.push_back(fv);
    }
    ms.boundary = bd;
    ext = build_lifted_extension(ops, bd);
  }

  ms.h_band_total = zero_state(ops.space);
  for (std::size_t i = 0; i < ext.profiles.size(); ++i)
    axpy(ext.profiles[i].fm.envelope.amplitude, ext.band[i], ms.h_band_total);
  // normalize: all face modes share boundary_env(t) with their amplitudes
  // folded into h_band_total and the grids below.

  // oracle grid for the forcing assembly
  std::array<int, 3> pts{1, 1, 1};
  for (int a = 0; a < d; ++a)
    pts[static_cast<std::size_t>(a)] =
        std::max(opt.oracle.resolution_multiplier * (sp.cutoff[static_cast<std::size_t>(a)] + 1),
        3 * sp.cutoff[static_cast<std::size_t>(a)]) + 24;
  const CollocationGrid grid = make_grid(sp.domain, pts);
  std::vector<TransformPlan> plans;
  for (const Basis& b : sp.bases) plans.push_back(make_plan(b, grid));
  const std::size_t g = static_cast<std::size_t>(grid.size);

  // grids of U0 (values + derivatives) and of h (closed form, amplitudes folded)
  std::vector<std::vector<double>> uval(static_cast<std::size_t>(d) + 1),
      hval(static_cast<std::size_t>(d) + 1);
  std::vector<std::array<std::vector<double>, 3>> uder(static_cast<std::size_t>(d) + 1),
      hder(static_cast<std::size_t>(d) + 1);
  for (int c = 0; c <= d; ++c) {
    inverse_transform(plans[static_cast<std::size_t>(c)],
                      ms.spatial.comp[static_cast<std::size_t>(c)].coeffs,
                      uval[static_cast<std::size_t>(c)]);
    for (int a = 0; a < d; ++a)
      inverse_transform(plans[static_cast<std::size_t>(c)],
                        ms.spatial.comp[static_cast<std::size_t>(c)].coeffs,
                        uder[static_cast<std::size_t>(c)][static_cast<std::size_t>(a)], a);
    hval[static_cast<std::size_t>(c)].assign(g, 0.0);
    for (int a = 0; a < 3; ++a) hder[static_cast<std::size_t>(c)][static_cast<std::size_t>(a)].assign(g, 0.0);
  }
  for (std::size_t e = 0; e < ext.profiles.size(); ++e) {
    const auto& prof = ext.profiles[e];
    const double amp = prof.fm.envelope.amplitude;
    const int c = prof.fm.component;
    for (std::size_t x = 0; x < g; ++x) {
      const auto pt = grid.point(static_cast<int>(x));
      hval[static_cast<std::size_t>(c)][x] += amp * prof.value(pt);
      for (int a = 0; a < d; ++a)
        hder[static_cast<std::size_t>(c)][static_cast<std::size_t>(a)][x] +=
            amp * prof.derivative(pt, a);
    }
  }

  // bilinear pieces via this module's own pointwise combination
  const auto project_bilinear = [&](const std::vector<std::vector<double>>& av,
                                    const std::vector<std::array<std::vector<double>, 3>>& ad,
                                    const std::vector<std::vector<double>>& zv) {
    StateU out = zero_state(ops.space);
    std::vector<double> prod(g), proj;
    for (std::size_t x = 0; x < g; ++x) {
      double divv = 0.0, wgp = 0.0;
      for (int i = 0; i < d; ++i) {
        divv += ad[static_cast<std::size_t>(i) + 1][static_cast<std::size_t>(i)][x];
        wgp += zv[static_cast<std::size_t>(i) + 1][x] * ad[0][static_cast<std::size_t>(i)][x];
      }
      prod[x] = ops.alpha * zv[0][x] * divv + ops.beta * wgp;
    }
    forward_transform(plans[0], prod, proj);
    out.p().coeffs = proj;
    for (int i = 0; i < d; ++i) {
      for (std::size_t x = 0; x < g; ++x) {
        double gv = 0.0;
        for (int jj = 0; jj < d; ++jj)
          gv += zv[static_cast<std::size_t>(jj) + 1][x] *
                ad[static_cast<std::size_t>(jj) + 1][static_cast<std::size_t>(i)][x];
        prod[x] = ops.gamma * zv[0][x] * ad[0][static_cast<std::size_t>(i)][x] + ops.delta * gv;
      }
      forward_transform(plans[static_cast<std::size_t>(i) + 1], prod, proj);
      out.v(i).coeffs = proj;
    }
    return out;
  };

  StateU b_uu = project_bilinear(uval, uder, uval);
  StateU b_uh = project_bilinear(hval, hder, uval);  // derivatives of h, values of U0: B[h, U0]
  StateU b_hu = project_bilinear(uval, uder, hval);  // B[U0, h]
  StateU b_hh = project_bilinear(hval, hder, hval);

  // linear pieces: diffusion multipliers (exact) and the quadrature skew of U0
  StateU lin = apply_diffusion(ms.spatial);
  {
    StateU skew_u = zero_state(ops.space);
    std::vector<double> prod(g), proj;
    for (std::size_t x = 0; x < g; ++x) {
      double divv = 0.0;
      for (int i = 0; i < d; ++i)
        divv += uder[static_cast<std::size_t>(i) + 1][static_cast<std::size_t>(i)][x];
      prod[x] = divv;
    }
    forward_transform(plans[0], prod, proj);
    skew_u.p().coeffs = proj;
    for (int i = 0; i < d; ++i) {
      forward_transform(plans[static_cast<std::size_t>(i) + 1], uder[0][static_cast<std::size_t>(i)],
                        proj);
      skew_u.v(i).coeffs = proj;
    }
    axpy(1.0, skew_u, lin);
  }
  // quadrature skew of h (amplitudes folded): matches env_b * P skew h
  StateU skew_h = zero_state(ops.space);
  {
    std::vector<double> prod(g), proj;
    for (std::size_t x = 0; x < g; ++x) {
      double divv = 0.0;
      for (int i = 0; i < d; ++i)
        divv += hder[static_cast<std::size_t>(i) + 1][static_cast<std::size_t>(i)][x];
      prod[x] = divv;
    }
    forward_transform(plans[0], prod, proj);
    skew_h.p().coeffs = proj;
    for (int i = 0; i < d; ++i) {
      forward_transform(plans[static_cast<std::size_t>(i) + 1], hder[0][static_cast<std::size_t>(i)],
                        proj);
      skew_h.v(i).coeffs = proj;
    }
  }

  const StateU U0 = ms.spatial;
  const StateU hb = ms.h_band_total;
  const Envelope env = ms.env, benv = ms.boundary_env;
  ms.forcing = [U0, hb, lin, skew_h, b_uu, b_uh, b_hu, b_hh, env, benv](double t) {
    const double e = env.value(t), de = env.derivative(t);
    const double eb = benv.value(t), deb = benv.derivative(t);
    StateU f = U0;
    scale(f, de);
    axpy(deb, hb, f);
    axpy(e, lin, f);
    axpy(eb, skew_h, f);
    axpy(e * e, b_uu, f);
    axpy(e * eb, b_uh, f);
    axpy(e * eb, b_hu, f);
    axpy(eb * eb, b_hh, f);
    return f;
  };
  ms.g_band = ms.reference(0.0);

  // construction-time consistency: the in-band residual of the reference at a
  // few sample times through the production operator path
  {
    std::vector<double> ts{0.0, 0.37, 1.0};
    Trajectory ref = ms.reference_trajectory(ts);
    // interior part only (subtract the extension's band image)
    Trajectory interior = ref;
    for (std::size_t i = 0; i < ts.size(); ++i) {
      axpy(-benv.value(ts[i]), hb, interior.states[i]);
      axpy(-benv.derivative(ts[i]), hb, interior.dstates[i]);
    }
    BilinearWorkspace ws;
    Trajectory rt = detail::nonlinear_residual_trajectory(
        ops, interior, opt.nonhomogeneous ? &ext : nullptr, ms.forcing, ws);
    double worst = 0.0;
    for (const auto& s : rt.states) worst = std::max(worst, h_norm(s));
    ms.residual_check = worst;
  }
  return ms;
}

// Mode-matched restriction from a finer space to a coarser one of the same
// family; used to derive coarse-cutoff problems from a full-band reference.
struct SpaceRestriction {
  std::shared_ptr<const StateSpace> from;
  std::shared_ptr<const StateSpace> to;
  std::vector<std::vector<int>> index_map;  // per component: coarse index -> fine index

  StateU apply(const StateU& fine) const {
    StateU out = zero_state(to);
    for (int c = 0; c < out.components(); ++c) {
      const auto& map = index_map[static_cast<std::size_t>(c)];
      for (std::size_t i = 0; i < map.size(); ++i)
        out.comp[static_cast<std::size_t>(c)].coeffs[i] =
            fine.comp[static_cast<std::size_t>(c)].coeffs[static_cast<std::size_t>(map[i])];
    }
    return out;
  }
};

inline SpaceRestriction make_restriction(std::shared_ptr<const StateSpace> from,
                                         std::shared_ptr<const StateSpace> to) {
  if (from->family != to->family || from->domain.dim != to->domain.dim)
    throw std::invalid_argument("make_restriction: incompatible spaces");
  SpaceRestriction r;
  r.from = from;
  r.to = to;
  for (int c = 0; c < to->components(); ++c) {
    const Basis& bf = from->bases[static_cast<std::size_t>(c)];
    const Basis& bt = to->bases[static_cast<std::size_t>(c)];
    std::vector<int> map(static_cast<std::size_t>(bt.size()), -1);
    for (int i = 0; i < bt.size(); ++i) {
      for (int q = 0; q < bf.size(); ++q)
        if (bf.modes[static_cast<std::size_t>(q)].k == bt.modes[static_cast<std::size_t>(i)].k) {
          map[static_cast<std::size_t>(i)] = q;
          break;
        }
      if (map[static_cast<std::size_t>(i)] < 0)
        throw std::invalid_argument("make_restriction: coarse mode missing in the fine space");
    }
    r.index_map.push_back(std::move(map));
  }
  return r;
}

struct RateTable {
  std::vector<double> resolution;  // dt or 1/cutoff
  std::vector<double> error;
  double fitted_rate = 0.0;
  bool monotone = true;

  std::string formatted(const std::string& label) const {
    std::ostringstream os;
    os << "# " << label << "\n";
    os << "level\tresolution\terror\n";
    os.setf(std::ios::scientific);
    os.precision(6);
    for (std::size_t i = 0; i < resolution.size(); ++i)
      os << i << "\t" << resolution[i] << "\t" << error[i] << "\n";
    os << "# fitted rate: " << fitted_rate << (monotone ? "" : "  [non-monotone]") << "\n";
    return os.str();
  }
};

// Least-squares fit of log(error) against log(resolution).
inline RateTable fit_rates(const std::vector<double>& resolution,
                           const std::vector<double>& error) {
  if (resolution.size() != error.size() || resolution.size() < 2)
    throw std::invalid_argument("fit_rates: need matching lists with >= 2 levels");
  RateTable table;
  table.resolution = resolution;
  table.error = error;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(resolution.size());
  for (std::size_t i = 0; i < resolution.size(); ++i) {
    const double x = std::log(resolution[i]);
    const double y = std::log(std::max(error[i], 1e-300));
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    if (i > 0 && error[i] > error[i - 1]) table.monotone = false;
  }
  table.fitted_rate = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  return table;
}

}  // namespace pvwave
