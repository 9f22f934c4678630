#include "doctest.h"
#include "pvwave/evolution.hpp"

#include <cmath>

using namespace pvwave;

namespace {

OperatorSet make_ops(double zeta, double mu, int cutoff = 4, BcFamily fam = BcFamily::DirichletDirichlet,
                     double sigma = 1.0, double alpha = 2.0) {
  auto sp = make_state_space(unit_pi_box(2), fam, sigma, zeta, mu, {cutoff, cutoff, 0});
  return assemble_operators(std::move(sp), alpha, 1.0, 1.0, 1.0);
}

Trajectory restrict_to_coarse(const Trajectory& fine, int stride) {
  Trajectory out;
  for (std::size_t i = 0; i < fine.times.size(); i += static_cast<std::size_t>(stride)) {
    out.times.push_back(fine.times[i]);
    out.states.push_back(fine.states[i]);
    out.dstates.push_back(fine.dstates[i]);
  }
  return out;
}

}  // namespace

TEST_CASE("scalar decay: single mode matches e^{-t} to scheme accuracy") {
  auto ops = make_ops(0.5, 0.5);  // lowest pressure multiplier = 1
  LinearProblem lp;
  lp.ops = &ops;
  lp.include_skew = false;
  lp.initial = zero_state(ops.space);
  lp.initial.p().coeffs[0] = 1.0;
  lp.horizon = 1.0;
  lp.dt = 1e-3;
  const auto sol = solve_linear(lp, 0.0);
  REQUIRE_FALSE(sol.aborted);
  CHECK(std::abs(sol.traj.states.back().p().coeffs[0] - std::exp(-1.0)) <= 1e-5);
  // stored derivative satisfies the equation at the final sample
  CHECK(sol.traj.dstates.back().p().coeffs[0] ==
        doctest::Approx(-sol.traj.states.back().p().coeffs[0]).epsilon(1e-12));
}

TEST_CASE("skew-only dynamics conserve the discrete energy at second order") {
  auto ops = make_ops(1.0, 1.0, 3);
  const auto drift = [&](double dt) {
    LinearProblem lp;
    lp.ops = &ops;
    lp.include_diffusion = false;
    lp.initial = random_state(ops.space, 4, 1.0);
    lp.horizon = 1.0;
    lp.dt = dt;
    const auto sol = solve_linear(lp, 0.0);
    REQUIRE_FALSE(sol.aborted);
    return std::abs(inner(sol.traj.states.back(), sol.traj.states.back()) -
                    inner(sol.traj.states.front(), sol.traj.states.front()));
  };
  const double d1 = drift(2e-3);
  const double d2 = drift(1e-3);
  CHECK(d1 < 1e-4);
  CHECK(d1 / d2 > 3.0);  // at least second-order decay of the drift
}

TEST_CASE("self-convergence at order two under dt halving") {
  auto ops = make_ops(0.3, 0.2, 4);
  // frozen coefficient: small constant-in-time state
  FrozenCoefficient frozen;
  frozen.traj.times = {0.0, 1.0};
  StateU star = random_state(ops.space, 9, 2.0);
  scale(star, 0.05 / std::max(1e-12, h_norm(star)));
  frozen.traj.states = {star, star};

  StateU g = random_state(ops.space, 10, 1.5);
  scale(g, 0.1 / h_norm(g));
  const StateU fa = random_state(ops.space, 11, 1.5);

  const auto run = [&](double dt) {
    LinearProblem lp;
    lp.ops = &ops;
    lp.u_star = frozen;
    lp.initial = g;
    lp.horizon = 1.0;
    lp.dt = dt;
    const StateU fa_c = fa;
    lp.forcing = [fa_c](double t) {
      StateU f = fa_c;
      scale(f, 0.1 * std::cos(2.0 * t));
      return f;
    };
    const auto sol = solve_linear(lp, 0.0);
    REQUIRE_FALSE(sol.aborted);
    return sol.traj;
  };

  const Trajectory u1 = run(1e-2);
  const Trajectory u2 = run(5e-3);
  const Trajectory u3 = run(2.5e-3);
  const double d12 = x_norm_difference(u1, restrict_to_coarse(u2, 2));
  const double d23 = x_norm_difference(u2, restrict_to_coarse(u3, 2));
  CHECK(d12 / d23 > 3.0);
  CHECK(d12 / d23 < 5.5);
}

TEST_CASE("linearity of the linear solve") {
  auto ops = make_ops(0.4, 0.3, 3);
  StateU g1 = random_state(ops.space, 21, 1.0);
  StateU g2 = random_state(ops.space, 22, 1.0);
  const StateU f1 = random_state(ops.space, 23, 1.0);
  const StateU f2 = random_state(ops.space, 24, 1.0);

  const auto run = [&](const StateU& g, const StateU& fa, double wa, const StateU& fb, double wb) {
    LinearProblem lp;
    lp.ops = &ops;
    lp.initial = g;
    lp.horizon = 0.5;
    lp.dt = 1e-2;
    const StateU fac = fa, fbc = fb;
    lp.forcing = [fac, wa, fbc, wb](double t) {
      StateU f = fac;
      scale(f, wa * std::exp(-t));
      StateU f2s = fbc;
      scale(f2s, wb * std::exp(-t));
      axpy(1.0, f2s, f);
      return f;
    };
    return solve_linear(lp, 0.0).traj;
  };

  const double a = 2.0, b = -0.5;
  Trajectory ua = run(g1, f1, 1.0, f2, 0.0);
  Trajectory ub = run(g2, f1, 0.0, f2, 1.0);
  StateU gc = g1;
  scale(gc, a);
  axpy(b, g2, gc);
  Trajectory uc = run(gc, f1, a, f2, b);
  double dev = 0.0;
  for (std::size_t i = 0; i < uc.states.size(); ++i) {
    StateU combo = ua.states[i];
    scale(combo, a);
    axpy(b, ub.states[i], combo);
    axpy(-1.0, uc.states[i], combo);
    dev = std::max(dev, max_abs_coeff(combo));
  }
  CHECK(dev <= 1e-10);
}

TEST_CASE("energy report: zero data, analytic single-mode value, quadratic homogeneity") {
  auto ops = make_ops(0.5, 0.5, 3);

  SUBCASE("zero data gives zero energies") {
    LinearProblem lp;
    lp.ops = &ops;
    lp.initial = zero_state(ops.space);
    lp.horizon = 0.5;
    lp.dt = 1e-2;
    const auto sol = solve_linear(lp, 1.0);
    CHECK(sol.energy.energy.back() == 0.0);
    CHECK(sol.energy.energy_frac.back() == 0.0);
  }

  SUBCASE("pure decay single mode: E = 1 + (1 - e^{-2T})/2 at T = 5") {
    LinearProblem lp;
    lp.ops = &ops;
    lp.include_skew = false;
    lp.initial = zero_state(ops.space);
    lp.initial.p().coeffs[0] = 1.0;
    lp.horizon = 5.0;
    lp.dt = 1e-3;
    const auto sol = solve_linear(lp, 1.0);
    const double want = 1.0 + 0.5 * (1.0 - std::exp(-2.0 * 5.0));
    CHECK(sol.energy.energy.back() == doctest::Approx(want).epsilon(1e-5));
  }

  SUBCASE("scaling data by two multiplies both energies by four exactly") {
    StateU g = random_state(ops.space, 31, 1.0);
    const StateU fa = random_state(ops.space, 32, 1.0);
    const auto run = [&](double scale_factor) {
      LinearProblem lp;
      lp.ops = &ops;
      lp.initial = g;
      scale(lp.initial, scale_factor);
      lp.horizon = 0.5;
      lp.dt = 1e-2;
      const StateU fac = fa;
      lp.forcing = [fac, scale_factor](double t) {
        StateU f = fac;
        scale(f, scale_factor * std::cos(t));
        return f;
      };
      return solve_linear(lp, 1.0);
    };
    const auto s1 = run(1.0);
    const auto s2 = run(2.0);
    CHECK(s2.energy.energy.back() ==
          doctest::Approx(4.0 * s1.energy.energy.back()).epsilon(1e-10));
    CHECK(s2.energy.energy_frac.back() ==
          doctest::Approx(4.0 * s1.energy.energy_frac.back()).epsilon(1e-10));
  }
}

TEST_CASE("a priori probe: diagonal closed form, determinism, cutoff stability") {
  SUBCASE("skew-off probe dominates the closed-form diagonal ratio") {
    auto ops = make_ops(0.5, 0.5, 3);
    // g = lowest mode, f = 0, diffusion only: ||u||_X / ||g||_W equals
    // sqrt(1 - e^{-2 lambda T}) for unit multiplier
    const double T = 1.0;
    const auto probe = apriori_probe(ops, 4, 5, 1e-3, T, nullptr, false);
    const double closed = std::sqrt(1.0 - std::exp(-2.0 * T));
    CHECK(probe.c_g >= closed * (1.0 - 1e-3));
  }

  SUBCASE("deterministic under the seed") {
    auto ops = make_ops(0.3, 0.2, 3);
    const auto a = apriori_probe(ops, 6, 11, 1e-2, 0.5);
    const auto b = apriori_probe(ops, 6, 11, 1e-2, 0.5);
    CHECK(a.c_g == b.c_g);
    CHECK(a.c_t == b.c_t);
  }

  SUBCASE("stable within 15 percent under cutoff doubling") {
    auto ops4 = make_ops(0.3, 0.2, 4);
    auto ops8 = make_ops(0.3, 0.2, 8);
    const auto p4 = apriori_probe(ops4, 12, 7, 5e-3, 0.5);
    const auto p8 = apriori_probe(ops8, 12, 7, 5e-3, 0.5);
    CHECK(std::abs(p8.c_g - p4.c_g) / p4.c_g < 0.15);
  }
}

TEST_CASE("galerkin consistency: truncation error decays spectrally for analytic data") {
  const double rho = 0.4;
  const auto solve_at = [&](int cutoff) {
    auto ops = make_ops(0.3, 0.2, cutoff);
    LinearProblem lp;
    lp.ops = &ops;
    lp.initial = zero_state(ops.space);
    for (int c = 0; c < ops.space->components(); ++c) {
      const Basis& b = ops.space->bases[static_cast<std::size_t>(c)];
      for (int i = 0; i < b.size(); ++i) {
        const auto& k = b.modes[static_cast<std::size_t>(i)].k;
        lp.initial.comp[static_cast<std::size_t>(c)].coeffs[static_cast<std::size_t>(i)] =
            std::pow(rho, k[0] + k[1]);
      }
    }
    lp.horizon = 0.5;
    lp.dt = 5e-3;
    return std::make_pair(solve_linear(lp, 0.0).traj, ops.space);
  };
  const auto shared_dev = [](const std::pair<Trajectory, std::shared_ptr<const StateSpace>>& coarse,
                             const std::pair<Trajectory, std::shared_ptr<const StateSpace>>& fine) {
    double dev = 0.0;
    for (int c = 0; c < coarse.second->components(); ++c) {
      const Basis& bc = coarse.second->bases[static_cast<std::size_t>(c)];
      const Basis& bf = fine.second->bases[static_cast<std::size_t>(c)];
      for (int i = 0; i < bc.size(); ++i) {
        for (int q = 0; q < bf.size(); ++q)
          if (bf.modes[static_cast<std::size_t>(q)].k == bc.modes[static_cast<std::size_t>(i)].k)
            dev = std::max(
                dev, std::abs(coarse.first.states.back()
                                  .comp[static_cast<std::size_t>(c)]
                                  .coeffs[static_cast<std::size_t>(i)] -
                              fine.first.states.back()
                                  .comp[static_cast<std::size_t>(c)]
                                  .coeffs[static_cast<std::size_t>(q)]));
      }
    }
    return dev;
  };
  const auto r4 = solve_at(4);
  const auto r8 = solve_at(8);
  const auto r16 = solve_at(16);
  const double d48 = shared_dev(r4, r8);
  const double d816 = shared_dev(r8, r16);
  CHECK(d48 < 5e-3);
  // the eigenbasis expansion of the evolved solution is boundary-compatible
  // only to finite order, so plain truncation converges algebraically; the
  // manufactured-solution studies carry the super-algebraic claim
  CHECK(d48 / d816 > 2.5);
}

TEST_CASE("instability is detected and aborted with a diagnostic") {
  auto ops = make_ops(1e-6, 1e-6, 6);  // nearly no damping
  LinearProblem lp;
  lp.ops = &ops;
  lp.include_diffusion = false;
  lp.initial = random_state(ops.space, 61);
  scale(lp.initial, 1e3);
  lp.horizon = 50.0;
  lp.dt = 2.0;  // far beyond the explicit stability limit of the skew term
  const auto sol = solve_linear(lp, 0.0);
  CHECK(sol.aborted);
  CHECK(sol.diagnostic.find("blow-up") != std::string::npos);
}

TEST_CASE("u* radius violation is rejected when a radius is configured") {
  auto ops = make_ops(0.3, 0.2, 3);
  LinearProblem lp;
  lp.ops = &ops;
  FrozenCoefficient frozen;
  frozen.traj.times = {0.0, 0.5, 1.0};
  StateU big = random_state(ops.space, 71);
  scale(big, 100.0);
  frozen.traj.states = {big, big, big};
  frozen.traj.dstates = {zero_state(ops.space), zero_state(ops.space), zero_state(ops.space)};
  lp.u_star = frozen;
  lp.u_star_radius = 1e-3;
  lp.initial = zero_state(ops.space);
  CHECK_THROWS(solve_linear(lp, 0.0));
}

TEST_CASE("first-order negative-control scheme converges at order one") {
  auto ops = make_ops(0.5, 0.5, 2);
  const auto run = [&](double dt) {
    LinearProblem lp;
    lp.ops = &ops;
    lp.scheme = TimeScheme::ImexEuler;
    lp.include_skew = false;
    lp.initial = zero_state(ops.space);
    lp.initial.p().coeffs[0] = 1.0;
    lp.horizon = 1.0;
    lp.dt = dt;
    return solve_linear(lp, 0.0).traj.states.back().p().coeffs[0];
  };
  const double e1 = std::abs(run(2e-3) - std::exp(-1.0));
  const double e2 = std::abs(run(1e-3) - std::exp(-1.0));
  CHECK(e1 / e2 > 1.7);
  CHECK(e1 / e2 < 2.4);  // order one, not two
}
