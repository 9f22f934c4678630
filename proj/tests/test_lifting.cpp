#include "doctest.h"
#include "pvwave/lifting.hpp"

#include <cmath>

using namespace pvwave;

namespace {

OperatorSet make_ops(BcFamily fam, double sigma = 1.0, int cutoff = 4, bool bilinear = true) {
  auto sp = make_state_space(unit_pi_box(2), fam, sigma, 0.3, 0.2, {cutoff, cutoff, 0});
  const double a = bilinear ? 2.0 : 0.0;
  const double b = bilinear ? 1.0 : 0.0;
  return assemble_operators(std::move(sp), a, b, b, b);
}

}  // namespace

TEST_CASE("dirichlet lift of sin x on the y=0 face is the sinh profile") {
  auto ops = make_ops(BcFamily::DirichletDirichlet);
  BoundaryData bd;
  FaceModeData fm;
  fm.axis = 1;
  fm.side = 0;
  fm.component = 0;
  fm.ktan = {1, 0, 0};
  fm.envelope = {1.0, 0.0, 0.0, 0.0};
  bd.modes.push_back(fm);
  const auto ext = build_lifted_extension(ops, bd);
  REQUIRE(ext.profiles.size() == 1);

  for (double x : {0.4, 1.3, 2.8}) {
    for (double y : {0.0, 0.2, 1.5, 3.0}) {
      const double want = std::sin(x) * std::sinh(M_PI - y) / std::sinh(M_PI);
      CHECK(ext.profiles[0].value({x, y, 0.0}) == doctest::Approx(want).epsilon(1e-12).scale(1.0));
    }
  }
  const auto diag = lift_diagnostics(ext);
  CHECK(diag.harmonicity_residual <= 1e-10);
  CHECK(diag.trace_error <= 1e-10);
  CHECK(diag.linearity_error <= 1e-12);
}

TEST_CASE("zero boundary data gives a zero extension") {
  auto ops = make_ops(BcFamily::DirichletDirichlet);
  const auto ext = build_lifted_extension(ops, BoundaryData{});
  CHECK(ext.empty());
  CHECK(max_abs_coeff(ext.band_at(0.3)) == 0.0);
}

TEST_CASE("neumann lift of cos x on the y=0 face: cosh profile, outward-normal trace") {
  auto ops = make_ops(BcFamily::NeumannDirichlet, 0.75);
  BoundaryData bd;
  FaceModeData fm;
  fm.axis = 1;
  fm.side = 0;
  fm.component = 0;
  fm.ktan = {1, 0, 0};
  fm.envelope = {1.0, 0.0, 0.0, 0.0};
  bd.modes.push_back(fm);
  const auto ext = build_lifted_extension(ops, bd);

  // h = cos x cosh(pi - y) / sinh(pi); outward normal derivative at y=0 is cos x
  for (double x : {0.3, 1.9}) {
    for (double y : {0.1, 2.2}) {
      const double want = std::cos(x) * std::cosh(M_PI - y) / std::sinh(M_PI);
      CHECK(ext.profiles[0].value({x, y, 0.0}) == doctest::Approx(want).epsilon(1e-12).scale(1.0));
    }
    const double dn = -ext.profiles[0].derivative({x, 0.0, 0.0}, 1);
    CHECK(dn == doctest::Approx(std::cos(x)).epsilon(1e-10).scale(1.0));
  }
  const auto diag = lift_diagnostics(ext);
  CHECK(diag.harmonicity_residual <= 1e-10);
  CHECK(diag.trace_error <= 1e-10);
}

TEST_CASE("face-constant neumann data extends to the zero-mean harmonic polynomial") {
  auto ops = make_ops(BcFamily::NeumannDirichlet, 0.75);
  BoundaryData bd;
  FaceModeData fm;
  fm.axis = 0;
  fm.side = 1;
  fm.component = 0;
  fm.ktan = {0, 0, 0};
  fm.envelope = {0.7, 0.0, 0.0, 0.0};
  bd.modes.push_back(fm);
  const auto ext = build_lifted_extension(ops, bd);
  REQUIRE(ext.profiles.size() == 1);
  CHECK(ext.profiles[0].polynomial);

  const auto diag = lift_diagnostics(ext);
  CHECK(diag.harmonicity_residual <= 1e-12);
  CHECK(diag.trace_error <= 1e-12);
  // the shape itself is mean-free over the box
  double mean = 0.0;
  const int n = 64;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      mean += ext.profiles[0].value({(i + 0.5) * M_PI / n, (j + 0.5) * M_PI / n, 0.0});
  mean /= n * n;
  CHECK(std::abs(mean) <= 1e-3);
}

TEST_CASE("boundary data validation") {
  auto ops3 = assemble_operators(
      make_state_space(unit_pi_box(3), BcFamily::NeumannHodge, 1.0, 0.3, 0.2, {2, 2, 2}), 2.0, 1.0,
      1.0, 1.0);
  BoundaryData bad;
  FaceModeData fm;
  fm.axis = 0;
  fm.side = 0;
  fm.component = 1;  // velocity data under a Hodge family: unsupported
  fm.ktan = {0, 1, 1};
  bad.modes.push_back(fm);
  CHECK_THROWS(build_lifted_extension(ops3, bad));

  auto ops = make_ops(BcFamily::DirichletDirichlet);
  BoundaryData bad2;
  fm.component = 0;
  fm.axis = 1;
  fm.ktan = {0, 0, 0};  // sine tangential axis needs k >= 1
  bad2.modes.push_back(fm);
  CHECK_THROWS(build_lifted_extension(ops, bad2));

  BoundaryData bad3;
  fm.ktan = {9, 0, 0};  // beyond the interior cutoff
  bad3.modes.push_back(fm);
  CHECK_THROWS(build_lifted_extension(ops, bad3));
}

TEST_CASE("solve_uz: static data with matching initial gives u_Z(0) = 0 and no d/dt forcing") {
  auto ops = make_ops(BcFamily::DirichletDirichlet, 1.0, 4, false);
  BoundaryData bd;
  FaceModeData fm;
  fm.axis = 0;
  fm.side = 1;
  fm.component = 0;
  fm.ktan = {0, 2, 0};
  fm.envelope = {0.2, 0.0, 0.0, 0.0};  // static envelope
  bd.modes.push_back(fm);
  const auto ext = build_lifted_extension(ops, bd);
  CHECK(max_abs_coeff(ext.band_derivative_at(0.4)) == 0.0);

  const StateU g = ext.band_at(0.0);
  const auto sol = solve_uz(ops, ext, g, 1e-2, 0.5);
  REQUIRE_FALSE(sol.aborted);
  CHECK(max_abs_coeff(sol.traj.states.front()) == 0.0);
}

TEST_CASE("solve_uz reduces to the plain homogeneous problem for zero boundary data") {
  auto ops = make_ops(BcFamily::DirichletDirichlet, 1.0, 3, false);
  const auto ext = build_lifted_extension(ops, BoundaryData{});
  StateU g = random_state(ops.space, 3, 1.0);
  const auto sol = solve_uz(ops, ext, g, 1e-2, 0.5);

  LinearProblem lp;
  lp.ops = &ops;
  lp.initial = g;
  lp.horizon = 0.5;
  lp.dt = 1e-2;
  const auto plain = solve_linear(lp, 0.0);
  for (std::size_t i = 0; i < sol.traj.states.size(); ++i) {
    StateU d = sol.traj.states[i];
    axpy(-1.0, plain.traj.states[i], d);
    CHECK(max_abs_coeff(d) == 0.0);
  }
}

TEST_CASE("linearity of the lifted solve: doubling the data doubles u_Z exactly") {
  const auto run = [&](double amp) {
    auto ops = make_ops(BcFamily::DirichletDirichlet, 1.0, 4, false);
    BoundaryData bd;
    FaceModeData fm;
    fm.axis = 1;
    fm.side = 0;
    fm.component = 0;
    fm.ktan = {1, 0, 0};
    fm.envelope = {amp, -1.0, 0.0, 0.0};
    bd.modes.push_back(fm);
    const auto ext = build_lifted_extension(ops, bd);
    const auto sol = solve_uz(ops, ext, zero_state(ops.space), 1e-2, 0.5);
    return x_norm(sol.traj);
  };
  const double x1 = run(0.1);
  const double x2 = run(0.2);
  CHECK(x2 == doctest::Approx(2.0 * x1).epsilon(1e-12));
}

TEST_CASE("composed residual: reduction cases and second-order decay in dt") {
  auto ops = make_ops(BcFamily::DirichletDirichlet, 1.0, 4, false);  // linear setting
  BoundaryData bd;
  FaceModeData fm;
  fm.axis = 1;
  fm.side = 0;
  fm.component = 0;
  fm.ktan = {1, 0, 0};
  fm.envelope = {0.1, -0.5, 0.0, 0.0};
  bd.modes.push_back(fm);
  const auto ext = build_lifted_extension(ops, bd);

  const auto residual_at = [&](double dt) {
    const auto sol = solve_uz(ops, ext, ext.band_at(0.0), dt, 0.5);
    return composed_fd_residual(ops, sol.traj, &ext, nullptr);
  };
  const double r1 = residual_at(2e-2);
  const double r2 = residual_at(1e-2);
  CHECK(r1 / r2 > 3.0);
  CHECK(r1 / r2 < 5.5);

  // with zero boundary data the residual equals the homogeneous one
  const auto ext0 = build_lifted_extension(ops, BoundaryData{});
  LinearProblem lp;
  lp.ops = &ops;
  lp.initial = random_state(ops.space, 4, 1.0);
  lp.horizon = 0.5;
  lp.dt = 1e-2;
  const auto plain = solve_linear(lp, 0.0);
  const double ra = composed_fd_residual(ops, plain.traj, &ext0, nullptr);
  const double rb = composed_fd_residual(ops, plain.traj, nullptr, nullptr);
  CHECK(ra == doctest::Approx(rb).epsilon(1e-14));
}

TEST_CASE("compose sums trajectories and the extension band image") {
  auto ops = make_ops(BcFamily::DirichletDirichlet, 1.0, 3, false);
  BoundaryData bd;
  FaceModeData fm;
  fm.axis = 0;
  fm.side = 0;
  fm.component = 0;
  fm.ktan = {0, 1, 0};
  fm.envelope = {0.3, -1.0, 0.0, 0.0};
  bd.modes.push_back(fm);
  const auto ext = build_lifted_extension(ops, bd);
  const auto sol = solve_uz(ops, ext, zero_state(ops.space), 1e-2, 0.3);
  const Trajectory total = compose_nonhomogeneous(sol.traj, ext);
  for (std::size_t i = 0; i < total.states.size(); ++i) {
    StateU want = sol.traj.states[i];
    axpy(1.0, ext.band_at(total.times[i]), want);
    axpy(-1.0, total.states[i], want);
    CHECK(max_abs_coeff(want) == 0.0);
  }
}
