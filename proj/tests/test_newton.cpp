#include "doctest.h"
#include "pvwave/newton.hpp"

#include <cmath>

using namespace pvwave;

namespace {

OperatorSet make_ops(double alpha, int cutoff = 4, BcFamily fam = BcFamily::DirichletDirichlet,
                     double sigma = 1.0) {
  auto sp = make_state_space(unit_pi_box(2), fam, sigma, 0.3, 0.2, {cutoff, cutoff, 0});
  const double b = alpha == 0.0 ? 0.0 : 1.0;
  return assemble_operators(std::move(sp), alpha, b, b, b);
}

NonlinearProblem small_problem(const OperatorSet& ops, double amplitude, double dt = 5e-3,
                               double T = 0.5) {
  NonlinearProblem prob;
  prob.ops = &ops;
  prob.horizon = T;
  prob.dt = dt;
  prob.initial = random_state(ops.space, 2024, 2.0);
  scale(prob.initial, amplitude / std::max(1e-12, h_norm(prob.initial)));
  StateU fa = random_state(ops.space, 2025, 2.0);
  scale(fa, amplitude / std::max(1e-12, h_norm(fa)));
  const StateU fa_c = fa;
  prob.forcing = [fa_c](double t) {
    StateU f = fa_c;
    scale(f, std::exp(-t));
    return f;
  };
  prob.probe_samples = 6;
  prob.probe_dt = 2e-2;
  return prob;
}

}  // namespace

TEST_CASE("residual of the zero trajectory against pure initial data") {
  auto ops = make_ops(2.0, 3);
  NonlinearProblem prob;
  prob.ops = &ops;
  prob.initial = random_state(ops.space, 5, 1.0);
  prob.horizon = 0.4;
  prob.dt = 1e-2;
  Trajectory zero;
  for (int i = 0; i <= 40; ++i) {
    zero.times.push_back(0.01 * i);
    zero.states.push_back(zero_state(ops.space));
    zero.dstates.push_back(zero_state(ops.space));
  }
  const auto rn = residual(zero, prob);
  CHECK(rn.y == 0.0);
  CHECK(rn.w == doctest::Approx(w_norm(prob.initial)).epsilon(1e-14));
}

TEST_CASE("linear diagnostic mode converges in exactly one iteration") {
  auto ops = make_ops(0.0, 3);  // all bilinear coefficients zero
  auto prob = small_problem(ops, 0.3);
  const auto result = newton_solve(prob);
  REQUIRE_FALSE(result.aborted);
  CHECK(result.certificate.converged);
  CHECK(result.certificate.iterations == 1);
  // residual identity: the stored derivative satisfies the linear equation
  CHECK(result.certificate.residual_y.back() <= 1e-12);
  CHECK(result.certificate.residual_w.back() <= 1e-13);
}

TEST_CASE("certificate radii formulas at the boundary and beyond") {
  NkCertificate cert;
  cert.beta = 2.0;
  cert.c_b = 1.0;
  cert.c_t = 0.5;  // K = 1
  SUBCASE("condition exactly one half: r- = r+ = 1/(beta K)") {
    cert.eta = 0.25;  // beta K eta = 0.5
    complete_certificate(cert);
    CHECK(cert.condition == doctest::Approx(0.5));
    CHECK(cert.condition_pass);
    CHECK(cert.radii_defined);
    CHECK(cert.r_minus == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(cert.r_plus == doctest::Approx(0.5).epsilon(1e-14));
  }
  SUBCASE("condition 0.4 passes with real radii") {
    cert.eta = 0.2;
    complete_certificate(cert);
    CHECK(cert.condition == doctest::Approx(0.4));
    CHECK(cert.condition_pass);
    CHECK(cert.r_minus < cert.r_plus);
    const double disc = std::sqrt(1.0 - 0.8);
    CHECK(cert.r_minus == doctest::Approx((1.0 - disc) / 2.0).epsilon(1e-13));
    CHECK(cert.r_plus == doctest::Approx((1.0 + disc) / 2.0).epsilon(1e-13));
  }
  SUBCASE("condition 0.6 fails with undefined radii") {
    cert.eta = 0.3;
    complete_certificate(cert);
    CHECK_FALSE(cert.condition_pass);
    CHECK_FALSE(cert.radii_defined);
    CHECK(std::isnan(cert.r_minus));
  }
}

TEST_CASE("small-data newton run: quadratic decay, containment, pass verdict") {
  auto ops = make_ops(2.0, 4);
  auto prob = small_problem(ops, 0.05);
  const auto result = newton_solve(prob);
  REQUIRE_FALSE(result.aborted);
  const auto& cert = result.certificate;
  CHECK(cert.converged);
  CHECK(cert.iterations <= 6);
  CHECK(cert.condition_pass);
  CHECK(cert.condition < 0.25);
  CHECK(cert.containment_ok);

  // quadratic regime: consecutive log-residual ratios approximate the order
  std::vector<double> tot;
  for (std::size_t i = 0; i < cert.residual_y.size(); ++i)
    tot.push_back(std::sqrt(cert.residual_y[i] * cert.residual_y[i] +
                            cert.residual_w[i] * cert.residual_w[i]));
  int fits = 0;
  for (std::size_t i = 1; i + 1 < tot.size(); ++i) {
    if (tot[i] < 1e-2 && tot[i] > 1e-11 && tot[i + 1] > 1e-13) {
      const double order = std::log(tot[i + 1]) / std::log(tot[i]);
      CHECK(order > 1.4);
      ++fits;
    }
  }
  CHECK(fits >= 1);
}

TEST_CASE("solution smallness scaling: halving the data roughly halves the solution") {
  auto ops = make_ops(2.0, 3);
  const auto solve_amp = [&](double amp) {
    auto prob = small_problem(ops, amp, 1e-2, 0.4);
    const auto result = newton_solve(prob);
    REQUIRE(result.certificate.converged);
    return x_norm(result.composed);
  };
  const double x1 = solve_amp(0.08);
  const double x2 = solve_amp(0.04);
  const double ratio = x2 / x1;
  CHECK(ratio > 0.45);
  CHECK(ratio <= 0.5 + 1e-6);
}

TEST_CASE("divergence aborts after three growing residuals") {
  auto ops = make_ops(2.0, 4);
  auto prob = small_problem(ops, 40.0, 1e-2, 0.5);  // far beyond the contraction regime
  prob.max_iterations = 12;
  const auto result = newton_solve(prob);
  CHECK(result.aborted);
  CHECK((result.certificate.diverged || !result.diagnostic.empty()));
}

TEST_CASE("advisory smallness gate records a warning without refusing") {
  auto ops = make_ops(2.0, 3);
  auto prob = small_problem(ops, 0.05);
  prob.smallness_radius = 1e-6;
  const auto result = newton_solve(prob);
  CHECK_FALSE(result.certificate.warning.empty());
  CHECK(result.certificate.converged);
}

TEST_CASE("certificate report is deterministic and carries the verdict") {
  NkCertificate cert;
  cert.beta = 1.5;
  cert.c_b = 0.4;
  cert.c_t = 0.9;
  cert.eta = 0.05;
  cert.residual_y = {1e-1, 1e-3, 1e-7};
  cert.residual_w = {1e-2, 0.0, 0.0};
  cert.iterate_xnorm = {0.0, 0.04, 0.05};
  cert.converged = true;
  cert.iterations = 2;
  complete_certificate(cert);
  const std::string a = certificate_report(cert);
  const std::string b = certificate_report(cert);
  CHECK(a == b);
  CHECK(a.find("PASS") != std::string::npos);
  CHECK(a.find("r_plus") != std::string::npos);
  CHECK(a.find("empirical") != std::string::npos);
}

TEST_CASE("nonhomogeneous run composes interior, auxiliary, and extension parts") {
  auto ops = make_ops(2.0, 4);
  NonlinearProblem prob;
  prob.ops = &ops;
  prob.horizon = 0.4;
  prob.dt = 1e-2;
  prob.initial = zero_state(ops.space);
  FaceModeData fm;
  fm.axis = 1;
  fm.side = 0;
  fm.component = 0;
  fm.ktan = {1, 0, 0};
  fm.envelope = {0.02, -1.0, 0.0, 0.0};
  prob.boundary.modes.push_back(fm);
  prob.probe_samples = 4;
  prob.probe_dt = 2e-2;

  const auto result = newton_solve(prob);
  REQUIRE_FALSE(result.aborted);
  CHECK(result.certificate.converged);
  // composed = interior + u_Z + band image of the extension
  for (std::size_t i = 0; i < result.composed.states.size(); ++i) {
    StateU want = result.interior.states[i];
    axpy(1.0, result.uz.states[i], want);
    axpy(1.0, result.lifted.band_at(result.composed.times[i]), want);
    axpy(-1.0, result.composed.states[i], want);
    CHECK(max_abs_coeff(want) <= 1e-15);
  }
  // the W-residual of the interior unknown targets zero initial data
  CHECK(result.certificate.residual_w.back() <= 1e-12);
}
