#include "doctest.h"
#include "pvwave/transform.hpp"

#include <cmath>

using namespace pvwave;

TEST_CASE("round trip is the identity on band-limited data") {
  const auto dom = make_box(2, {M_PI, 2.1, 0.0});
  for (const BasisKind kind : {dirichlet_scalar(), neumann_scalar()}) {
    const Basis b = build_basis(dom, kind, {5, 5, 0});
    const CollocationGrid grid = dealiased_grid(dom, {5, 5, 0});
    const TransformPlan plan = make_plan(b, grid);
    std::vector<double> coeffs(static_cast<std::size_t>(b.size()));
    for (std::size_t i = 0; i < coeffs.size(); ++i)
      coeffs[i] = std::sin(1.0 + 2.3 * static_cast<double>(i));
    std::vector<double> values, back;
    inverse_transform(plan, coeffs, values);
    forward_transform(plan, values, back);
    for (std::size_t i = 0; i < coeffs.size(); ++i)
      CHECK(back[i] == doctest::Approx(coeffs[i]).epsilon(1e-12));
  }
}

TEST_CASE("samples of a single mode transform to a unit vector") {
  const auto dom = unit_pi_box(2);
  const Basis b = build_basis(dom, dirichlet_scalar(), {3, 3, 0});
  const CollocationGrid grid = dealiased_grid(dom, {3, 3, 0});
  const TransformPlan plan = make_plan(b, grid);
  std::vector<double> values(static_cast<std::size_t>(grid.size));
  for (int j = 0; j < grid.size; ++j)
    values[static_cast<std::size_t>(j)] = b.eval(b.modes[2], grid.point(j));
  std::vector<double> coeffs;
  forward_transform(plan, values, coeffs);
  for (int i = 0; i < b.size(); ++i)
    CHECK(coeffs[static_cast<std::size_t>(i)] == doctest::Approx(i == 2 ? 1.0 : 0.0).epsilon(1e-12));
}

TEST_CASE("zero samples give zero coefficients") {
  const auto dom = unit_pi_box(2);
  const Basis b = build_basis(dom, neumann_scalar(), {2, 2, 0});
  const CollocationGrid grid = dealiased_grid(dom, {2, 2, 0});
  const TransformPlan plan = make_plan(b, grid);
  std::vector<double> values(static_cast<std::size_t>(grid.size), 0.0);
  std::vector<double> coeffs;
  forward_transform(plan, values, coeffs);
  for (double c : coeffs) CHECK(c == 0.0);
}

TEST_CASE("projection of raw sine data matches the quadrature oracle") {
  // f = sin(x) sin(2y) + 0.5 sin(3x) sin(y): coefficients pi/2 and pi/4 with
  // the L2 normalization, everything else at round-off
  const auto dom = unit_pi_box(2);
  const Basis b = build_basis(dom, dirichlet_scalar(), {4, 4, 0});
  const CollocationGrid grid = dealiased_grid(dom, {4, 4, 0});
  const TransformPlan plan = make_plan(b, grid);
  std::vector<double> values(static_cast<std::size_t>(grid.size));
  for (int j = 0; j < grid.size; ++j) {
    const auto x = grid.point(j);
    values[static_cast<std::size_t>(j)] =
        std::sin(x[0]) * std::sin(2 * x[1]) + 0.5 * std::sin(3 * x[0]) * std::sin(x[1]);
  }
  std::vector<double> coeffs;
  forward_transform(plan, values, coeffs);

  // high-resolution independent quadrature oracle
  const CollocationGrid fine = make_grid(dom, {64, 64, 0});
  for (int i = 0; i < b.size(); ++i) {
    double oracle = 0.0;
    for (int j = 0; j < fine.size; ++j) {
      const auto x = fine.point(j);
      const double f =
          std::sin(x[0]) * std::sin(2 * x[1]) + 0.5 * std::sin(3 * x[0]) * std::sin(x[1]);
      oracle += fine.weight(j) * f * b.eval(b.modes[static_cast<std::size_t>(i)], x);
    }
    CHECK(coeffs[static_cast<std::size_t>(i)] == doctest::Approx(oracle).epsilon(1e-10));
    const auto& k = b.modes[static_cast<std::size_t>(i)].k;
    if (k[0] == 1 && k[1] == 2)
      CHECK(coeffs[static_cast<std::size_t>(i)] == doctest::Approx(M_PI / 2).epsilon(1e-12));
    else if (k[0] == 3 && k[1] == 1)
      CHECK(coeffs[static_cast<std::size_t>(i)] == doctest::Approx(M_PI / 4).epsilon(1e-12));
    else
      CHECK(std::abs(coeffs[static_cast<std::size_t>(i)]) <= 1e-12);
  }
}

TEST_CASE("derivative evaluation on the grid matches closed forms") {
  const auto dom = unit_pi_box(2);
  const Basis b = build_basis(dom, dirichlet_scalar(), {3, 3, 0});
  const CollocationGrid grid = dealiased_grid(dom, {3, 3, 0});
  const TransformPlan plan = make_plan(b, grid);
  std::vector<double> coeffs(static_cast<std::size_t>(b.size()), 0.0);
  // f = normalized mode (2,1); d/dx f = (2/pi) * 2 cos(2x) sin(y)
  int idx = -1;
  for (int i = 0; i < b.size(); ++i)
    if (b.modes[static_cast<std::size_t>(i)].k[0] == 2 && b.modes[static_cast<std::size_t>(i)].k[1] == 1)
      idx = i;
  REQUIRE(idx >= 0);
  coeffs[static_cast<std::size_t>(idx)] = 1.0;
  std::vector<double> dx;
  inverse_transform(plan, coeffs, dx, 0);
  for (int j = 0; j < grid.size; ++j) {
    const auto x = grid.point(j);
    const double want = (2.0 / M_PI) * 2.0 * std::cos(2 * x[0]) * std::sin(x[1]);
    CHECK(dx[static_cast<std::size_t>(j)] == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("size mismatches are rejected") {
  const auto dom = unit_pi_box(2);
  const Basis b = build_basis(dom, dirichlet_scalar(), {3, 3, 0});
  const CollocationGrid grid = dealiased_grid(dom, {3, 3, 0});
  const TransformPlan plan = make_plan(b, grid);
  std::vector<double> bad(static_cast<std::size_t>(b.size()) + 1, 0.0), out;
  CHECK_THROWS(inverse_transform(plan, bad, out));
  std::vector<double> badgrid(static_cast<std::size_t>(grid.size) + 2, 0.0);
  CHECK_THROWS(forward_transform(plan, badgrid, out));
}
