#include <doctest.h>

#include <cmath>

#include "strata/geometry.hpp"
#include "test_helpers.hpp"

using namespace strata;
using namespace strata::test;

namespace {

// Adaptive Simpson arc-length oracle, independent of the quadrature machinery.
double simpson(const Curve& c, double a, double b) {
  auto f = [&](double t) {
    const Point d = c.deriv(t);
    return std::hypot(d.x, d.y);
  };
  const double m = 0.5 * (a + b);
  return (b - a) / 6.0 * (f(a) + 4.0 * f(m) + f(b));
}

double adaptive_arc(const Curve& c, double a, double b, double whole, int depth) {
  const double m = 0.5 * (a + b);
  const double left = simpson(c, a, m), right = simpson(c, m, b);
  if (depth > 40 || std::abs(left + right - whole) < 1e-14) return left + right;
  return adaptive_arc(c, a, m, left, depth + 1) + adaptive_arc(c, m, b, right, depth + 1);
}

double arc_length_oracle(const Curve& c) { return adaptive_arc(c, 0.0, 1.0, simpson(c, 0, 1), 0); }

}  // namespace

TEST_CASE("fourier curve evaluation") {
  FourierCurveSpec s;
  s.period = 1.0;
  SUBCASE("all coefficients zero") {
    s.offset = 0.7;
    CHECK(eval_fourier_curve(s, 0.5).x == doctest::Approx(0.0));
    CHECK(eval_fourier_curve(s, 0.5).y == doctest::Approx(0.7));
  }
  SUBCASE("single sine mode") {
    s.sin_coeffs = {1.0};
    const Point p = eval_fourier_curve(s, 0.25);
    CHECK(p.x == doctest::Approx(-0.25));
    CHECK(p.y == doctest::Approx(1.0 / 60.0));
  }
  SUBCASE("seeded sine series vanishes at t = 0") {
    s.sin_coeffs = sorted_random_coeffs(7, 30);
    CHECK(std::abs(eval_fourier_curve(s, 0.0).y) < 1e-15);
  }
}

TEST_CASE("sorted random coefficients are in [0,1) descending and deterministic") {
  const auto a = sorted_random_coeffs(42, 30);
  const auto b = sorted_random_coeffs(42, 30);
  CHECK(a == b);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i] >= 0.0);
    CHECK(a[i] < 1.0);
    if (i > 0) CHECK(a[i] <= a[i - 1]);
  }
}

TEST_CASE("periodic extension shifts by exactly one period") {
  auto c = seeded_curve(9, true, 0.1);
  for (double t : {0.0, 0.21, 0.77}) {
    const Point p0 = c->eval(t), p1 = c->eval(t + 1.0);
    CHECK(p1.x - p0.x == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(p1.y - p0.y == doctest::Approx(0.0).epsilon(1e-12));
  }
}

TEST_CASE("flat interface discretization") {
  auto di = discretize_interface(flat_curve(0.3), 64);
  CHECK(di.n() == 64);
  for (int k = 0; k < di.n(); ++k) {
    CHECK(di.normals[k](0) == doctest::Approx(0.0));
    CHECK(di.normals[k](1) == doctest::Approx(1.0));
  }
  CHECK(di.arc_length() == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("seeded curve arc length matches the adaptive oracle") {
  // This curve family is steep (slopes ~10); the quadrature floor sits near
  // N = 2048 rather than the few hundred one would need for gentle curves.
  auto c = seeded_curve(101, true, 0.0);
  auto di = discretize_interface(c, 2048);
  CHECK(std::abs(di.arc_length() - arc_length_oracle(*c)) < 1e-10);
}

TEST_CASE("quadrature convergence is fast down to the floor") {
  auto c = seeded_curve(101, true, 0.0);
  const double exact = arc_length_oracle(*c);
  double prev = 1.0;
  bool first = true;
  for (int n : {512, 1024, 2048}) {
    const double err = std::abs(discretize_interface(c, n).arc_length() - exact);
    if (!first && prev > 1e-12) CHECK(err <= std::max(prev / 10.0, 1e-12));
    prev = err;
    first = false;
  }
}

TEST_CASE("normals are orthogonal to the tangent") {
  auto c = seeded_curve(55, false, -0.1);
  auto di = discretize_interface(c, 160);
  for (int k = 0; k < di.n(); ++k) {
    const Point d = c->deriv(di.t[k]);
    CHECK(std::abs(di.normals[k](0) * d.x + di.normals[k](1) * d.y) < 1e-12);
    CHECK(di.normals[k].norm() == doctest::Approx(1.0).epsilon(1e-14));
  }
}

TEST_CASE("dyadic corner refinement halves panels toward the corner") {
  PanelPlan plan;
  plan.corners = {0.5};
  plan.dyadic_levels = 5;
  auto di = discretize_interface(flat_curve(0.0), 64, plan);
  double base = 0.0, smallest = 1e300;
  for (const Panel& p : di.panels) {
    base = std::max(base, p.t1 - p.t0);
    smallest = std::min(smallest, p.t1 - p.t0);
  }
  CHECK(smallest == doctest::Approx(base / 32.0));
}

TEST_CASE("discretization rejects invalid inputs") {
  CHECK_THROWS_AS(discretize_interface(flat_curve(0.0), 15), SpecError);
  CHECK_THROWS_AS(discretize_interface(flat_curve(0.0), 33), SpecError);
  // a self-intersecting figure-eight with the crossing in the parameter interior
  auto f = [](double t) {
    return Point(-0.4 * std::sin(4 * kPi * t), 0.3 * std::cos(2 * kPi * t));
  };
  auto df = [](double t) {
    return Point(-0.4 * 4 * kPi * std::cos(4 * kPi * t), -0.3 * 2 * kPi * std::sin(2 * kPi * t));
  };
  auto c = std::make_shared<FunctionCurve>(f, df);
  CHECK_THROWS_AS(discretize_interface(c, 128), SpecError);
}

TEST_CASE("unit cell layout for two flat interfaces") {
  ProblemSpec spec;
  spec.period = 1.0;
  spec.omega = {1.0, 2.0, 1.0};
  spec.interfaces = {flat_curve(0.25), flat_curve(-0.25)};
  spec.n_points = {64, 64};
  Geometry geo = build_geometry(spec);
  CHECK(geo.cell.wall.size() == 3);
  CHECK(geo.cell.proxy.size() == 3);
  CHECK(geo.cell.y_up == doctest::Approx(0.55));
  CHECK(geo.cell.y_down == doctest::Approx(-0.55));
  // middle layer wall segment spans (-0.25, 0.25) on both walls
  CHECK(geo.cell.wall[1].y_lo == doctest::Approx(-0.25));
  CHECK(geo.cell.wall[1].y_hi == doctest::Approx(0.25));
  for (double y : geo.cell.wall[1].y) {
    CHECK(y > -0.25);
    CHECK(y < 0.25);
  }
}

TEST_CASE("stack of interfaces: one proxy circle and wall segment pair per layer") {
  ProblemSpec spec = spec_stack(4, 64);
  Geometry geo = build_geometry(spec);
  CHECK(static_cast<int>(geo.cell.proxy.size()) == 5);
  CHECK(static_cast<int>(geo.cell.wall.size()) == 5);
}

TEST_CASE("proxy circles enclose their layer and adjacent interface segments") {
  ProblemSpec spec = spec_stack(8, 64);
  Geometry geo = build_geometry(spec);
  const int num_layers = spec.num_layers();
  for (int l = 0; l < num_layers; ++l) {
    const ProxyCircle& pc = geo.cell.proxy[l];
    for (int i : {l - 1, l}) {
      if (i < 0 || i >= spec.num_interfaces()) continue;
      for (const Point& p : geo.interfaces[i].pts) CHECK(dist(p, pc.center) < pc.radius);
    }
    CHECK(pc.radius >= 0.8 * spec.period);
  }
}

TEST_CASE("validation rejects intersecting and misordered interfaces") {
  ProblemSpec spec;
  spec.period = 1.0;
  spec.omega = {1.0, 1.0, 1.0};
  spec.interfaces = {flat_curve(-0.25), flat_curve(0.25)};  // wrong order
  spec.n_points = {64, 64};
  CHECK_THROWS_AS(spec.validate(), SpecError);
}
