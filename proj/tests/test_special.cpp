#include <doctest.h>

#include <cmath>

#include "strata/special.hpp"

using namespace strata;

namespace {

// Independent series oracle for J0 and Y0 at small argument (test-side only).
double oracle_j0(double z) {
  double term = 1.0, sum = 1.0;
  for (int k = 1; k < 60; ++k) {
    term *= -0.25 * z * z / (static_cast<double>(k) * k);
    sum += term;
  }
  return sum;
}

double oracle_y0(double z) {
  const double gamma = 0.57721566490153286061;
  double term = 1.0, hk = 0.0, sum = 0.0;
  for (int k = 1; k < 60; ++k) {
    term *= -0.25 * z * z / (static_cast<double>(k) * k);
    hk += 1.0 / k;
    sum += -term * hk;
  }
  return 2.0 / kPi * ((std::log(0.5 * z) + gamma) * oracle_j0(z) + sum);
}

}  // namespace

TEST_CASE("bessel values match the independent series oracle") {
  for (double z : {0.1, 0.5, 1.0, 2.0, 3.5}) {
    CHECK(bessel_j0(z) == doctest::Approx(oracle_j0(z)).epsilon(1e-13));
    CHECK(bessel_y0(z) == doctest::Approx(oracle_y0(z)).epsilon(1e-12));
  }
}

TEST_CASE("series parts reproduce Y0 and Y1") {
  for (double z : {0.05, 0.3, 1.0, 2.4, 3.9}) {
    const BesselSeriesParts p = bessel_series_parts(z);
    const double lz = std::log(0.5 * z) + kEulerGamma;
    CHECK(p.j0 == doctest::Approx(bessel_j0(z)).epsilon(1e-13));
    CHECK(p.j1_over_z * z == doctest::Approx(bessel_j1(z)).epsilon(1e-13));
    const double y0 = 2.0 / kPi * (lz * p.j0 + p.s0);
    CHECK(y0 == doctest::Approx(bessel_y0(z)).epsilon(1e-12));
    const double y1 = 2.0 / kPi * (lz * bessel_j1(z) - 1.0 / z - 0.25 * z * p.s1);
    CHECK(y1 == doctest::Approx(bessel_y1(z)).epsilon(1e-12));
  }
}

TEST_CASE("green's function value at omega = r = 1") {
  const Cplx g = helmholtz_green(1.0, {0.0, 0.0}, {1.0, 0.0});
  // (i/4) H0(1) = -Y0(1)/4 + i J0(1)/4
  CHECK(std::abs(g - Cplx(-0.0220642, 0.1912991)) < 1e-6);
  CHECK(g.real() == doctest::Approx(-oracle_y0(1.0) / 4.0).epsilon(1e-12));
  CHECK(g.imag() == doctest::Approx(oracle_j0(1.0) / 4.0).epsilon(1e-12));
}

TEST_CASE("green's function is symmetric and errors on coincident points") {
  const Point a{0.3, -0.2}, b{-1.1, 0.7};
  CHECK(std::abs(helmholtz_green(3.0, a, b) - helmholtz_green(3.0, b, a)) < 1e-15);
  CHECK_THROWS_AS(helmholtz_green(1.0, a, a), NumericalError);
}

TEST_CASE("large-argument magnitude follows the hankel asymptotic") {
  // omega = 10, r = 5: |(i/4) H0(50)| ~ sqrt(2/(pi*50))/4 within 1%.
  const Cplx g = helmholtz_green(10.0, {0.0, 0.0}, {5.0, 0.0});
  const double expected = std::sqrt(2.0 / (kPi * 50.0)) / 4.0;
  CHECK(std::abs(g) == doctest::Approx(expected).epsilon(0.01));
}

TEST_CASE("green's function satisfies helmholtz away from the source") {
  // 5-point Laplacian residual decays at second order in the grid spacing.
  const double omega = 2.0;
  const Point src{0.0, 0.0};
  auto u = [&](double x, double y) { return helmholtz_green(omega, {x, y}, src); };
  const double x0 = 0.8, y0 = 0.4;
  auto residual = [&](double h) {
    const Cplx lap = (u(x0 + h, y0) + u(x0 - h, y0) + u(x0, y0 + h) + u(x0, y0 - h) -
                      4.0 * u(x0, y0)) /
                     (h * h);
    return std::abs(lap + omega * omega * u(x0, y0));
  };
  const double r1 = residual(1e-2), r2 = residual(5e-3);
  CHECK(r2 < r1 / 3.0);
  CHECK(r1 < 1e-2);
}
