#include <doctest.h>

#include <cmath>

#include "strata/kernels.hpp"
#include "test_helpers.hpp"

using namespace strata;
using namespace strata::test;

TEST_CASE("rayleigh-bloch wavenumbers and branch") {
  const auto b = make_rb_basis(0.0, 10.0, 1.0, 20, 0.0, RbDirection::Up);
  for (int i = 0; i < b.size(); ++i) {
    const Cplx kn = b.k_n[i];
    // k_n^2 + kappa_n^2 = omega^2 to roundoff
    const Cplx lhs = kn * kn + b.kappa_n[i] * b.kappa_n[i];
    CHECK(std::abs(lhs - 100.0) < 1e-10);
    if (b.kappa_n[i] * b.kappa_n[i] < 100.0) {
      CHECK(kn.real() > 0.0);
      CHECK(kn.imag() == 0.0);
    } else {
      CHECK(kn.real() == 0.0);
      CHECK(kn.imag() > 0.0);
    }
  }
  // n = 2: k_2 = i sqrt((4 pi)^2 - 100)
  const int idx = 20 + 2;
  CHECK(b.kappa_n[idx] == doctest::Approx(4.0 * kPi));
  CHECK(b.k_n[idx].imag() == doctest::Approx(std::sqrt(16.0 * kPi * kPi - 100.0)).epsilon(1e-12));
  CHECK(std::abs(b.k_n[idx] - Cplx(0.0, 7.6132)) < 1e-2);
}

TEST_CASE("rayleigh-bloch block entries") {
  const auto b = make_rb_basis(0.0, 10.0, 1.0, 4, 2.0, RbDirection::Up);
  const CMat w = rayleigh_bloch_block(b, {0.0, 0.25}, true);
  CHECK(w.rows() == 4);
  CHECK(w.cols() == 9);
  // n = 0 column at x = 0: value 1, derivative i k_0
  CHECK(std::abs(w(0, 4) - 1.0) < 1e-14);
  CHECK(std::abs(w(2, 4) - kI * b.k_n[4]) < 1e-14);
  // derivative rows are i k_n times value rows
  for (int j = 0; j < 9; ++j)
    for (int i = 0; i < 2; ++i) CHECK(std::abs(w(2 + i, j) - kI * b.k_n[j] * w(i, j)) < 1e-13);
}

TEST_CASE("rayleigh-bloch modes are quasi-periodic") {
  const double kappa0 = 1.3;
  const auto b = make_rb_basis(kappa0, 7.0, 1.0, 6, 0.5, RbDirection::Down);
  const Cplx alpha = std::exp(kI * kappa0 * 1.0);
  for (int i = 0; i < b.size(); ++i) {
    const Cplx v0 = b.mode(i, {0.2, -0.3}), v1 = b.mode(i, {1.2, -0.3});
    CHECK(std::abs(v1 - alpha * v0) < 1e-13);
  }
}

TEST_CASE("wood anomaly orders are flagged, not fatal") {
  // omega = 2 pi, d = 1, kappa0 = 0: orders n = +-1 have k_n = 0
  const auto b = make_rb_basis(0.0, 2.0 * kPi, 1.0, 3, 0.0, RbDirection::Up);
  CHECK(b.wood_flag[3 + 1]);
  CHECK(b.wood_flag[3 - 1]);
  CHECK(!b.wood_flag[3]);
}

TEST_CASE("incident wave basics") {
  const IncidentWave w = make_incident(-kPi / 2, 2.0, 1.0);
  CHECK(std::abs(w.value({0.0, 0.0}) - 1.0) < 1e-15);
  CHECK(w.kappa == doctest::Approx(0.0));
  CHECK(w.k_inc == doctest::Approx(2.0));
  CHECK(std::abs(w.alpha - 1.0) < 1e-14);
  // normal incidence on a flat interface: d u/d nu = -i omega at y = 0
  CHECK(std::abs(w.grad_dot(Vec2(0, 1), {0.3, 0.0}) - Cplx(0, -2.0)) < 1e-14);
  // |u| = 1 everywhere for real angles
  const IncidentWave w2 = make_incident(-0.3 * kPi, 5.0, 1.0);
  CHECK(std::abs(std::abs(w2.value({0.4, 1.7})) - 1.0) < 1e-14);
  CHECK(std::abs(w2.kappa * w2.kappa + w2.k_inc * w2.k_inc - 25.0) < 1e-12);
  CHECK_THROWS_AS(make_incident(0.5, 1.0, 1.0), SpecError);
}

TEST_CASE("incident trace on the top interface") {
  auto di = discretize_interface(flat_curve(0.0), 64);
  const IncidentWave w = make_incident(-kPi / 2, 3.0, 1.0);
  CVec vals, derivs;
  incident_trace(w, di, vals, derivs);
  for (int k = 0; k < di.n(); ++k) {
    CHECK(std::abs(std::abs(vals[k]) - 1.0) < 1e-14);
    CHECK(std::abs(derivs[k] - Cplx(0, -3.0) * vals[k]) < 1e-13);
  }
}

TEST_CASE("bloch phase canonicalization") {
  const auto b1 = bloch_phase(-kPi / 2, 10.0, 1.0);
  CHECK(std::abs(b1.alpha - 1.0) < 1e-14);
  CHECK(b1.kappa0 == doctest::Approx(0.0));
  CHECK(b1.order_shift == 0);

  // kappa = 2 pi: full period shift, alpha = 1, kappa0 = 0, m = 1
  const double theta = std::acos(2.0 * kPi / 10.0) * -1.0;
  const auto b2 = bloch_phase(theta, 10.0, 1.0);
  CHECK(std::abs(b2.alpha - 1.0) < 1e-12);
  CHECK(std::abs(b2.kappa0) < 1e-12);
  CHECK(b2.order_shift == 1);

  // two angles with equal alpha share kappa0 and differ in m
  const double theta_a = -0.4, theta_b = -std::acos(std::cos(-0.4) - 2.0 * kPi / 7.0);
  const auto pa = bloch_phase(theta_a, 7.0, 1.0);
  const auto pb = bloch_phase(theta_b, 7.0, 1.0);
  CHECK(std::abs(pa.alpha - pb.alpha) < 1e-12);
  CHECK(pa.kappa0 == doctest::Approx(pb.kappa0).epsilon(1e-12));
  CHECK(pa.order_shift == pb.order_shift + 1);
}

TEST_CASE("transmission kernel equals the plain difference away from the singularity") {
  const HelmholtzKernel ka(3.0), kb(5.5);
  const TransmissionKernel diff(3.0, 5.5);
  const Point x{0.3, 0.4}, y{-0.2, 0.15};
  const Vec2 dir = Vec2(0.6, 0.8), ny = Vec2(-0.28, 0.96);
  const KernelBlock2 a = ka.eval(x, dir, y, ny), b = kb.eval(x, dir, y, ny);
  const KernelBlock2 d = diff.eval(x, dir, y, ny);
  CHECK(std::abs(d.s - (a.s - b.s)) < 1e-12);
  CHECK(std::abs(d.d - (a.d - b.d)) < 1e-12);
  CHECK(std::abs(d.sp - (a.sp - b.sp)) < 1e-12);
  CHECK(std::abs(d.dp - (a.dp - b.dp)) < 1e-11);
}

TEST_CASE("series and direct evaluation agree around the switch argument") {
  const HelmholtzKernel ka(8.0), kb(11.0);
  const TransmissionKernel diff(8.0, 11.0);
  const Vec2 dir = Vec2(0.0, 1.0), ny = Vec2(0.1, 0.99498743710662).normalized();
  // max(z) crosses the series switch (z = 4) near r = 4/11.
  for (double r : {0.30, 0.36, 0.37, 0.45}) {
    const Point x{0, 0}, y{r, 0};
    const KernelBlock2 a = ka.eval(x, dir, y, ny), b = kb.eval(x, dir, y, ny);
    const KernelBlock2 d = diff.eval(x, dir, y, ny);
    CHECK(std::abs(d.s - (a.s - b.s)) < 1e-12);
    CHECK(std::abs(d.d - (a.d - b.d)) < 1e-12);
    CHECK(std::abs(d.dp - (a.dp - b.dp)) < 1e-9);
  }
}

TEST_CASE("transmission kernel stays bounded near the diagonal") {
  // The 1/r^2 and 1/r parts cancel between the two wavenumbers; what is left
  // grows at most logarithmically.
  const TransmissionKernel diff(10.0, 14.142135623730951);
  const Vec2 ny = Vec2(0.0, 1.0);
  for (double r : {1e-4, 1e-7, 1e-10}) {
    const KernelBlock2 d = diff.eval({r, 1e-12}, Vec2(0, 1), {0, 0}, ny);
    CHECK(std::isfinite(d.dp.real()));
    CHECK(std::abs(d.dp) < 1e4);
    CHECK(std::abs(d.s) < 1e2);
  }
}
