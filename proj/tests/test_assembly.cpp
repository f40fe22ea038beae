#include <doctest.h>

#include <Eigen/SVD>
#include <cmath>

#include "strata/assembly.hpp"
#include "strata/quadrature.hpp"
#include "test_helpers.hpp"

using namespace strata;
using namespace strata::test;

namespace {

Geometry two_flat_geometry(int n, double w1 = 2.0, double w2 = 3.0, double w3 = 2.5) {
  ProblemSpec spec;
  spec.period = 1.0;
  spec.omega = {w1, w2, w3};
  spec.interfaces = {flat_curve(0.25), flat_curve(-0.25)};
  spec.n_points = {n, n};
  return build_geometry(spec);
}

Geometry two_seeded_geometry(int n) { return build_geometry(spec_two_interfaces(n)); }

int svd_rank(const CMat& m, double eps) {
  Eigen::BDCSVD<CMat> svd(m);
  const RVec& s = svd.singularValues();
  int k = 0;
  while (k < s.size() && s[k] > eps * s[0]) ++k;
  return k;
}

}  // namespace

TEST_CASE("single-layer row sums match an adaptive potential oracle") {
  // One far target; density identically one. A gentle curve keeps the plain
  // quadrature converged at this resolution.
  auto c = seeded_curve(5, true, 0.0, 1.0, 8, 1.0 / 60.0);
  auto di = discretize_interface(c, 256);
  TargetSet ts;
  ts.pts = {Point(0.1, 1.4)};
  ts.dirs = {Vec2(0, 1)};
  ts.layout = RowLayout::Stacked;
  const double omega = 4.0;
  const CMat s = kernel_block(omega, ts, di, KernelKind::S);
  const Cplx row_sum = s.row(0).sum();
  CVec acc = CVec::Zero(1);
  adaptive_integrate(
      [&](double t, CVec& out) {
        const Point y = c->eval(t);
        const Point dv = c->deriv(t);
        out[0] = helmholtz_green(omega, ts.pts[0], y) * std::hypot(dv.x, dv.y);
      },
      0.0, 1.0, 1e-13, acc);
  CHECK(std::abs(row_sum - acc[0]) < 1e-10);
  CHECK(s.rows() == 1);
  CHECK(s.cols() == 256);
}

TEST_CASE("kernel_block rejects coincident targets") {
  auto di = discretize_interface(flat_curve(0.0), 64);
  TargetSet ts;
  ts.pts = {di.pts[3]};
  ts.dirs = {Vec2(0, 1)};
  CHECK_THROWS_AS(kernel_block(1.0, ts, di, KernelKind::S), NumericalError);
}

TEST_CASE("double layer of a closed curve reproduces the jump constants") {
  // Laplace limit: D[1] = -1 inside, 0 outside (outward normal).
  auto circle = circle_curve(1.0);
  auto di = discretize_interface(circle, 128);
  TargetSet ts;
  ts.pts = {Point(0.2, 0.1), Point(2.5, 1.0)};
  ts.dirs = {Vec2(0, 1), Vec2(0, 1)};
  ts.layout = RowLayout::Stacked;
  const CMat d = kernel_block(1e-4, ts, di, KernelKind::D);
  const Cplx inside = d.row(0).sum(), outside = d.row(1).sum();
  CHECK(std::abs(inside - Cplx(-1.0)) < 1e-4);
  CHECK(std::abs(outside) < 1e-4);
}

TEST_CASE("self double layer on a flat interface vanishes") {
  auto di = discretize_interface(flat_curve(0.0), 64);
  const CMat d = self_kernel_block(2.0, di, KernelKind::D);
  CHECK(d.cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("self single layer on a circle matches the analytic laplace value") {
  const double radius = 1.0, omega = 1e-4;
  auto di = discretize_interface(circle_curve(radius), 128);
  const CMat s = self_kernel_block(omega, di, KernelKind::S);
  // V[1] on the circle = -R log R - R (log(omega/2) + gamma) + i pi R / 2 + O(omega^2)
  const Cplx expected = Cplx(-radius * std::log(radius) -
                                 radius * (std::log(0.5 * omega) + kEulerGamma),
                             0.5 * kPi * radius);
  for (int k = 0; k < di.n(); k += 17) {
    const Cplx v = s.row(k).sum();
    CHECK(std::abs(v - expected) < 1e-6);
  }
}

TEST_CASE("self single-layer quadrature converges at high order") {
  // Energy functional of a smooth density on the circle; the coarse-level
  // errors against the fine reference must drop much faster than 2^8.
  const double omega = 6.0;
  auto functional = [&](int n) {
    auto di = discretize_interface(circle_curve(1.0), n);
    const CMat s = self_kernel_block(omega, di, KernelKind::S);
    CVec dens(n);
    for (int k = 0; k < n; ++k) dens[k] = std::cos(2 * kPi * 7 * di.t[k]);
    const CVec sd = s * dens;
    Cplx acc = 0.0;
    for (int k = 0; k < n; ++k) acc += di.weights[k] * di.speed[k] * dens[k] * sd[k];
    return acc;
  };
  const Cplx ref = functional(256);
  const double e64 = std::abs(functional(64) - ref);
  const double e128 = std::abs(functional(128) - ref);
  CHECK(e128 < std::max(e64 / 256.0, 5e-12));
}

TEST_CASE("transmission self block has the second-kind structure") {
  Geometry geo = two_flat_geometry(64, 2.0, 2.0, 2.5);  // equal above/below interface 0
  const CMat a = assemble_A_self(geo, 0);
  CHECK(a.rows() == 128);
  CHECK(a.cols() == 128);
  CMat jump = CMat::Zero(128, 128);
  for (int k = 0; k < 64; ++k) {
    jump(2 * k, 2 * k) = 1.0;
    jump(2 * k + 1, 2 * k + 1) = -1.0;
  }
  CHECK((a - jump).cwiseAbs().maxCoeff() < 1e-14);  // identical wavenumbers: kernels cancel

  // nearly equal wavenumbers: off-jump part is small
  Geometry geo2 = two_flat_geometry(64, 2.0, 2.001, 2.5);
  const CMat a2 = assemble_A_self(geo2, 0);
  CHECK((a2 - jump).cwiseAbs().maxCoeff() < 2e-3);
}

TEST_CASE("copy blocks decay relative to the self block and combine phases") {
  Geometry geo = two_seeded_geometry(96);
  const CMat self = make_A_self(geo, 0).dense();
  const CMat plus = make_A_copy(geo, 0, +1).dense();
  const CMat minus = make_A_copy(geo, 0, -1).dense();
  CHECK(plus.cwiseAbs().maxCoeff() < self.cwiseAbs().maxCoeff());
  CHECK(minus.cwiseAbs().maxCoeff() < self.cwiseAbs().maxCoeff());
  const Cplx alpha = std::exp(kI * 0.31);
  const CMat comb = alpha * plus + (1.0 / alpha) * minus;
  CHECK(comb.norm() <= plus.norm() + minus.norm() + 1e-12);
}

TEST_CASE("vertical neighbor blocks are low rank and match pointwise kernels") {
  Geometry geo = two_seeded_geometry(96);
  NystromOperator op = make_A_vertical(geo, 0, 1, 0);
  const CMat block = op.dense();
  CHECK(block.rows() == 192);
  CHECK(block.cols() == 192);
  CHECK(svd_rank(block, 1e-10) < 96);

  // Spot-check raw entries on a well-separated flat pair (no near corrections
  // fire there): A_{0,1} radiates with omega of the shared layer and a minus
  // sign (it feeds u_below).
  Geometry flat = two_flat_geometry(160, 2.0, 3.0, 2.5);
  const CMat fblock = make_A_vertical(flat, 0, 1, 0).dense();
  const HelmholtzKernel kern(flat.spec.omega[1]);
  const auto& tgt = flat.interfaces[0];
  const auto& src = flat.interfaces[1];
  for (int t : {3, 80, 151}) {
    for (int s : {7, 90, 140}) {
      const KernelBlock2 kb = kern.eval(tgt.pts[t], tgt.normals[t], src.pts[s], src.normals[s]);
      const double f = src.weights[s] * src.speed[s];
      CHECK(std::abs(fblock(2 * t, 2 * s) - (-kb.d * f)) < 1e-13);
      CHECK(std::abs(fblock(2 * t + 1, 2 * s + 1) - (-kb.sp * f)) < 1e-13);
    }
  }
}

TEST_CASE("proxy block shapes, rank, and asymptotic magnitude") {
  Geometry geo = two_seeded_geometry(96);
  const CMat b = assemble_B(geo, 0, 0);
  CHECK(b.rows() == 192);
  CHECK(b.cols() == 160);  // P_l = 160 default
  CHECK(svd_rank(b, 1e-10) < 120);
  // value-row magnitudes follow the Hankel far-field amplitude
  const ProxyCircle& pc = geo.cell.proxy[0];
  const double omega = geo.spec.omega[0];
  for (int j : {0, 57}) {
    const double r = dist(geo.interfaces[0].pts[5], pc.pts[j]);
    const double asym = std::sqrt(2.0 / (kPi * omega * r)) / 4.0;
    CHECK(std::abs(b(10, j)) == doctest::Approx(asym).epsilon(0.05));
  }
}

TEST_CASE("wall residual reduction matches the direct three-copy evaluation") {
  // For layer l the wall rows enforce u(R) - alpha u(L) = 0. The stored pair
  // evaluates only the two surviving far-copy terms; check the exact identity
  // against the full phased-copy difference for arbitrary densities.
  Geometry geo = two_seeded_geometry(64);
  const int l = 1, i = 0;
  const double d = geo.spec.period;
  const Cplx alpha = std::exp(kI * 0.77);
  const WallPair pair = assemble_C(geo, l, i);
  const CMat reduced = combine_wall(pair, alpha);

  const WallSegment& seg = geo.cell.wall[l];
  auto wall_targets = [&](double x) {
    TargetSet ts;
    ts.layout = RowLayout::Stacked;
    for (double y : seg.y) {
      ts.pts.emplace_back(x, y);
      ts.dirs.emplace_back(1.0, 0.0);
    }
    return ts;
  };
  auto eval_all_copies = [&](double x) {
    CMat sum = CMat::Zero(reduced.rows(), reduced.cols());
    const Cplx phases[3] = {Cplx(1.0), alpha, 1.0 / alpha};
    const double shifts[3] = {0.0, d, -d};
    for (int c = 0; c < 3; ++c) {
      NystromOperator op(std::make_shared<HelmholtzKernel>(geo.spec.omega[l]),
                         &geo.interfaces[i], shifts[c], wall_targets(x), 1.0, false);
      sum += phases[c] * op.dense();
    }
    return sum;
  };
  const CMat direct = eval_all_copies(0.5 * d) - alpha * eval_all_copies(-0.5 * d);
  CHECK((reduced - direct).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("proxy wall pair and the spectral quasi-periodic convention") {
  Geometry geo = two_flat_geometry(64);
  const WallPair q = assemble_Q(geo, 1);
  CHECK(q.at_left.rows() == 240);  // 2 M_w at the default M_w = 120
  CHECK(q.at_left.cols() == 160);
  // entries are plain point-source evaluations on the walls
  const PointSource ps{geo.spec.omega[1]};
  const Point pr(0.5, geo.cell.wall[1].y[7]);
  CHECK(std::abs(q.at_right(7, 3) - ps.value(pr, geo.cell.proxy[1].pts[3])) < 1e-15);

  // A quasi-periodic field built from spectral modes (a phased replicated
  // source) vanishes under (value at R) - alpha (value at L).
  const double omega = 7.0, kappa = 1.1, dd = 1.0;
  const Cplx alpha = std::exp(kI * kappa * dd);
  const Point src(0.1, 2.0);
  auto spectral = [&](const Point& p) {
    Cplx sum = 0.0;
    for (int n = -6; n <= 6; ++n) {
      const double kn = kappa + 2.0 * kPi * n / dd;
      const Cplx kv = (omega * omega >= kn * kn)
                          ? Cplx(std::sqrt(omega * omega - kn * kn), 0.0)
                          : Cplx(0.0, std::sqrt(kn * kn - omega * omega));
      sum += (kI / (2.0 * dd)) / kv * std::exp(kI * kn * (p.x - src.x) + kI * kv * std::abs(p.y - src.y));
    }
    return sum;
  };
  for (double y : {-0.2, 0.0, 0.3})
    CHECK(std::abs(spectral({0.5, y}) - alpha * spectral({-0.5, y})) < 1e-12);
}

TEST_CASE("right-hand side lives on the first interface only") {
  SUBCASE("normal incidence on a flat top interface at its height") {
    ProblemSpec s;
    s.period = 1.0;
    s.omega = {3.0, 4.0};
    s.interfaces = {flat_curve(0.0)};
    s.n_points = {64};
    Geometry g0 = build_geometry(s);
    const IncidentWave w = make_incident(-kPi / 2, 3.0, 1.0);
    const CVec f = assemble_rhs(g0, w);
    for (int k = 0; k < 64; ++k) CHECK(std::abs(f[2 * k] - Cplx(-1.0)) < 1e-14);
  }
  Geometry geo = two_flat_geometry(64, 3.0, 4.0, 5.0);
  const IncidentWave w = make_incident(-0.37 * kPi, 3.0, 1.0);
  const CVec f = assemble_rhs(geo, w);
  CHECK(f.size() == 2 * 64 * 2);
  for (int k = 128; k < f.size(); ++k) CHECK(f[k] == Cplx(0.0));
  CHECK(f.cwiseAbs().maxCoeff() <= std::max(1.0, geo.spec.omega[0]) + 1e-12);
}

TEST_CASE("W block carries the representation-minus-expansion sign") {
  const auto basis = make_rb_basis(0.0, 10.0, 1.0, 20, 1.0, RbDirection::Up);
  const std::vector<double> xs{-0.25, 0.0, 0.25};
  const CMat w = assemble_W(basis, xs);
  CHECK(w.rows() == 6);
  CHECK(w.cols() == 41);
  CHECK(std::abs(w(0, 20) + 1.0) < 1e-14);  // minus the n = 0 value
  CHECK(std::abs(w(3, 20) + kI * basis.k_n[20]) < 1e-14);
}

TEST_CASE("hypersingular single-wavenumber self block is rejected") {
  auto di = discretize_interface(flat_curve(0.0), 64);
  CHECK_THROWS_AS(self_kernel_block(2.0, di, KernelKind::Dp), NumericalError);
}
