#include <doctest.h>

#include <random>

#include "strata/lowrank.hpp"

using namespace strata;

namespace {

CMat random_matrix(int m, int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  CMat a(m, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < m; ++i) a(i, j) = Cplx(g(rng), g(rng));
  return a;
}

CMat random_lowrank(int m, int n, int k, std::uint64_t seed) {
  return random_matrix(m, k, seed) * random_matrix(k, n, seed + 1);
}

CMat decaying_spectrum(int m, int n, double rate, std::uint64_t seed) {
  const int k = std::min(m, n);
  CMat u = random_matrix(m, k, seed), v = random_matrix(k, n, seed + 7);
  Eigen::HouseholderQR<CMat> qu(u), qv(CMat(v.adjoint()));
  CMat uu = qu.householderQ() * CMat::Identity(m, k);
  CMat vv = (qv.householderQ() * CMat::Identity(n, k)).adjoint();
  RVec s(k);
  for (int i = 0; i < k; ++i) s[i] = std::pow(rate, i);
  return uu * s.asDiagonal() * vv;
}

}  // namespace

TEST_CASE("row id reconstructs with identity on the skeleton") {
  const CMat a = random_lowrank(60, 45, 8, 1);
  const RowId rid = row_id(a, 1e-12);
  CHECK(static_cast<int>(rid.skeleton.size()) == 8);
  const CMat rec = rid.interp * a(rid.skeleton, Eigen::all);
  CHECK((rec - a).norm() < 1e-10 * a.norm());
  for (std::size_t i = 0; i < rid.skeleton.size(); ++i)
    CHECK(std::abs(rid.interp(rid.skeleton[i], i) - 1.0) < 1e-12);
}

TEST_CASE("factor: rank-1, zero, and tolerance contract") {
  SUBCASE("rank-1 outer product") {
    const CMat a = random_lowrank(40, 30, 1, 3);
    const LowRankFactor f = factor(a, 1e-10);
    CHECK(f.rank() == 1);
    CHECK((f.dense() - a).norm() < 1e-9 * a.norm());
  }
  SUBCASE("zero matrix") {
    const LowRankFactor f = factor(CMat::Zero(25, 35), 1e-10);
    CHECK(f.rank() == 0);
  }
  SUBCASE("decaying spectrum meets the bound") {
    const CMat a = decaying_spectrum(80, 64, 0.5, 11);
    const LowRankFactor f = factor(a, 1e-8);
    CHECK(estimate_norm(CMat(a - f.dense())) < 5e-8 * estimate_norm(a));
    CHECK(f.rank() < 40);
  }
  SUBCASE("incompressible matrix saturates") {
    const CMat a = random_matrix(30, 30, 17);
    const LowRankFactor f = factor(a, 1e-10);
    CHECK(f.saturated);
    CHECK((f.dense() - a).norm() < 1e-8 * a.norm());
  }
}

TEST_CASE("phase tags scale factors exactly") {
  const CMat a = random_lowrank(30, 25, 5, 23);
  LowRankFactor f = factor(a, 1e-12);
  f.tag = PhaseTag::Alpha;
  const Cplx alpha = std::exp(kI * 0.7);
  const CMat scaled = phase_scale(f.tag, alpha) * f.dense();
  CHECK((scaled - alpha * a).norm() < 1e-10 * a.norm());
}

TEST_CASE("truncated pseudoinverse") {
  SUBCASE("identity") {
    const TruncatedPinv p = truncated_pinv(CMat::Identity(8, 8), 1e-10);
    CHECK(p.rank() == 8);
    CHECK((p.apply(CMat(CMat::Identity(8, 8))) - CMat::Identity(8, 8)).norm() < 1e-12);
  }
  SUBCASE("tiny singular value is dropped") {
    CMat d = CMat::Zero(2, 2);
    d(0, 0) = 1.0;
    d(1, 1) = 1e-20;
    const TruncatedPinv p = truncated_pinv(d, 1e-12);
    CHECK(p.rank() == 1);
    const CMat pd = p.apply(CMat(CMat::Identity(2, 2)));
    CHECK(std::abs(pd(0, 0) - 1.0) < 1e-14);
    CHECK(std::abs(pd(1, 1)) < 1e-14);
  }
  SUBCASE("zero matrix is degenerate") {
    CHECK_THROWS_AS(truncated_pinv(CMat::Zero(5, 4), 1e-10), NumericalError);
  }
  SUBCASE("moore-penrose checks on the retained subspace") {
    // At eps = 1e-12 the retained inverse has condition ~1e12 and the matrix
    // products themselves drown the bound in roundoff, so the identity is
    // verified at a resolvable truncation level.
    const CMat q = decaying_spectrum(48, 32, 0.4, 31);
    const double eps = 1e-6;
    const TruncatedPinv p = truncated_pinv(q, eps);
    const CMat qp = p.apply(CMat(CMat::Identity(48, 48)));
    CHECK((q * qp * q - q).norm() < 2 * eps * q.norm());
    CHECK((qp * q * qp - qp).norm() < 2 * eps * qp.norm());
    // rank counting at the tight tolerance: sigma_i = 0.4^i > 1e-12 sigma_0
    const TruncatedPinv tight = truncated_pinv(q, 1e-12);
    CHECK(tight.rank() == 31);
  }
}

TEST_CASE("the factored BQC route agrees with the direct route and has smaller rank") {
  // B has fast-decaying spectrum (distant interactions); Q is nearly full rank.
  const CMat b = decaying_spectrum(96, 64, 0.45, 41);
  const CMat q = decaying_spectrum(60, 64, 0.85, 43);
  const CMat c = random_matrix(60, 90, 45);
  const TruncatedPinv pinv = truncated_pinv(q, 1e-12);
  const LowRankFactor bf = factor(b, 1e-10);
  const LowRankFactor f16 = factor_BQC(bf, pinv, c);
  const LowRankFactor f15 = factor_BQC_direct(b, pinv, c);
  CHECK(f16.rank() < f15.rank());
  const CMat dense = b * pinv.apply(c);
  CHECK((f16.dense() - dense).norm() < 5e-9 * dense.norm());
  CHECK((f15.dense() - dense).norm() < 1e-10 * dense.norm());
}

TEST_CASE("combine_P_block stacks parts and recompresses") {
  const CMat a = random_lowrank(50, 40, 4, 51);
  const CMat b = random_lowrank(50, 40, 6, 53);
  const LowRankFactor fa = factor(a, 1e-12), fb = factor(b, 1e-12);
  SUBCASE("single part is the identity operation") {
    const LowRankFactor f = combine_P_block({{&fa, 1.0}}, 0.0);
    CHECK(f.rank() == fa.rank());
    CHECK((f.dense() - a).norm() < 1e-10 * a.norm());
  }
  SUBCASE("ranks add before recompression") {
    const LowRankFactor f = combine_P_block({{&fa, 1.0}, {&fb, -1.0}}, 0.0);
    CHECK(f.rank() == fa.rank() + fb.rank());
    CHECK((f.dense() - (a - b)).norm() < 1e-10 * (a - b).norm());
  }
  SUBCASE("recompression reproduces the dense sum") {
    const LowRankFactor f = combine_P_block({{&fa, 2.0}, {&fb, kI}}, 1e-11);
    const CMat dense = 2.0 * a + kI * b;
    CHECK((f.dense() - dense).norm() < 5e-10 * dense.norm());
    CHECK(f.rank() <= fa.rank() + fb.rank());
  }
  SUBCASE("dimension mismatch is an error") {
    const LowRankFactor bad = factor(random_lowrank(20, 40, 2, 55), 1e-12);
    CHECK_THROWS_AS(combine_P_block({{&fa, 1.0}, {&bad, 1.0}}, 0.0), SpecError);
  }
}

TEST_CASE("global LR assembly") {
  std::map<std::pair<int, int>, LowRankFactor> blocks;
  const CMat p00 = random_lowrank(20, 20, 3, 61);
  blocks[{0, 0}] = factor(p00, 1e-12);
  SUBCASE("one-interface problem returns the single factor") {
    const GlobalLR g = assemble_global_LR(1, blocks);
    CHECK(g.core_dim(0) == blocks[{0, 0}].rank());
    CHECK((g.left[0] * g.right[0].at(0) - p00).norm() < 1e-10 * p00.norm());
  }
  SUBCASE("off-tridiagonal blocks are rejected") {
    blocks[{0, 2}] = factor(random_lowrank(20, 20, 2, 63), 1e-12);
    CHECK_THROWS_AS(assemble_global_LR(3, blocks), SpecError);
  }
}
