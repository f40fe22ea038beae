#include "strata/lowrank.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>

#include <iostream>
#include <random>

namespace strata {

namespace {

int qr_rank(const Eigen::ColPivHouseholderQR<CMat>& qr, double eps, int max_rank) {
  const CMat& r = qr.matrixR();
  const double top = std::abs(r(0, 0));
  if (top == 0.0) return 0;
  int k = 0;
  while (k < max_rank && std::abs(r(k, k)) > eps * top) ++k;
  return k;
}

CVec random_unit(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  CVec v(n);
  for (int i = 0; i < n; ++i) v[i] = Cplx(g(rng), g(rng));
  return v / v.norm();
}

}  // namespace

RowId row_id(const CMat& m, double eps, int min_rank) {
  // CPQR on M^T selects rows of M; interp carries an identity on the skeleton.
  const CMat mt = m.transpose();
  Eigen::ColPivHouseholderQR<CMat> qr(mt);
  const int kmax = static_cast<int>(std::min(mt.rows(), mt.cols()));
  const int k = std::max(std::min(min_rank, kmax), qr_rank(qr, eps, kmax));
  RowId out;
  const auto& perm = qr.colsPermutation().indices();
  out.skeleton.resize(k);
  for (int i = 0; i < k; ++i) out.skeleton[i] = perm[i];
  out.interp = CMat::Zero(m.rows(), k);
  if (k == 0) return out;
  const CMat r = qr.matrixR().topRows(k);
  const CMat t = r.leftCols(k).triangularView<Eigen::Upper>().solve(r.rightCols(mt.cols() - k));
  for (int i = 0; i < k; ++i) out.interp(perm[i], i) = 1.0;
  for (int j = k; j < mt.cols(); ++j) out.interp.row(perm[j]) = t.col(j - k).transpose();
  return out;
}

ColId col_id(const CMat& m, double eps, int min_rank) {
  Eigen::ColPivHouseholderQR<CMat> qr(m);
  const int kmax = static_cast<int>(std::min(m.rows(), m.cols()));
  const int k = std::max(std::min(min_rank, kmax), qr_rank(qr, eps, kmax));
  ColId out;
  const auto& perm = qr.colsPermutation().indices();
  out.skeleton.resize(k);
  for (int i = 0; i < k; ++i) out.skeleton[i] = perm[i];
  out.interp = CMat::Zero(k, m.cols());
  if (k == 0) return out;
  const CMat r = qr.matrixR().topRows(k);
  const CMat t = r.leftCols(k).triangularView<Eigen::Upper>().solve(r.rightCols(m.cols() - k));
  for (int i = 0; i < k; ++i) out.interp(i, perm[i]) = 1.0;
  for (int j = k; j < m.cols(); ++j) out.interp.col(perm[j]) = t.col(j - k);
  return out;
}

double estimate_norm(const std::function<CVec(const CVec&)>& apply,
                     const std::function<CVec(const CVec&)>& apply_adj, int rows, int cols,
                     int iters) {
  CVec v = random_unit(cols, 0x5eedULL + rows * 31 + cols);
  double est = 0.0;
  for (int it = 0; it < iters; ++it) {
    CVec w = apply(v);
    est = w.norm();
    if (est == 0.0) return 0.0;
    v = apply_adj(w / est);
    const double vn = v.norm();
    if (vn == 0.0) return est;
    v /= vn;
  }
  return est;
}

double estimate_norm(const CMat& m, int iters) {
  return estimate_norm([&](const CVec& v) { return CVec(m * v); },
                       [&](const CVec& v) { return CVec(m.adjoint() * v); },
                       static_cast<int>(m.rows()), static_cast<int>(m.cols()), iters);
}

LowRankFactor factor(const CMat& m, double eps) {
  const int rows = static_cast<int>(m.rows()), cols = static_cast<int>(m.cols());
  LowRankFactor f;
  f.tol = eps;
  const double norm = estimate_norm(m);
  if (norm == 0.0) {
    f.left = CMat::Zero(rows, 0);
    f.right = CMat::Zero(0, cols);
    return f;
  }
  const int kmin = std::min(rows, cols);
  std::mt19937_64 rng(0xfac7ULL + rows * 131 + cols);
  std::normal_distribution<double> g;
  int k = std::min(kmin, 24);
  while (true) {
    // Column sketch S = M * Omega captures the row structure of M.
    CMat omega(cols, std::min(cols, k + 10));
    for (int j = 0; j < omega.cols(); ++j)
      for (int i = 0; i < cols; ++i) omega(i, j) = Cplx(g(rng), g(rng));
    const CMat sketch = m * omega;
    RowId rid = row_id(sketch, 0.1 * eps);
    f.left = rid.interp;
    f.right = m(rid.skeleton, Eigen::all);
    const double err = estimate_norm(
        [&](const CVec& v) { return CVec(m * v - f.left * (f.right * v)); },
        [&](const CVec& v) { return CVec(m.adjoint() * v - f.right.adjoint() * (f.left.adjoint() * v)); },
        rows, cols, 8);
    if (err <= eps * norm || k >= kmin) break;
    k = std::min(kmin, 2 * k);
  }
  if (f.rank() > kmin / 2) {
    f.saturated = true;
    std::cerr << "strata: low-rank factorization saturated (rank " << f.rank() << " of "
              << kmin << ")\n";
  }
  return f;
}

TruncatedPinv truncated_pinv(const CMat& q, double eps_schur) {
  Eigen::BDCSVD<CMat> svd(q, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const RVec& sv = svd.singularValues();
  if (sv.size() == 0 || sv[0] <= 0.0)
    throw NumericalError("truncated_pinv: block is identically zero (degenerate geometry)");
  int l = 0;
  while (l < sv.size() && sv[l] > eps_schur * sv[0]) ++l;
  if (l == 0) throw NumericalError("truncated_pinv: no singular values above threshold");
  TruncatedPinv p;
  p.t_hat = svd.matrixV().leftCols(l);
  p.sigma_inv = sv.head(l).cwiseInverse();
  p.u_hat_star = svd.matrixU().leftCols(l).adjoint();
  return p;
}

LowRankFactor factor_BQC(const LowRankFactor& b_factor, const TruncatedPinv& pinv, const CMat& c) {
  LowRankFactor f;
  f.left = b_factor.left;
  CMat br = b_factor.right;
  if (br.cols() < pinv.t_hat.rows()) {
    // Hatted proxy block: pad the factor columns over the appended expansion
    // unknowns (the B block is zero there).
    CMat padded = CMat::Zero(br.rows(), pinv.t_hat.rows());
    padded.leftCols(br.cols()) = br;
    br = padded;
  }
  f.right = ((br * pinv.t_hat) * pinv.sigma_inv.asDiagonal()) * (pinv.u_hat_star * c);
  f.tol = b_factor.tol;
  return f;
}

LowRankFactor factor_BQC_direct(const CMat& b, const TruncatedPinv& pinv, const CMat& c) {
  LowRankFactor f;
  CMat bp = b;
  if (bp.cols() < pinv.t_hat.rows()) {
    CMat padded = CMat::Zero(bp.rows(), pinv.t_hat.rows());
    padded.leftCols(bp.cols()) = bp;
    bp = padded;
  }
  f.left = bp * pinv.t_hat;
  f.right = pinv.sigma_inv.asDiagonal() * (pinv.u_hat_star * c);
  return f;
}

LowRankFactor combine_P_block(const std::vector<std::pair<const LowRankFactor*, Cplx>>& parts,
                              double recompress_eps) {
  if (parts.empty()) throw SpecError("combine_P_block: no parts");
  const int rows = static_cast<int>(parts[0].first->left.rows());
  const int cols = static_cast<int>(parts[0].first->right.cols());
  int k_total = 0;
  for (const auto& [p, c] : parts) {
    if (p->left.rows() != rows || p->right.cols() != cols)
      throw SpecError("combine_P_block: part dimension mismatch");
    k_total += p->rank();
  }
  LowRankFactor f;
  f.left.resize(rows, k_total);
  f.right.resize(k_total, cols);
  int at = 0;
  for (const auto& [p, c] : parts) {
    f.left.middleCols(at, p->rank()) = p->left;
    f.right.middleRows(at, p->rank()) = c * p->right;
    at += p->rank();
  }
  if (recompress_eps > 0.0) return recompress(f, recompress_eps);
  return f;
}

LowRankFactor recompress(const LowRankFactor& f, double eps) {
  if (f.rank() == 0) return f;
  Eigen::HouseholderQR<CMat> ql(f.left);
  CMat rl = ql.matrixQR().topRows(f.rank()).triangularView<Eigen::Upper>();
  Eigen::HouseholderQR<CMat> qr_right(CMat(f.right.adjoint()));
  CMat rr = qr_right.matrixQR().topRows(f.rank()).triangularView<Eigen::Upper>();
  const CMat mid = rl * rr.adjoint();
  Eigen::BDCSVD<CMat> svd(mid, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const RVec& sv = svd.singularValues();
  int k = 0;
  while (k < sv.size() && sv[k] > eps * sv[0]) ++k;
  LowRankFactor out;
  out.tag = f.tag;
  out.tol = std::max(f.tol, eps);
  CMat qleft = CMat(ql.householderQ()) .leftCols(f.rank());
  CMat qright = CMat(qr_right.householderQ()).leftCols(f.rank());
  out.left = qleft * svd.matrixU().leftCols(k) * sv.head(k).asDiagonal();
  out.right = svd.matrixV().leftCols(k).adjoint() * qright.adjoint();
  return out;
}

GlobalLR assemble_global_LR(int num_interfaces,
                            const std::map<std::pair<int, int>, LowRankFactor>& blocks) {
  for (const auto& [key, f] : blocks)
    if (std::abs(key.first - key.second) > 1)
      throw SpecError("assemble_global_LR: off-tridiagonal block present");
  GlobalLR g;
  g.left.resize(num_interfaces);
  g.right.resize(num_interfaces);
  for (int i = 0; i < num_interfaces; ++i) {
    int k_i = 0, rows_i = 0;
    std::vector<std::pair<int, const LowRankFactor*>> row_parts;
    for (int j = i - 1; j <= i + 1; ++j) {
      auto it = blocks.find({i, j});
      if (it == blocks.end()) continue;
      row_parts.emplace_back(j, &it->second);
      k_i += it->second.rank();
      rows_i = static_cast<int>(it->second.left.rows());
    }
    g.left[i].resize(rows_i, k_i);
    int at = 0;
    for (auto& [j, f] : row_parts) {
      g.left[i].middleCols(at, f->rank()) = f->left;
      CMat r = CMat::Zero(k_i, f->right.cols());
      r.middleRows(at, f->rank()) = f->right;
      auto it = g.right[i].find(j);
      if (it == g.right[i].end())
        g.right[i].emplace(j, std::move(r));
      else
        it->second += r;
      at += f->rank();
    }
  }
  return g;
}

}  // namespace strata
