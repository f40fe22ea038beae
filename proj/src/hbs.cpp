#include "strata/hbs.hpp"

#include <iostream>
#include <numeric>

#include "strata/lowrank.hpp"

namespace strata {

std::vector<int> MatrixSource::near_complement(const std::vector<int>& cluster) const {
  std::vector<bool> in(dim(), false);
  for (int id : cluster) in[id] = true;
  std::vector<int> out;
  for (int i = 0; i < dim(); ++i)
    if (!in[i]) out.push_back(i);
  return out;
}

namespace {

Eigen::PartialPivLU<CMat> checked_lu(const CMat& m, const char* what) {
  Eigen::PartialPivLU<CMat> lu(m);
  if (m.rows() > 0) {
    const RVec diag = lu.matrixLU().diagonal().cwiseAbs();
    if (diag.minCoeff() < 1e-14 * std::max(1e-300, diag.maxCoeff()))
      throw NumericalError(std::string("hbs: singular pivot in ") + what);
  }
  return lu;
}

std::vector<int> range_ids(int b, int e) {
  std::vector<int> ids(e - b);
  std::iota(ids.begin(), ids.end(), b);
  return ids;
}

}  // namespace

HbsMatrix hbs_compress(const MatrixSource& src, double tol, int leaf_size) {
  HbsMatrix h;
  h.n_ = src.dim();
  h.tol_ = tol;
  if (h.n_ <= 2 * leaf_size) {
    h.dense_fallback_ = true;
    const std::vector<int> all = range_ids(0, h.n_);
    h.dense_ = src.block(all, all);
    return h;
  }

  // Binary tree over contiguous ranges.
  h.nodes_.push_back({0, h.n_, {-1, -1}, -1, 0});
  for (std::size_t i = 0; i < h.nodes_.size(); ++i) {
    HbsNode& nd = h.nodes_[i];
    if (nd.end - nd.begin <= leaf_size) continue;
    const int mid = nd.begin + (nd.end - nd.begin) / 2;
    const int level = nd.level + 1;
    const int c0 = static_cast<int>(h.nodes_.size());
    h.nodes_.push_back({nd.begin, mid, {-1, -1}, static_cast<int>(i), level});
    h.nodes_.push_back({mid, nd.end, {-1, -1}, static_cast<int>(i), level});
    h.nodes_[i].child[0] = c0;
    h.nodes_[i].child[1] = c0 + 1;
  }
  int max_level = 0;
  for (const auto& nd : h.nodes_) max_level = std::max(max_level, nd.level);
  h.levels_.assign(max_level + 1, {});
  for (std::size_t i = 0; i < h.nodes_.size(); ++i) h.levels_[h.nodes_[i].level].push_back(i);

  bool saturated = false;
  for (int level = max_level; level >= 1 && !saturated; --level) {
    for (int id : h.levels_[level]) {
      HbsNode& nd = h.nodes_[id];
      std::vector<int> row_ids, col_ids;
      if (nd.is_leaf()) {
        row_ids = range_ids(nd.begin, nd.end);
        col_ids = row_ids;
        nd.d = src.block(row_ids, col_ids);
      } else {
        const HbsNode& a = h.nodes_[nd.child[0]];
        const HbsNode& b = h.nodes_[nd.child[1]];
        row_ids = a.row_skel;
        row_ids.insert(row_ids.end(), b.row_skel.begin(), b.row_skel.end());
        col_ids = a.col_skel;
        col_ids.insert(col_ids.end(), b.col_skel.begin(), b.col_skel.end());
      }
      const std::vector<int> cluster = range_ids(nd.begin, nd.end);
      const std::vector<int> near = src.near_complement(cluster);

      CMat row_sample(row_ids.size(), 0);
      {
        const CMat a = src.block(row_ids, near);
        const CMat b = src.row_surrogate(row_ids);
        row_sample.resize(row_ids.size(), a.cols() + b.cols());
        row_sample << a, b;
      }
      CMat col_sample(0, col_ids.size());
      {
        const CMat a = src.block(near, col_ids);
        const CMat b = src.col_surrogate(col_ids);
        col_sample.resize(a.rows() + b.rows(), col_ids.size());
        col_sample << a, b;
      }
      RowId rid = row_id(row_sample, tol);
      ColId cid = col_id(col_sample, tol);
      if (rid.skeleton.size() != cid.skeleton.size()) {
        const int k = static_cast<int>(std::max(rid.skeleton.size(), cid.skeleton.size()));
        rid = row_id(row_sample, tol, k);
        cid = col_id(col_sample, tol, k);
      }
      nd.u = rid.interp;
      nd.w = cid.interp;
      for (int s : rid.skeleton) nd.row_skel.push_back(row_ids[s]);
      for (int s : cid.skeleton) nd.col_skel.push_back(col_ids[s]);
      const int k = static_cast<int>(nd.row_skel.size());
      const int n_loc = static_cast<int>(row_ids.size());
      if (level > 1 && k > std::max(4, static_cast<int>(0.95 * n_loc))) saturated = true;
    }
  }
  if (saturated) {
    std::cerr << "strata: hbs rank saturation, using the dense fallback for this block\n";
    h.nodes_.clear();
    h.levels_.clear();
    h.dense_fallback_ = true;
    const std::vector<int> all = range_ids(0, h.n_);
    h.dense_ = src.block(all, all);
    return h;
  }

  // Sibling couplings.
  for (auto& nd : h.nodes_) {
    if (nd.is_leaf()) continue;
    HbsNode& a = h.nodes_[nd.child[0]];
    HbsNode& b = h.nodes_[nd.child[1]];
    a.coupling_to_sibling = src.block(a.row_skel, b.col_skel);
    b.coupling_to_sibling = src.block(b.row_skel, a.col_skel);
  }
  return h;
}

CVec HbsMatrix::apply(const CVec& x) const {
  if (dense_fallback_) return dense_ * x;
  std::vector<CVec> s(nodes_.size());
  CVec y = CVec::Zero(n_);
  // Upward pass: compressed column coordinates.
  for (int level = static_cast<int>(levels_.size()) - 1; level >= 1; --level) {
    for (int id : levels_[level]) {
      const HbsNode& nd = nodes_[id];
      if (nd.is_leaf()) {
        s[id] = nd.w * x.segment(nd.begin, nd.end - nd.begin);
        y.segment(nd.begin, nd.end - nd.begin) += nd.d * x.segment(nd.begin, nd.end - nd.begin);
      } else {
        CVec loc(s[nd.child[0]].size() + s[nd.child[1]].size());
        loc << s[nd.child[0]], s[nd.child[1]];
        s[id] = nd.w * loc;
      }
    }
  }
  // Downward pass: distribute couplings.
  std::vector<CVec> g(nodes_.size());
  for (std::size_t id = 0; id < nodes_.size(); ++id) g[id] = CVec();
  g[0] = CVec();
  for (int level = 0; level < static_cast<int>(levels_.size()) - 0; ++level) {
    for (int id : levels_[level]) {
      const HbsNode& nd = nodes_[id];
      if (nd.is_leaf()) continue;
      const int c0 = nd.child[0], c1 = nd.child[1];
      CVec base;
      if (g[id].size() > 0)
        base = nodes_[id].u * g[id];
      else
        base = CVec::Zero(s[c0].size() + s[c1].size());
      g[c0] = base.head(s[c0].size()) + nodes_[c0].coupling_to_sibling * s[c1];
      g[c1] = base.tail(s[c1].size()) + nodes_[c1].coupling_to_sibling * s[c0];
    }
  }
  for (std::size_t id = 1; id < nodes_.size(); ++id) {
    const HbsNode& nd = nodes_[id];
    if (nd.is_leaf() && g[id].size() > 0)
      y.segment(nd.begin, nd.end - nd.begin) += nd.u * g[id];
  }
  return y;
}

HbsInverse::HbsInverse(const HbsMatrix& h) : h_(h) {
  if (h_.dense_fallback_) {
    root_lu_ = checked_lu(h_.dense_, "dense fallback block");
    return;
  }
  for (int level = static_cast<int>(h_.levels_.size()) - 1; level >= 0; --level) {
    for (int id : h_.levels_[level]) {
      HbsNode& nd = h_.nodes_[id];
      if (!nd.is_leaf()) {
        HbsNode& a = h_.nodes_[nd.child[0]];
        HbsNode& b = h_.nodes_[nd.child[1]];
        const int ka = static_cast<int>(a.row_skel.size());
        const int kb = static_cast<int>(b.row_skel.size());
        nd.d.resize(ka + kb, ka + kb);
        nd.d.topLeftCorner(ka, ka) = a.d_hat;
        nd.d.topRightCorner(ka, kb) = a.coupling_to_sibling;
        nd.d.bottomLeftCorner(kb, ka) = b.coupling_to_sibling;
        nd.d.bottomRightCorner(kb, kb) = b.d_hat;
      }
      if (level == 0) {
        root_lu_ = checked_lu(nd.d, "root block");
      } else {
        nd.d_lu = checked_lu(nd.d, nd.is_leaf() ? "leaf block" : "internal block");
        nd.d_inv_u = nd.d_lu.solve(nd.u);
        const CMat e = nd.w * nd.d_inv_u;
        nd.d_hat = checked_lu(e, "skeleton pivot").inverse();
      }
    }
  }
}

CVec HbsInverse::solve(const CVec& b) const {
  if (h_.dense_fallback_) return root_lu_.solve(b);
  const auto& nodes = h_.nodes_;
  std::vector<CVec> z(nodes.size()), c(nodes.size()), bhat(nodes.size()), bloc(nodes.size());
  for (int level = static_cast<int>(h_.levels_.size()) - 1; level >= 1; --level) {
    for (int id : h_.levels_[level]) {
      const HbsNode& nd = nodes[id];
      if (nd.is_leaf()) {
        bloc[id] = b.segment(nd.begin, nd.end - nd.begin);
      } else {
        bloc[id].resize(bhat[nd.child[0]].size() + bhat[nd.child[1]].size());
        bloc[id] << bhat[nd.child[0]], bhat[nd.child[1]];
      }
      z[id] = nd.d_lu.solve(bloc[id]);
      c[id] = nd.w * z[id];
      bhat[id] = nd.d_hat * c[id];
    }
  }
  // Root solve.
  const HbsNode& root = nodes[0];
  CVec broot(bhat[root.child[0]].size() + bhat[root.child[1]].size());
  broot << bhat[root.child[0]], bhat[root.child[1]];
  CVec xroot = root_lu_.solve(broot);

  CVec x = CVec::Zero(h_.n_);
  std::vector<CVec> zeta(nodes.size());
  zeta[root.child[0]] = xroot.head(bhat[root.child[0]].size());
  zeta[root.child[1]] = xroot.tail(bhat[root.child[1]].size());
  for (int level = 1; level < static_cast<int>(h_.levels_.size()); ++level) {
    for (int id : h_.levels_[level]) {
      const HbsNode& nd = nodes[id];
      const CVec y = nd.d_hat * (c[id] - zeta[id]);
      const CVec xl = z[id] - nd.d_inv_u * y;
      if (nd.is_leaf()) {
        x.segment(nd.begin, nd.end - nd.begin) = xl;
      } else {
        zeta[nd.child[0]] = xl.head(bhat[nd.child[0]].size());
        zeta[nd.child[1]] = xl.tail(bhat[nd.child[1]].size());
      }
    }
  }
  return x;
}

CMat HbsInverse::solve(const CMat& b) const {
  CMat out(b.rows(), b.cols());
  for (int j = 0; j < b.cols(); ++j) out.col(j) = solve(CVec(b.col(j)));
  return out;
}

HbsInverse hbs_invert(const HbsMatrix& h) { return HbsInverse(h); }

}  // namespace strata
