#include "strata/solver.hpp"

#include <chrono>
#include <iostream>
#include <numeric>

#include "strata/analysis.hpp"

namespace strata {

namespace {

double now_seconds() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

Eigen::PartialPivLU<CMat> checked_block_lu(const CMat& m, int block_index) {
  Eigen::PartialPivLU<CMat> lu(m);
  if (m.rows() > 0) {
    const RVec diag = lu.matrixLU().diagonal().cwiseAbs();
    if (diag.minCoeff() < 1e-14 * std::max(1e-300, diag.maxCoeff()))
      throw NumericalError("block_thomas: singular pivot block " + std::to_string(block_index));
  }
  return lu;
}

}  // namespace

BlockThomas block_thomas_factor(const std::vector<CMat>& diag, const std::vector<CMat>& lower,
                                const std::vector<CMat>& upper) {
  const int n = static_cast<int>(diag.size());
  BlockThomas f;
  f.sizes.resize(n);
  f.lower.resize(n);
  f.upper = upper;
  CMat t = diag[0];
  f.pivot_lu.push_back(checked_block_lu(t, 0));
  f.sizes[0] = static_cast<int>(t.rows());
  for (int i = 1; i < n; ++i) {
    f.lower[i] = lower[i] * f.pivot_lu[i - 1].inverse();
    t = diag[i] - f.lower[i] * upper[i - 1];
    f.pivot_lu.push_back(checked_block_lu(t, i));
    f.sizes[i] = static_cast<int>(t.rows());
  }
  return f;
}

CVec block_thomas_solve(const BlockThomas& f, const CVec& rhs) {
  const int n = static_cast<int>(f.sizes.size());
  std::vector<CVec> y(n), x(n);
  int at = 0;
  for (int i = 0; i < n; ++i) {
    y[i] = rhs.segment(at, f.sizes[i]);
    at += f.sizes[i];
    if (i > 0) y[i] -= f.lower[i] * y[i - 1];
  }
  x[n - 1] = f.pivot_lu[n - 1].solve(y[n - 1]);
  for (int i = n - 2; i >= 0; --i) x[i] = f.pivot_lu[i].solve(CVec(y[i] - f.upper[i] * x[i + 1]));
  CVec out(rhs.size());
  at = 0;
  for (int i = 0; i < n; ++i) {
    out.segment(at, f.sizes[i]) = x[i];
    at += f.sizes[i];
  }
  return out;
}

// --- proxy surrogates for compression --------------------------------------

namespace {

struct ClusterCircle {
  Point center;
  double radius = 0.0;
  std::vector<Point> pts;
};

ClusterCircle cluster_circle(const std::vector<Point>& pts, double omega_max) {
  ClusterCircle c;
  double xlo = 1e300, xhi = -1e300, ylo = 1e300, yhi = -1e300;
  for (const Point& p : pts) {
    xlo = std::min(xlo, p.x);
    xhi = std::max(xhi, p.x);
    ylo = std::min(ylo, p.y);
    yhi = std::max(yhi, p.y);
  }
  c.center = Point(0.5 * (xlo + xhi), 0.5 * (ylo + yhi));
  double r = 0.0;
  for (const Point& p : pts) r = std::max(r, dist(p, c.center));
  c.radius = 1.8 * std::max(r, 1e-8);
  const int npts = std::max(50, static_cast<int>(1.2 * omega_max * c.radius) + 30);
  for (int j = 0; j < npts; ++j) {
    const double a = 2.0 * kPi * (j + 0.5) / npts;
    c.pts.emplace_back(c.center.x + c.radius * std::cos(a), c.center.y + c.radius * std::sin(a));
  }
  return c;
}

/// Columns spanning external Helmholtz fields (value and normal derivative)
/// sampled at interface unknowns given by row ids.
CMat field_row_surrogate(const DiscretizedInterface& di, const std::vector<int>& ids,
                         const std::vector<double>& omegas) {
  std::vector<Point> pts;
  for (int id : ids) pts.push_back(di.pts[id / 2]);
  const double wmax = *std::max_element(omegas.begin(), omegas.end());
  const ClusterCircle c = cluster_circle(pts, wmax);
  CMat out(ids.size(), 2 * omegas.size() * c.pts.size());
  int col = 0;
  for (double w : omegas) {
    const HelmholtzKernel kern(w);
    for (const Point& p : c.pts) {
      const Vec2 ep((p.x - c.center.x) / c.radius, (p.y - c.center.y) / c.radius);
      for (std::size_t r = 0; r < ids.size(); ++r) {
        const int k = ids[r] / 2;
        const KernelBlock2 kb = kern.eval(di.pts[k], di.normals[k], p, ep);
        if (ids[r] % 2 == 0) {
          out(r, col) = kb.s;
          out(r, col + 1) = kb.d;
        } else {
          out(r, col) = kb.sp;
          out(r, col + 1) = kb.dp;
        }
      }
      col += 2;
    }
  }
  return out;
}

/// Rows spanning the radiated field of the column sources (both densities),
/// sampled on a circle surrounding the sources.
CMat field_col_surrogate(const DiscretizedInterface& di, double shift,
                         const std::vector<int>& ids, const std::vector<double>& omegas) {
  std::vector<Point> pts;
  for (int id : ids) pts.push_back(di.node_shifted(id / 2, shift));
  const double wmax = *std::max_element(omegas.begin(), omegas.end());
  const ClusterCircle c = cluster_circle(pts, wmax);
  CMat out(2 * omegas.size() * c.pts.size(), ids.size());
  int row = 0;
  for (double w : omegas) {
    const HelmholtzKernel kern(w);
    for (const Point& p : c.pts) {
      const Vec2 ep((p.x - c.center.x) / c.radius, (p.y - c.center.y) / c.radius);
      for (std::size_t cc = 0; cc < ids.size(); ++cc) {
        const int j = ids[cc] / 2;
        const KernelBlock2 kb = kern.eval(p, ep, di.node_shifted(j, shift), di.normals[j]);
        const double f = di.weights[j] * di.speed[j];
        if (ids[cc] % 2 == 0) {
          out(row, cc) = kb.d * f;
          out(row + 1, cc) = kb.dp * f;
        } else {
          out(row, cc) = kb.s * f;
          out(row + 1, cc) = kb.sp * f;
        }
      }
      row += 2;
    }
  }
  return out;
}

/// A^s plus the transmission jump, exposed to the HBS compressor with
/// proxy-field surrogates so assembly stays O(N).
class SelfSource : public MatrixSource {
 public:
  SelfSource(const NystromOperator* op, const DiscretizedInterface* di, double wa, double wb)
      : op_(op), di_(di), omegas_{wa, wb} {}

  int dim() const override { return 2 * di_->n(); }

  CMat block(const std::vector<int>& rows, const std::vector<int>& cols) const override {
    CMat m = op_->extract(rows, cols);
    for (std::size_t r = 0; r < rows.size(); ++r)
      for (std::size_t c = 0; c < cols.size(); ++c)
        if (rows[r] == cols[c]) m(r, c) += (rows[r] % 2 == 0) ? 1.0 : -1.0;
    return m;
  }

  std::vector<int> near_complement(const std::vector<int>& cluster) const override {
    std::vector<Point> pts;
    for (int id : cluster) pts.push_back(di_->pts[id / 2]);
    const ClusterCircle c = cluster_circle(pts, std::max(omegas_[0], omegas_[1]));
    std::vector<bool> in(dim(), false);
    for (int id : cluster) in[id] = true;
    std::vector<int> out;
    for (int id = 0; id < dim(); ++id)
      if (!in[id] && dist(di_->pts[id / 2], c.center) <= c.radius) out.push_back(id);
    return out;
  }

  CMat row_surrogate(const std::vector<int>& cluster) const override {
    return field_row_surrogate(*di_, cluster, omegas_);
  }

  CMat col_surrogate(const std::vector<int>& cluster) const override {
    return field_col_surrogate(*di_, 0.0, cluster, omegas_);
  }

 private:
  const NystromOperator* op_;
  const DiscretizedInterface* di_;
  std::vector<double> omegas_;
};

/// Low-rank factorization of a wide Nystrom block without dense assembly:
/// chunk-local column skeletons merged by a global interpolative pass.
LowRankFactor factor_nystrom_block(const NystromOperator& op, const DiscretizedInterface& src,
                                   double shift, const std::vector<double>& omegas, double eps,
                                   PhaseTag tag) {
  const int rows = op.rows();
  const int panels_per_chunk = 4;
  std::vector<std::vector<int>> chunks;
  for (std::size_t p = 0; p < src.panels.size(); p += panels_per_chunk) {
    std::vector<int> ids;
    for (std::size_t pp = p; pp < std::min(src.panels.size(), p + panels_per_chunk); ++pp)
      for (int m = 0; m < src.panels[pp].num_nodes; ++m) {
        const int node = src.panels[pp].first_node + m;
        ids.push_back(2 * node);
        ids.push_back(2 * node + 1);
      }
    chunks.push_back(std::move(ids));
  }

  const double wmax = *std::max_element(omegas.begin(), omegas.end());
  std::vector<int> union_cols;
  std::vector<CMat> interps;  // per chunk: k_c x |chunk|
  std::vector<int> union_chunk;  // chunk id per union column
  for (std::size_t c = 0; c < chunks.size(); ++c) {
    const std::vector<int>& ids = chunks[c];
    std::vector<Point> pts;
    for (int id : ids) pts.push_back(src.node_shifted(id / 2, shift));
    const ClusterCircle circ = cluster_circle(pts, wmax);
    std::vector<int> near_rows;
    const auto& tg = op.targets();
    for (std::size_t k = 0; k < tg.pts.size(); ++k)
      if (dist(tg.pts[k], circ.center) <= circ.radius) {
        near_rows.push_back(2 * static_cast<int>(k));
        near_rows.push_back(2 * static_cast<int>(k) + 1);
      }
    const CMat a = op.extract(near_rows, ids);
    const CMat b = field_col_surrogate(src, shift, ids, omegas);
    CMat sample(a.rows() + b.rows(), ids.size());
    sample << a, b;
    ColId cid = col_id(sample, 0.3 * eps);
    for (int s : cid.skeleton) {
      union_cols.push_back(ids[s]);
      union_chunk.push_back(static_cast<int>(c));
    }
    interps.push_back(std::move(cid.interp));
  }

  std::vector<int> all_rows(rows);
  std::iota(all_rows.begin(), all_rows.end(), 0);
  const CMat a_union = op.extract(all_rows, union_cols);
  ColId glob = col_id(a_union, eps);
  LowRankFactor f;
  f.tag = tag;
  f.tol = eps;
  f.left = a_union(Eigen::all, glob.skeleton);
  f.right = CMat::Zero(glob.skeleton.size(), op.cols());
  // Stitch: A ~ A(:, union) * blockdiag(chunk interp); A(:, union) ~ L * glob.interp.
  CMat w_union = glob.interp;  // k x |union|
  int u0 = 0;
  for (std::size_t c = 0; c < chunks.size(); ++c) {
    int kc = static_cast<int>(interps[c].rows());
    if (kc == 0) continue;
    CMat wc = w_union.middleCols(u0, kc) * interps[c];  // k x |chunk|
    for (std::size_t j = 0; j < chunks[c].size(); ++j) f.right.col(chunks[c][j]) += wc.col(j);
    u0 += kc;
  }
  return f;
}

LowRankFactor factor_dense_rows(const CMat& m, double eps, PhaseTag tag) {
  RowId rid = row_id(m, eps);
  LowRankFactor f;
  f.tag = tag;
  f.tol = eps;
  f.left = rid.interp;
  f.right = m(rid.skeleton, Eigen::all);
  return f;
}

}  // namespace

// --- SolverState ------------------------------------------------------------

SolverState SolverState::build(const ProblemSpec& spec) {
  SolverState st;
  st.geo_ = build_geometry(spec);
  const int num_if = spec.num_interfaces();
  st.stage1_.resize(num_if);
  double t0 = now_seconds();
  for (int i = 0; i < num_if; ++i) st.build_stage1_for(i);
  st.timings_.stage1 += now_seconds() - t0;

  t0 = now_seconds();
  const int num_layers = spec.num_layers();
  st.stage2_.c_above.resize(num_layers);
  st.stage2_.c_below.resize(num_layers);
  st.stage2_.q.resize(num_layers);
  for (int l = 0; l < num_layers; ++l) st.build_stage2_for_layer(l);
  st.build_stage2_tops();
  st.timings_.stage2 += now_seconds() - t0;
  return st;
}

void SolverState::build_stage1_for(int i) {
  const ProblemSpec& spec = geo_.spec;
  const DiscretizedInterface& di = geo_.interfaces[i];
  StageOneArtifacts art;
  const double wa = spec.omega[i], wb = spec.omega[i + 1];
  const std::vector<double> omegas{wa, wb};

  NystromOperator self_op = make_A_self(geo_, i);
  if (spec.dense_fallback) {
    art.dense_lu.emplace(assemble_A_self(geo_, i));
  } else {
    SelfSource src(&self_op, &di, wa, wb);
    art.hbs_inv.emplace(hbs_invert(hbs_compress(src, spec.tol.hbs)));
  }

  {
    NystromOperator plus = make_A_copy(geo_, i, +1);
    art.a_plus = factor_nystrom_block(plus, di, spec.period, omegas, spec.tol.lowrank,
                                      PhaseTag::Alpha);
    NystromOperator minus = make_A_copy(geo_, i, -1);
    art.a_minus = factor_nystrom_block(minus, di, -spec.period, omegas, spec.tol.lowrank,
                                       PhaseTag::AlphaInv);
  }
  const PhaseTag tags[3] = {PhaseTag::One, PhaseTag::Alpha, PhaseTag::AlphaInv};
  const int copies[3] = {0, +1, -1};
  if (i > 0) {
    for (int c = 0; c < 3; ++c) {
      NystromOperator op = make_A_vertical(geo_, i, i - 1, copies[c]);
      art.vert_up[c] = factor_nystrom_block(op, geo_.interfaces[i - 1], copies[c] * spec.period,
                                            {spec.omega[i]}, spec.tol.lowrank, tags[c]);
    }
  }
  if (i < spec.num_interfaces() - 1) {
    for (int c = 0; c < 3; ++c) {
      NystromOperator op = make_A_vertical(geo_, i, i + 1, copies[c]);
      art.vert_down[c] = factor_nystrom_block(op, geo_.interfaces[i + 1], copies[c] * spec.period,
                                              {spec.omega[i + 1]}, spec.tol.lowrank, tags[c]);
    }
  }
  art.b_up_dense = assemble_B(geo_, i, i);
  art.b_up = factor_dense_rows(art.b_up_dense, spec.tol.lowrank, PhaseTag::One);
  art.b_down_dense = assemble_B(geo_, i, i + 1);
  art.b_down = factor_dense_rows(art.b_down_dense, spec.tol.lowrank, PhaseTag::One);
  stage1_[i] = std::move(art);
}

void SolverState::build_stage2_for_layer(int l) {
  const int num_if = geo_.spec.num_interfaces();
  if (l >= 1) stage2_.c_above[l] = assemble_C(geo_, l, l - 1);
  if (l <= num_if - 1) stage2_.c_below[l] = assemble_C(geo_, l, l);
  stage2_.q[l] = assemble_Q(geo_, l);
}

void SolverState::build_stage2_tops() {
  stage2_.z_top = assemble_Z_top(geo_);
  stage2_.z_bottom = assemble_Z_bottom(geo_);
  stage2_.v_top = assemble_V_top(geo_);
  stage2_.v_bottom = assemble_V_bottom(geo_);
}

CVec SolverState::solve_A0(int i, const CVec& rhs) const {
  if (stage1_[i].dense_lu) {
    return stage1_[i].dense_lu->solve(rhs);
  }
  return stage1_[i].hbs_inv->solve(rhs);
}

CMat SolverState::solve_A0(int i, const CMat& rhs) const {
  if (stage1_[i].dense_lu) {
    return stage1_[i].dense_lu->solve(rhs);
  }
  return stage1_[i].hbs_inv->solve(rhs);
}

PhaseArtifacts& SolverState::ensure_phase(const BlochPhase& bp) {
  const std::pair<long long, long long> key{std::llround(bp.alpha.real() * 1e12),
                                            std::llround(bp.alpha.imag() * 1e12)};
  auto it = phase_cache_.find(key);
  if (it != phase_cache_.end()) return it->second;

  const double t0 = now_seconds();
  const ProblemSpec& spec = geo_.spec;
  const int num_if = spec.num_interfaces();
  const int num_layers = spec.num_layers();
  const Cplx alpha = bp.alpha;

  PhaseArtifacts ph;
  ph.alpha = alpha;
  ph.kappa0 = bp.kappa0;
  ph.rb_up = make_rb_basis(bp.kappa0, spec.omega[0], spec.period, spec.aux.rb_terms,
                           geo_.cell.y_up, RbDirection::Up);
  ph.rb_down = make_rb_basis(bp.kappa0, spec.omega[num_layers - 1], spec.period,
                             spec.aux.rb_terms, geo_.cell.y_down, RbDirection::Down);

  // Per-layer hatted Q blocks and their truncated pseudoinverses.
  ph.qhat_pinv.reserve(num_layers);
  ph.chat_above.resize(num_layers);
  ph.chat_below.resize(num_layers);
  for (int l = 0; l < num_layers; ++l) {
    const CMat q = combine_proxy_wall(stage2_.q[l], alpha);
    CMat qhat;
    if (l == 0) {
      const CMat w = assemble_W(ph.rb_up, geo_.cell.top_x);
      qhat = CMat::Zero(q.rows() + w.rows(), q.cols() + w.cols());
      qhat.topLeftCorner(q.rows(), q.cols()) = q;
      qhat.bottomLeftCorner(stage2_.v_top.rows(), stage2_.v_top.cols()) = stage2_.v_top;
      qhat.bottomRightCorner(w.rows(), w.cols()) = w;
    } else if (l == num_layers - 1) {
      const CMat w = assemble_W(ph.rb_down, geo_.cell.bottom_x);
      qhat = CMat::Zero(q.rows() + w.rows(), q.cols() + w.cols());
      qhat.topLeftCorner(q.rows(), q.cols()) = q;
      qhat.bottomLeftCorner(stage2_.v_bottom.rows(), stage2_.v_bottom.cols()) = stage2_.v_bottom;
      qhat.bottomRightCorner(w.rows(), w.cols()) = w;
    } else {
      qhat = q;
    }
    try {
      ph.qhat_pinv.push_back(truncated_pinv(qhat, spec.tol.schur));
    } catch (const NumericalError&) {
      throw NumericalError("precompute_stage3: degenerate quasi-periodicity block for layer " +
                           std::to_string(l + 1));
    }

    const int extra = (l == 0 || l == num_layers - 1) ? 2 * spec.aux.top_points : 0;
    if (l >= 1) {
      const CMat c = combine_wall(*stage2_.c_above[l], alpha);
      ph.chat_above[l] = CMat::Zero(c.rows() + extra, c.cols());
      ph.chat_above[l].topRows(c.rows()) = c;
      if (l == num_layers - 1)
        ph.chat_above[l].bottomRows(extra) = combine_triplet(stage2_.z_bottom, alpha);
    }
    if (l <= num_if - 1) {
      const CMat c = combine_wall(*stage2_.c_below[l], alpha);
      ph.chat_below[l] = CMat::Zero(c.rows() + extra, c.cols());
      ph.chat_below[l].topRows(c.rows()) = c;
      if (l == 0) ph.chat_below[l].bottomRows(extra) = combine_triplet(stage2_.z_top, alpha);
    }
  }

  // Low-rank factors of B Q^+ C per (interface, adjacent layer), columns split
  // over the layer's adjacent interfaces.
  struct Bqc {
    CMat r_above, r_below;  // k x 2N_{l-1}, k x 2N_l
    const CMat* left;
  };
  std::vector<Bqc> bqc_up(num_if), bqc_down(num_if);
  for (int i = 0; i < num_if; ++i) {
    {  // layer l = i
      const int l = i;
      CMat c(ph.qhat_pinv[l].u_hat_star.cols(),
             (l >= 1 ? ph.chat_above[l].cols() : 0) + ph.chat_below[l].cols());
      if (l >= 1)
        c << ph.chat_above[l], ph.chat_below[l];
      else
        c << ph.chat_below[l];
      LowRankFactor f = factor_BQC(stage1_[i].b_up, ph.qhat_pinv[l], c);
      Bqc b;
      b.left = &stage1_[i].b_up.left;
      if (l >= 1) {
        b.r_above = f.right.leftCols(ph.chat_above[l].cols());
        b.r_below = f.right.rightCols(ph.chat_below[l].cols());
      } else {
        b.r_below = f.right;
      }
      bqc_up[i] = std::move(b);
    }
    {  // layer l = i + 1
      const int l = i + 1;
      CMat c(ph.qhat_pinv[l].u_hat_star.cols(),
             ph.chat_above[l].cols() + (l <= num_if - 1 ? ph.chat_below[l].cols() : 0));
      if (l <= num_if - 1)
        c << ph.chat_above[l], ph.chat_below[l];
      else
        c << ph.chat_above[l];
      LowRankFactor f = factor_BQC(stage1_[i].b_down, ph.qhat_pinv[l], c);
      Bqc b;
      b.left = &stage1_[i].b_down.left;
      b.r_above = f.right.leftCols(ph.chat_above[l].cols());
      if (l <= num_if - 1) b.r_below = f.right.rightCols(ph.chat_below[l].cols());
      bqc_down[i] = std::move(b);
    }
  }

  // P blocks, combined part-wise with the Bloch phases.
  std::map<std::pair<int, int>, LowRankFactor> blocks;
  const double rc_eps = spec.tol.lowrank;
  for (int i = 0; i < num_if; ++i) {
    const StageOneArtifacts& a = stage1_[i];
    {
      LowRankFactor up{*bqc_up[i].left, bqc_up[i].r_below, PhaseTag::One, 0.0, false};
      LowRankFactor dn{*bqc_down[i].left, bqc_down[i].r_above, PhaseTag::One, 0.0, false};
      blocks[{i, i}] = combine_P_block(
          {{&a.a_plus, alpha}, {&a.a_minus, 1.0 / alpha}, {&up, -1.0}, {&dn, -1.0}}, rc_eps);
    }
    if (i >= 1) {
      LowRankFactor bq{*bqc_up[i].left, bqc_up[i].r_above, PhaseTag::One, 0.0, false};
      blocks[{i, i - 1}] = combine_P_block({{&a.vert_up[0], 1.0},
                                            {&a.vert_up[1], alpha},
                                            {&a.vert_up[2], 1.0 / alpha},
                                            {&bq, -1.0}},
                                           rc_eps);
    }
    if (i <= num_if - 2) {
      LowRankFactor bq{*bqc_down[i].left, bqc_down[i].r_below, PhaseTag::One, 0.0, false};
      blocks[{i, i + 1}] = combine_P_block({{&a.vert_down[0], 1.0},
                                            {&a.vert_down[1], alpha},
                                            {&a.vert_down[2], 1.0 / alpha},
                                            {&bq, -1.0}},
                                           rc_eps);
    }
  }
  ph.lr = assemble_global_LR(num_if, blocks);

  // Woodbury core: X = I + R A0^{-1} L, block tri-diagonal by construction.
  ph.a0inv_left.resize(num_if);
  for (int i = 0; i < num_if; ++i) ph.a0inv_left[i] = solve_A0(i, ph.lr.left[i]);
  std::vector<CMat> diag(num_if), lower(num_if), upper(num_if);
  ph.core_sizes.resize(num_if);
  for (int i = 0; i < num_if; ++i) {
    const int k = ph.lr.core_dim(i);
    ph.core_sizes[i] = k;
    diag[i] = CMat::Identity(k, k);
    if (auto it2 = ph.lr.right[i].find(i); it2 != ph.lr.right[i].end())
      diag[i] += it2->second * ph.a0inv_left[i];
    if (i > 0)
      if (auto it2 = ph.lr.right[i].find(i - 1); it2 != ph.lr.right[i].end())
        lower[i] = it2->second * ph.a0inv_left[i - 1];
    if (i < num_if - 1)
      if (auto it2 = ph.lr.right[i].find(i + 1); it2 != ph.lr.right[i].end())
        upper[i] = it2->second * ph.a0inv_left[i + 1];
  }
  // Missing couplings (single-interface problems) become empty blocks.
  for (int i = 0; i < num_if; ++i) {
    if (i > 0 && lower[i].size() == 0) lower[i] = CMat::Zero(ph.core_sizes[i], ph.core_sizes[i - 1]);
    if (i < num_if - 1 && upper[i].size() == 0)
      upper[i] = CMat::Zero(ph.core_sizes[i], ph.core_sizes[i + 1]);
  }
  ph.thomas = block_thomas_factor(diag, lower, upper);

  timings_.stage3 += now_seconds() - t0;
  timings_.stage3_builds += 1;
  auto [pos, inserted] = phase_cache_.emplace(key, std::move(ph));
  return pos->second;
}

const PhaseArtifacts& SolverState::phase_artifacts(double theta) {
  return ensure_phase(bloch_phase(theta, geo_.spec.omega[0], geo_.spec.period));
}

ScatteringSolution SolverState::solve_with(const PhaseArtifacts& ph, const IncidentWave& wave,
                                           const BlochPhase& bp) {
  const double t0 = now_seconds();
  const ProblemSpec& spec = geo_.spec;
  const int num_if = spec.num_interfaces();
  const int num_layers = spec.num_layers();

  // u0 = A0^{-1} f; the right-hand side lives on the first interface only.
  std::vector<CVec> u0(num_if);
  {
    CVec f0(2 * geo_.interfaces[0].n());
    const DiscretizedInterface& top = geo_.interfaces[0];
    for (int k = 0; k < top.n(); ++k) {
      f0[2 * k] = -wave.value(top.pts[k]);
      f0[2 * k + 1] = -wave.grad_dot(top.normals[k], top.pts[k]);
    }
    u0[0] = solve_A0(0, f0);
    for (int i = 1; i < num_if; ++i) u0[i] = CVec::Zero(2 * geo_.interfaces[i].n());
  }

  // Core solve via block Thomas.
  int core_total = 0;
  for (int k : ph.core_sizes) core_total += k;
  CVec g = CVec::Zero(core_total);
  int at = 0;
  for (int i = 0; i < num_if; ++i) {
    CVec gi = CVec::Zero(ph.core_sizes[i]);
    for (const auto& [j, r] : ph.lr.right[i]) gi += r * u0[j];
    g.segment(at, ph.core_sizes[i]) = gi;
    at += ph.core_sizes[i];
  }
  const CVec y = block_thomas_solve(ph.thomas, g);

  ScatteringSolution sol;
  sol.wave = wave;
  sol.kappa0 = bp.kappa0;
  sol.order_shift = bp.order_shift;
  sol.period = spec.period;
  sol.omega_top = spec.omega[0];
  sol.omega_bottom = spec.omega[num_layers - 1];
  sol.sigma.resize(num_if);
  at = 0;
  for (int i = 0; i < num_if; ++i) {
    sol.sigma[i] = u0[i] - ph.a0inv_left[i] * y.segment(at, ph.core_sizes[i]);
    at += ph.core_sizes[i];
  }

  // Post-processing: x_l = -Qhat_l^+ Chat_l sigma.
  sol.proxy_c.resize(num_layers);
  for (int l = 0; l < num_layers; ++l) {
    const int rows = static_cast<int>(ph.qhat_pinv[l].u_hat_star.cols());
    CVec r = CVec::Zero(rows);
    if (l >= 1) r += ph.chat_above[l] * sol.sigma[l - 1];
    if (l <= num_if - 1) r += ph.chat_below[l] * sol.sigma[l];
    const CVec x = -ph.qhat_pinv[l].apply(r);
    const int np = spec.aux.proxy_points;
    if (l == 0) {
      sol.proxy_c[l] = x.head(np);
      sol.a_up = x.tail(x.size() - np);
    } else if (l == num_layers - 1) {
      sol.proxy_c[l] = x.head(np);
      sol.a_down = x.tail(x.size() - np);
    } else {
      sol.proxy_c[l] = x;
    }
  }
  sol.flux_error = flux_error(sol);
  timings_.solve += now_seconds() - t0;
  timings_.solves += 1;
  return sol;
}

ScatteringSolution SolverState::solve(double theta) {
  const BlochPhase bp = bloch_phase(theta, geo_.spec.omega[0], geo_.spec.period);
  const IncidentWave wave = make_incident(theta, geo_.spec.omega[0], geo_.spec.period);
  const PhaseArtifacts& ph = ensure_phase(bp);
  return solve_with(ph, wave, bp);
}

std::vector<ScatteringSolution> SolverState::sweep(const std::vector<double>& thetas) {
  std::vector<ScatteringSolution> out;
  out.reserve(thetas.size());
  for (double theta : thetas) {
    const BlochPhase bp = bloch_phase(theta, geo_.spec.omega[0], geo_.spec.period);
    if (std::abs(bp.order_shift) > geo_.spec.aux.rb_terms / 2)
      std::cerr << "strata: incident order shift " << bp.order_shift
                << " is large for the shared expansion window (K = " << geo_.spec.aux.rb_terms
                << ")\n";
    const IncidentWave wave = make_incident(theta, geo_.spec.omega[0], geo_.spec.period);
    const PhaseArtifacts& ph = ensure_phase(bp);
    out.push_back(solve_with(ph, wave, bp));
  }
  return out;
}

void SolverState::update_interface(int i, std::shared_ptr<const Curve> curve, int n_points) {
  const double t0 = now_seconds();
  ProblemSpec& spec = geo_.spec;
  if (i < 0 || i >= spec.num_interfaces()) throw SpecError("update_interface: bad index");
  if (n_points > 0) spec.n_points[i] = n_points;
  spec.interfaces[i] = curve;
  spec.validate();

  const PanelPlan plan =
      (i < static_cast<int>(spec.panel_plans.size())) ? spec.panel_plans[i] : PanelPlan{};
  DiscretizedInterface di = discretize_interface(curve, spec.n_points[i], plan);
  // The unit cell stays frozen: the new interface must fit inside it.
  for (const Point& p : di.pts) {
    if (p.y >= geo_.cell.y_up - 0.05 * spec.period || p.y <= geo_.cell.y_down + 0.05 * spec.period)
      throw SpecError("update_interface: new interface leaves the frozen unit cell");
    if (dist(p, geo_.cell.proxy[i].center) >= geo_.cell.proxy[i].radius ||
        dist(p, geo_.cell.proxy[i + 1].center) >= geo_.cell.proxy[i + 1].radius)
      throw SpecError("update_interface: new interface leaves the frozen proxy circles");
  }
  geo_.interfaces[i] = std::move(di);

  build_stage1_for(i);
  const PhaseTag tags[3] = {PhaseTag::One, PhaseTag::Alpha, PhaseTag::AlphaInv};
  const int copies[3] = {0, +1, -1};
  if (i > 0) {
    for (int c = 0; c < 3; ++c) {
      NystromOperator op = make_A_vertical(geo_, i - 1, i, copies[c]);
      stage1_[i - 1].vert_down[c] =
          factor_nystrom_block(op, geo_.interfaces[i], copies[c] * spec.period,
                               {spec.omega[i]}, spec.tol.lowrank, tags[c]);
    }
  }
  if (i < spec.num_interfaces() - 1) {
    for (int c = 0; c < 3; ++c) {
      NystromOperator op = make_A_vertical(geo_, i + 1, i, copies[c]);
      stage1_[i + 1].vert_up[c] =
          factor_nystrom_block(op, geo_.interfaces[i], copies[c] * spec.period,
                               {spec.omega[i + 1]}, spec.tol.lowrank, tags[c]);
    }
  }
  timings_.stage1 += now_seconds() - t0;

  const double t1 = now_seconds();
  stage2_.c_below[i] = assemble_C(geo_, i, i);
  stage2_.c_above[i + 1] = assemble_C(geo_, i + 1, i);
  if (i == 0) stage2_.z_top = assemble_Z_top(geo_);
  if (i == spec.num_interfaces() - 1) stage2_.z_bottom = assemble_Z_bottom(geo_);
  timings_.stage2 += now_seconds() - t1;
  phase_cache_.clear();
}

void SolverState::update_wavenumber(int l, double omega) {
  const double t0 = now_seconds();
  ProblemSpec& spec = geo_.spec;
  if (l < 0 || l >= spec.num_layers()) throw SpecError("update_wavenumber: bad layer");
  if (omega <= 0) throw SpecError("update_wavenumber: wavenumber must be positive");
  spec.omega[l] = omega;

  const int num_if = spec.num_interfaces();
  const PhaseTag tags[3] = {PhaseTag::One, PhaseTag::Alpha, PhaseTag::AlphaInv};
  const int copies[3] = {0, +1, -1};
  // Interfaces adjacent to layer l: i = l-1 (above) and i = l (below).
  for (int i : {l - 1, l}) {
    if (i < 0 || i >= num_if) continue;
    const DiscretizedInterface& di = geo_.interfaces[i];
    StageOneArtifacts& art = stage1_[i];
    const double wa = spec.omega[i], wb = spec.omega[i + 1];
    NystromOperator self_op = make_A_self(geo_, i);
    if (spec.dense_fallback) {
      art.dense_lu.emplace(assemble_A_self(geo_, i));
      art.hbs_inv.reset();
    } else {
      SelfSource src(&self_op, &di, wa, wb);
      art.hbs_inv.emplace(hbs_invert(hbs_compress(src, spec.tol.hbs)));
      art.dense_lu.reset();
    }
    NystromOperator plus = make_A_copy(geo_, i, +1);
    art.a_plus =
        factor_nystrom_block(plus, di, spec.period, {wa, wb}, spec.tol.lowrank, PhaseTag::Alpha);
    NystromOperator minus = make_A_copy(geo_, i, -1);
    art.a_minus = factor_nystrom_block(minus, di, -spec.period, {wa, wb}, spec.tol.lowrank,
                                       PhaseTag::AlphaInv);
  }
  // Vertical blocks through layer l couple interfaces l-1 and l.
  if (l - 1 >= 0 && l < num_if) {
    for (int c = 0; c < 3; ++c) {
      NystromOperator dn = make_A_vertical(geo_, l - 1, l, copies[c]);
      stage1_[l - 1].vert_down[c] = factor_nystrom_block(
          dn, geo_.interfaces[l], copies[c] * spec.period, {omega}, spec.tol.lowrank, tags[c]);
      NystromOperator up = make_A_vertical(geo_, l, l - 1, copies[c]);
      stage1_[l].vert_up[c] = factor_nystrom_block(
          up, geo_.interfaces[l - 1], copies[c] * spec.period, {omega}, spec.tol.lowrank, tags[c]);
    }
  }
  // Proxy blocks radiating with omega_l.
  if (l - 1 >= 0 && l - 1 < num_if) {
    stage1_[l - 1].b_down_dense = assemble_B(geo_, l - 1, l);
    stage1_[l - 1].b_down = factor_dense_rows(stage1_[l - 1].b_down_dense, spec.tol.lowrank,
                                              PhaseTag::One);
  }
  if (l < num_if) {
    stage1_[l].b_up_dense = assemble_B(geo_, l, l);
    stage1_[l].b_up = factor_dense_rows(stage1_[l].b_up_dense, spec.tol.lowrank, PhaseTag::One);
  }
  timings_.stage1 += now_seconds() - t0;

  const double t1 = now_seconds();
  build_stage2_for_layer(l);
  if (l == 0) {
    stage2_.z_top = assemble_Z_top(geo_);
    stage2_.v_top = assemble_V_top(geo_);
  }
  if (l == spec.num_layers() - 1) {
    stage2_.z_bottom = assemble_Z_bottom(geo_);
    stage2_.v_bottom = assemble_V_bottom(geo_);
  }
  timings_.stage2 += now_seconds() - t1;
  phase_cache_.clear();
}

}  // namespace strata
