#include "strata/oracle.hpp"

#include <Eigen/QR>

namespace strata {

namespace {

constexpr int kDenseGuard = 20000;

struct HatBlocks {
  std::vector<CMat> qhat;        // per layer
  std::vector<CMat> chat_above;  // per layer, cols = 2N_{l-1}
  std::vector<CMat> chat_below;  // per layer, cols = 2N_l
};

HatBlocks hat_blocks(const Geometry& geo, Cplx alpha, double kappa0) {
  const ProblemSpec& spec = geo.spec;
  const int num_layers = spec.num_layers();
  const int num_if = spec.num_interfaces();
  HatBlocks hb;
  hb.qhat.resize(num_layers);
  hb.chat_above.resize(num_layers);
  hb.chat_below.resize(num_layers);
  const RayleighBlochBasis rb_up = make_rb_basis(kappa0, spec.omega[0], spec.period,
                                                 spec.aux.rb_terms, geo.cell.y_up, RbDirection::Up);
  const RayleighBlochBasis rb_down =
      make_rb_basis(kappa0, spec.omega[num_layers - 1], spec.period, spec.aux.rb_terms,
                    geo.cell.y_down, RbDirection::Down);
  for (int l = 0; l < num_layers; ++l) {
    const CMat q = combine_proxy_wall(assemble_Q(geo, l), alpha);
    if (l == 0 || l == num_layers - 1) {
      const bool top = (l == 0);
      const CMat w = assemble_W(top ? rb_up : rb_down, top ? geo.cell.top_x : geo.cell.bottom_x);
      const CMat v = top ? assemble_V_top(geo) : assemble_V_bottom(geo);
      CMat qh = CMat::Zero(q.rows() + w.rows(), q.cols() + w.cols());
      qh.topLeftCorner(q.rows(), q.cols()) = q;
      qh.bottomLeftCorner(v.rows(), v.cols()) = v;
      qh.bottomRightCorner(w.rows(), w.cols()) = w;
      hb.qhat[l] = qh;
    } else {
      hb.qhat[l] = q;
    }
    const int extra = (l == 0 || l == num_layers - 1) ? 2 * spec.aux.top_points : 0;
    if (l >= 1) {
      const CMat c = combine_wall(assemble_C(geo, l, l - 1), alpha);
      hb.chat_above[l] = CMat::Zero(c.rows() + extra, c.cols());
      hb.chat_above[l].topRows(c.rows()) = c;
      if (l == num_layers - 1)
        hb.chat_above[l].bottomRows(extra) = combine_triplet(assemble_Z_bottom(geo), alpha);
    }
    if (l <= num_if - 1) {
      const CMat c = combine_wall(assemble_C(geo, l, l), alpha);
      hb.chat_below[l] = CMat::Zero(c.rows() + extra, c.cols());
      hb.chat_below[l].topRows(c.rows()) = c;
      if (l == 0) hb.chat_below[l].bottomRows(extra) = combine_triplet(assemble_Z_top(geo), alpha);
    }
  }
  return hb;
}

ScatteringSolution split_solution(const Geometry& geo, const IncidentWave& wave,
                                  const BlochPhase& bp, const CVec& sigma, const CVec& x,
                                  const std::vector<int>& sigma_off,
                                  const std::vector<int>& x_off) {
  const ProblemSpec& spec = geo.spec;
  const int num_if = spec.num_interfaces();
  const int num_layers = spec.num_layers();
  const int nb = 2 * spec.aux.rb_terms + 1;
  ScatteringSolution sol;
  sol.wave = wave;
  sol.kappa0 = bp.kappa0;
  sol.order_shift = bp.order_shift;
  sol.period = spec.period;
  sol.omega_top = spec.omega[0];
  sol.omega_bottom = spec.omega[num_layers - 1];
  sol.sigma.resize(num_if);
  for (int i = 0; i < num_if; ++i)
    sol.sigma[i] = sigma.segment(sigma_off[i], 2 * geo.interfaces[i].n());
  sol.proxy_c.resize(num_layers);
  for (int l = 0; l < num_layers; ++l) {
    sol.proxy_c[l] = x.segment(x_off[l], spec.aux.proxy_points);
    if (l == 0) sol.a_up = x.segment(x_off[l] + spec.aux.proxy_points, nb);
    if (l == num_layers - 1) sol.a_down = x.segment(x_off[l] + spec.aux.proxy_points, nb);
  }
  return sol;
}

}  // namespace

CMat dense_A_block(const Geometry& geo, int i, int j, Cplx alpha) {
  if (i == j) {
    CMat a = assemble_A_self(geo, i);
    a += alpha * make_A_copy(geo, i, +1).dense();
    a += (1.0 / alpha) * make_A_copy(geo, i, -1).dense();
    return a;
  }
  CMat a = make_A_vertical(geo, i, j, 0).dense();
  a += alpha * make_A_vertical(geo, i, j, +1).dense();
  a += (1.0 / alpha) * make_A_vertical(geo, i, j, -1).dense();
  return a;
}

DenseSystem assemble_dense_system(const Geometry& geo, const IncidentWave& wave) {
  const ProblemSpec& spec = geo.spec;
  const int num_if = spec.num_interfaces();
  const int num_layers = spec.num_layers();
  const int nb = 2 * spec.aux.rb_terms + 1;
  const BlochPhase bp = bloch_phase(wave.theta, spec.omega[0], spec.period);
  DenseSystem sys;

  sys.sigma_off.resize(num_if);
  for (int i = 0; i < num_if; ++i) {
    sys.sigma_off[i] = sys.sigma_dim;
    sys.sigma_dim += 2 * geo.interfaces[i].n();
  }
  sys.x_off.resize(num_layers);
  for (int l = 0; l < num_layers; ++l) {
    sys.x_off[l] = sys.xdim;
    sys.xdim += spec.aux.proxy_points + ((l == 0 || l == num_layers - 1) ? nb : 0);
  }
  sys.row_off.resize(num_layers);
  for (int l = 0; l < num_layers; ++l) {
    sys.row_off[l] = sys.hat_rows;
    sys.hat_rows +=
        2 * spec.aux.wall_points + ((l == 0 || l == num_layers - 1) ? 2 * spec.aux.top_points : 0);
  }
  if (sys.sigma_dim + sys.xdim > kDenseGuard)
    throw SpecError("dense oracle: problem exceeds the desk-scale size guard");

  sys.a = CMat::Zero(sys.sigma_dim, sys.sigma_dim);
  for (int i = 0; i < num_if; ++i)
    for (int j = std::max(0, i - 1); j <= std::min(num_if - 1, i + 1); ++j)
      sys.a.block(sys.sigma_off[i], sys.sigma_off[j], 2 * geo.interfaces[i].n(),
                  2 * geo.interfaces[j].n()) = dense_A_block(geo, i, j, bp.alpha);

  sys.bhat = CMat::Zero(sys.sigma_dim, sys.xdim);
  for (int i = 0; i < num_if; ++i) {
    sys.bhat.block(sys.sigma_off[i], sys.x_off[i], 2 * geo.interfaces[i].n(),
                   spec.aux.proxy_points) = assemble_B(geo, i, i);
    sys.bhat.block(sys.sigma_off[i], sys.x_off[i + 1], 2 * geo.interfaces[i].n(),
                   spec.aux.proxy_points) = assemble_B(geo, i, i + 1);
  }

  const HatBlocks hb = hat_blocks(geo, bp.alpha, bp.kappa0);
  sys.chat = CMat::Zero(sys.hat_rows, sys.sigma_dim);
  sys.qhat = CMat::Zero(sys.hat_rows, sys.xdim);
  for (int l = 0; l < num_layers; ++l) {
    const int r0 = sys.row_off[l];
    if (l >= 1)
      sys.chat.block(r0, sys.sigma_off[l - 1], hb.chat_above[l].rows(), hb.chat_above[l].cols()) =
          hb.chat_above[l];
    if (l <= num_if - 1)
      sys.chat.block(r0, sys.sigma_off[l], hb.chat_below[l].rows(), hb.chat_below[l].cols()) =
          hb.chat_below[l];
    sys.qhat.block(r0, sys.x_off[l], hb.qhat[l].rows(), hb.qhat[l].cols()) = hb.qhat[l];
  }
  sys.f = assemble_rhs(geo, wave);
  return sys;
}

ScatteringSolution dense_solve(const Geometry& geo, const IncidentWave& wave) {
  const DenseSystem sys = assemble_dense_system(geo, wave);
  const int rows = sys.sigma_dim + sys.hat_rows;
  const int cols = sys.sigma_dim + sys.xdim;
  CMat m(rows, cols);
  m.topLeftCorner(sys.sigma_dim, sys.sigma_dim) = sys.a;
  m.topRightCorner(sys.sigma_dim, sys.xdim) = sys.bhat;
  m.bottomLeftCorner(sys.hat_rows, sys.sigma_dim) = sys.chat;
  m.bottomRightCorner(sys.hat_rows, sys.xdim) = sys.qhat;
  CVec rhs = CVec::Zero(rows);
  rhs.head(sys.sigma_dim) = sys.f;
  const CVec u = m.completeOrthogonalDecomposition().solve(rhs);
  const BlochPhase bp = bloch_phase(wave.theta, geo.spec.omega[0], geo.spec.period);
  return split_solution(geo, wave, bp, u.head(sys.sigma_dim), u.tail(sys.xdim), sys.sigma_off,
                        sys.x_off);
}

ScatteringSolution part1_block_solve(const Geometry& geo, const IncidentWave& wave) {
  const DenseSystem sys = assemble_dense_system(geo, wave);
  Eigen::PartialPivLU<CMat> lu(sys.a);
  {
    const RVec diag = lu.matrixLU().diagonal().cwiseAbs();
    if (diag.minCoeff() < 1e-15 * diag.maxCoeff())
      throw NumericalError("part1_block_solve: A is numerically singular");
  }
  const CMat a_inv_b = lu.solve(sys.bhat);
  const CVec a_inv_f = lu.solve(sys.f);
  const CMat schur = sys.qhat - sys.chat * a_inv_b;
  const TruncatedPinv pinv = truncated_pinv(schur, geo.spec.tol.schur);
  const CVec x = -pinv.apply(CVec(sys.chat * a_inv_f));
  const CVec sigma = a_inv_f - a_inv_b * x;
  const BlochPhase bp = bloch_phase(wave.theta, geo.spec.omega[0], geo.spec.period);
  return split_solution(geo, wave, bp, sigma, x, sys.sigma_off, sys.x_off);
}

DenseSchur dense_schur(const Geometry& geo, const IncidentWave& wave) {
  const ProblemSpec& spec = geo.spec;
  const int num_if = spec.num_interfaces();
  const BlochPhase bp = bloch_phase(wave.theta, spec.omega[0], spec.period);
  const HatBlocks hb = hat_blocks(geo, bp.alpha, bp.kappa0);

  std::vector<TruncatedPinv> pinv;
  for (const CMat& q : hb.qhat) pinv.push_back(truncated_pinv(q, spec.tol.schur));

  auto bhat_block = [&](int i, int l) {
    CMat b = assemble_B(geo, i, l);
    if (l == 0 || l == spec.num_layers() - 1) {
      CMat bp2 = CMat::Zero(b.rows(), b.cols() + 2 * spec.aux.rb_terms + 1);
      bp2.leftCols(b.cols()) = b;
      return bp2;
    }
    return b;
  };
  auto chat_block = [&](int l, int j) -> const CMat& {
    return (j == l - 1) ? hb.chat_above[l] : hb.chat_below[l];
  };

  DenseSchur out;
  for (int i = 0; i < num_if; ++i) {
    for (int j = std::max(0, i - 1); j <= std::min(num_if - 1, i + 1); ++j) {
      CMat s = dense_A_block(geo, i, j, bp.alpha);
      CMat p = s;
      if (i == j) {
        p -= assemble_A_self(geo, i);  // P keeps only the pm part on the diagonal
      }
      for (int l : {i, i + 1}) {
        if (j != l - 1 && j != l) continue;
        const CMat term = bhat_block(i, l) * pinv[l].apply(chat_block(l, j));
        s -= term;
        p -= term;
      }
      out.s[{i, j}] = std::move(s);
      out.p[{i, j}] = std::move(p);
    }
  }
  return out;
}

}  // namespace strata
