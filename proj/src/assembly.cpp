#include "strata/assembly.hpp"

#include <algorithm>
#include <cmath>

#include "strata/quadrature.hpp"

namespace strata {

namespace {

double panel_arc_length(const DiscretizedInterface& src, const Panel& p) {
  double len = 0.0;
  for (int m = 0; m < p.num_nodes; ++m)
    len += src.weights[p.first_node + m] * src.speed[p.first_node + m];
  return len;
}

double kernel_scale(const PairKernel& k) {
  if (auto* h = dynamic_cast<const HelmholtzKernel*>(&k)) return 1.0 + h->omega() * h->omega();
  if (auto* t = dynamic_cast<const TransmissionKernel*>(&k)) {
    const double w = std::max(t->omega_above(), t->omega_below());
    return 1.0 + w * w;
  }
  return 1.0;
}

}  // namespace

NystromOperator::NystromOperator(std::shared_ptr<const PairKernel> kernel,
                                 const DiscretizedInterface* source, double source_shift_x,
                                 TargetSet targets, double sign, bool near_corrected,
                                 bool integrate_dp)
    : kernel_(std::move(kernel)),
      source_(source),
      shift_(source_shift_x),
      targets_(std::move(targets)),
      sign_(sign),
      integrate_dp_(integrate_dp) {
  near_.resize(targets_.pts.size());
  if (!near_corrected) return;
  const int np = static_cast<int>(source_->panels.size());
  for (std::size_t k = 0; k < targets_.pts.size(); ++k) {
    for (int p = 0; p < np; ++p) {
      const Panel& pan = source_->panels[p];
      double dmin = 1e300;
      for (int m = 0; m < pan.num_nodes; ++m)
        dmin = std::min(dmin, dist(targets_.pts[k], source_->node_shifted(pan.first_node + m, shift_)));
      if (dmin < 2.0 * panel_arc_length(*source_, pan)) build_near(static_cast<int>(k), p);
    }
  }
}

void NystromOperator::build_near(int target, int panel) {
  const Panel& pan = source_->panels[panel];
  const int q = pan.num_nodes;
  std::vector<double> tn(q);
  for (int m = 0; m < q; ++m) tn[m] = source_->t[pan.first_node + m];
  const std::vector<double> bw = barycentric_weights(tn);
  const Point x = targets_.pts[target];
  const Vec2 dir = targets_.dirs[target];
  const Curve& curve = *source_->curve;

  // Parameter of closest approach within the panel. For a target that is a
  // node of this panel the split must land exactly on the singular parameter.
  double s_star = pan.t0;
  bool hinted = false;
  if (target < static_cast<int>(targets_.on_curve_param.size())) {
    const double th = targets_.on_curve_param[target];
    if (th >= pan.t0 - 1e-14 && th <= pan.t1 + 1e-14) {
      Point y = curve.eval(th);
      y.x += shift_;
      hinted = dist(y, x) < 1e-12;
      if (hinted) s_star = std::clamp(th, pan.t0, pan.t1);
    }
  }
  if (!hinted) {
    auto d2 = [&](double s) {
      Point y = curve.eval(s);
      y.x += shift_;
      return (y - x).norm();
    };
    double best = 1e300;
    const int samples = 64;
    for (int i = 0; i <= samples; ++i) {
      const double s = pan.t0 + (pan.t1 - pan.t0) * i / samples;
      const double v = d2(s);
      if (v < best) {
        best = v;
        s_star = s;
      }
    }
    double lo = std::max(pan.t0, s_star - (pan.t1 - pan.t0) / samples);
    double hi = std::min(pan.t1, s_star + (pan.t1 - pan.t0) / samples);
    for (int it = 0; it < 40; ++it) {
      const double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
      if (d2(m1) < d2(m2))
        hi = m2;
      else
        lo = m1;
    }
    s_star = 0.5 * (lo + hi);
  }

  auto integrand = [&](double s, CVec& out) {
    Point y = curve.eval(s);
    y.x += shift_;
    if (dist(y, x) < 1e-14) {  // sub-roundoff slice around the singular point
      out.setZero();
      return;
    }
    const Point dv = curve.deriv(s);
    const double sp = std::hypot(dv.x, dv.y);
    const Vec2 ny(-dv.y / sp, dv.x / sp);
    const KernelBlock2 kb = kernel_->eval(x, dir, y, ny);
    double denom = 0.0;
    int exact = -1;
    for (int m = 0; m < q; ++m) {
      if (std::abs(s - tn[m]) < 1e-15) exact = m;
      denom += bw[m] / (s - tn[m]);
    }
    for (int m = 0; m < q; ++m) {
      const double lm = (exact >= 0) ? (m == exact ? 1.0 : 0.0) : (bw[m] / (s - tn[m])) / denom;
      const double f = lm * sp;
      out[4 * m + 0] = kb.d * f;
      out[4 * m + 1] = kb.s * f;
      out[4 * m + 2] = integrate_dp_ ? kb.dp * f : 0.0;
      out[4 * m + 3] = kb.sp * f;
    }
  };

  const double tol = 3e-15 * kernel_scale(*kernel_) * std::max(1.0, panel_arc_length(*source_, pan));
  CVec acc = CVec::Zero(4 * q);
  const double eps = 1e-13 * (pan.t1 - pan.t0);
  if (s_star > pan.t0 + eps && s_star < pan.t1 - eps) {
    adaptive_integrate(integrand, pan.t0, s_star, tol, acc);
    adaptive_integrate(integrand, s_star, pan.t1, tol, acc);
  } else {
    adaptive_integrate(integrand, pan.t0, pan.t1, tol, acc);
  }

  NearBlock nb;
  nb.panel = panel;
  nb.m.resize(2, 2 * q);
  for (int m = 0; m < q; ++m) {
    nb.m(0, 2 * m) = sign_ * acc[4 * m + 0];
    nb.m(0, 2 * m + 1) = sign_ * acc[4 * m + 1];
    nb.m(1, 2 * m) = sign_ * acc[4 * m + 2];
    nb.m(1, 2 * m + 1) = sign_ * acc[4 * m + 3];
  }
  near_[target].push_back(std::move(nb));
}

const NystromOperator::NearBlock* NystromOperator::near_block(int target, int panel) const {
  for (const NearBlock& nb : near_[target])
    if (nb.panel == panel) return &nb;
  return nullptr;
}

KernelBlock2 NystromOperator::raw(int target, int node) const {
  const Point y = source_->node_shifted(node, shift_);
  KernelBlock2 kb = kernel_->eval(targets_.pts[target], targets_.dirs[target], y,
                                  source_->normals[node]);
  const double f = sign_ * source_->weights[node] * source_->speed[node];
  kb.d *= f;
  kb.s *= f;
  kb.dp *= f;
  kb.sp *= f;
  return kb;
}

Cplx NystromOperator::entry(int i, int j) const {
  const int nt = static_cast<int>(targets_.pts.size());
  int target, rc;
  if (targets_.layout == RowLayout::Interleaved) {
    target = i / 2;
    rc = i % 2;
  } else {
    target = (i < nt) ? i : i - nt;
    rc = (i < nt) ? 0 : 1;
  }
  const int node = j / 2, cc = j % 2;
  // locate the node's panel
  int p = 0;
  while (p + 1 < static_cast<int>(source_->panels.size()) &&
         node >= source_->panels[p].first_node + source_->panels[p].num_nodes)
    ++p;
  if (const NearBlock* nb = near_block(target, p)) {
    const int local = node - source_->panels[p].first_node;
    return nb->m(rc, 2 * local + cc);
  }
  const KernelBlock2 kb = raw(target, node);
  if (rc == 0) return cc == 0 ? kb.d : kb.s;
  return cc == 0 ? kb.dp : kb.sp;
}

CMat NystromOperator::extract(const std::vector<int>& row_ids,
                              const std::vector<int>& col_ids) const {
  CMat out(row_ids.size(), col_ids.size());
  for (std::size_t c = 0; c < col_ids.size(); ++c)
    for (std::size_t r = 0; r < row_ids.size(); ++r) out(r, c) = entry(row_ids[r], col_ids[c]);
  return out;
}

CMat NystromOperator::dense() const {
  const int nr = rows(), nc = cols();
  CMat out(nr, nc);
  const int nt = static_cast<int>(targets_.pts.size());
  for (int k = 0; k < nt; ++k) {
    const int rv = (targets_.layout == RowLayout::Interleaved) ? 2 * k : k;
    const int rd = (targets_.layout == RowLayout::Interleaved) ? 2 * k + 1 : nt + k;
    int p = 0;
    for (int node = 0; node < source_->n(); ++node) {
      while (node >= source_->panels[p].first_node + source_->panels[p].num_nodes) ++p;
      if (const NearBlock* nb = near_block(k, p)) {
        const int local = node - source_->panels[p].first_node;
        out(rv, 2 * node) = nb->m(0, 2 * local);
        out(rv, 2 * node + 1) = nb->m(0, 2 * local + 1);
        out(rd, 2 * node) = nb->m(1, 2 * local);
        out(rd, 2 * node + 1) = nb->m(1, 2 * local + 1);
      } else {
        const KernelBlock2 kb = raw(k, node);
        out(rv, 2 * node) = kb.d;
        out(rv, 2 * node + 1) = kb.s;
        out(rd, 2 * node) = kb.dp;
        out(rd, 2 * node + 1) = kb.sp;
      }
    }
  }
  return out;
}

TargetSet interface_targets(const DiscretizedInterface& di) {
  TargetSet ts;
  ts.pts = di.pts;
  ts.dirs = di.normals;
  ts.layout = RowLayout::Interleaved;
  ts.on_curve_param = di.t;
  return ts;
}

CMat kernel_block(double omega, const TargetSet& targets, const DiscretizedInterface& source,
                  KernelKind kind) {
  const HelmholtzKernel kern(omega);
  const int nt = static_cast<int>(targets.pts.size());
  const int ns = source.n();
  CMat out(nt, ns);
  for (int j = 0; j < ns; ++j)
    for (int k = 0; k < nt; ++k) {
      if (dist(targets.pts[k], source.pts[j]) < 1e-12)
        throw NumericalError(
            "kernel_block: coincident target and source node; use self_kernel_block");
      const KernelBlock2 kb = kern.eval(targets.pts[k], targets.dirs[k], source.pts[j],
                                        source.normals[j]);
      const double f = source.weights[j] * source.speed[j];
      Cplx v;
      switch (kind) {
        case KernelKind::S: v = kb.s; break;
        case KernelKind::D: v = kb.d; break;
        case KernelKind::Sp: v = kb.sp; break;
        case KernelKind::Dp: v = kb.dp; break;
      }
      out(k, j) = v * f;
    }
  return out;
}

CMat self_kernel_block(double omega, const DiscretizedInterface& interface, KernelKind kind) {
  if (kind == KernelKind::Dp)
    throw NumericalError(
        "self_kernel_block: hypersingular self interaction is only defined via "
        "two-wavenumber differences");
  NystromOperator op(std::make_shared<HelmholtzKernel>(omega), &interface, 0.0,
                     interface_targets(interface), 1.0, true, /*integrate_dp=*/false);
  const int n = interface.n();
  CMat full = op.dense();
  CMat out(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      switch (kind) {
        case KernelKind::S: out(i, j) = full(2 * i, 2 * j + 1); break;
        case KernelKind::D: out(i, j) = full(2 * i, 2 * j); break;
        case KernelKind::Sp: out(i, j) = full(2 * i + 1, 2 * j + 1); break;
        default: break;
      }
    }
  return out;
}

NystromOperator make_A_self(const Geometry& geo, int i) {
  auto kern = std::make_shared<TransmissionKernel>(geo.spec.omega[i], geo.spec.omega[i + 1]);
  return NystromOperator(kern, &geo.interfaces[i], 0.0, interface_targets(geo.interfaces[i]), 1.0,
                         true);
}

CMat assemble_A_self(const Geometry& geo, int i) {
  CMat a = make_A_self(geo, i).dense();
  for (int k = 0; k < geo.interfaces[i].n(); ++k) {
    a(2 * k, 2 * k) += 1.0;       // continuity jump on tau
    a(2 * k + 1, 2 * k + 1) -= 1.0;  // flux jump on sigma
  }
  return a;
}

NystromOperator make_A_copy(const Geometry& geo, int i, int copy_sign) {
  auto kern = std::make_shared<TransmissionKernel>(geo.spec.omega[i], geo.spec.omega[i + 1]);
  return NystromOperator(kern, &geo.interfaces[i], copy_sign * geo.spec.period,
                         interface_targets(geo.interfaces[i]), 1.0, true);
}

NystromOperator make_A_vertical(const Geometry& geo, int i, int j, int copy) {
  if (std::abs(i - j) != 1) throw SpecError("make_A_vertical: |i - j| must be 1");
  const int shared_layer = std::max(i, j);  // layer between interfaces i and j
  const double sign = (j == i - 1) ? 1.0 : -1.0;
  auto kern = std::make_shared<HelmholtzKernel>(geo.spec.omega[shared_layer]);
  return NystromOperator(kern, &geo.interfaces[j], copy * geo.spec.period,
                         interface_targets(geo.interfaces[i]), sign, true);
}

CMat assemble_B(const Geometry& geo, int i, int l) {
  if (l != i && l != i + 1) throw SpecError("assemble_B: layer must be adjacent to interface");
  const double sign = (l == i) ? 1.0 : -1.0;
  const PointSource ps{geo.spec.omega[l]};
  const DiscretizedInterface& di = geo.interfaces[i];
  const ProxyCircle& proxy = geo.cell.proxy[l];
  CMat out(2 * di.n(), proxy.pts.size());
  for (std::size_t j = 0; j < proxy.pts.size(); ++j)
    for (int k = 0; k < di.n(); ++k) {
      out(2 * k, j) = sign * ps.value(di.pts[k], proxy.pts[j]);
      out(2 * k + 1, j) = sign * ps.deriv(di.pts[k], di.normals[k], proxy.pts[j]);
    }
  return out;
}

namespace {

TargetSet line_targets(const std::vector<double>& xs, const std::vector<double>& ys, bool x_deriv) {
  TargetSet ts;
  ts.layout = RowLayout::Stacked;
  for (std::size_t m = 0; m < std::max(xs.size(), ys.size()); ++m) {
    ts.pts.emplace_back(xs.size() == 1 ? xs[0] : xs[m], ys.size() == 1 ? ys[0] : ys[m]);
    ts.dirs.push_back(x_deriv ? Vec2(1.0, 0.0) : Vec2(0.0, 1.0));
  }
  return ts;
}

// Stacked-layout plain block: rows [values; derivs], columns interleaved.
CMat plain_block(double omega, const DiscretizedInterface& src, double shift, TargetSet ts) {
  NystromOperator op(std::make_shared<HelmholtzKernel>(omega), &src, shift, std::move(ts), 1.0,
                     false);
  return op.dense();
}

}  // namespace

WallPair assemble_C(const Geometry& geo, int l, int i) {
  if (i != l - 1 && i != l) throw SpecError("assemble_C: interface must be adjacent to layer");
  const double d = geo.spec.period;
  const WallSegment& seg = geo.cell.wall[l];
  WallPair pair;
  pair.at_right = plain_block(geo.spec.omega[l], geo.interfaces[i], 0.0,
                              line_targets({1.5 * d}, seg.y, true));
  pair.at_left = plain_block(geo.spec.omega[l], geo.interfaces[i], 0.0,
                             line_targets({-1.5 * d}, seg.y, true));
  return pair;
}

WallPair assemble_Q(const Geometry& geo, int l) {
  const double d = geo.spec.period;
  const WallSegment& seg = geo.cell.wall[l];
  const ProxyCircle& proxy = geo.cell.proxy[l];
  const PointSource ps{geo.spec.omega[l]};
  const int mw = static_cast<int>(seg.y.size());
  const int np = static_cast<int>(proxy.pts.size());
  WallPair pair;
  pair.at_right.resize(2 * mw, np);
  pair.at_left.resize(2 * mw, np);
  const Vec2 xhat(1.0, 0.0);
  for (int j = 0; j < np; ++j)
    for (int m = 0; m < mw; ++m) {
      const Point pr(0.5 * d, seg.y[m]), pl(-0.5 * d, seg.y[m]);
      pair.at_right(m, j) = ps.value(pr, proxy.pts[j]);
      pair.at_right(mw + m, j) = ps.deriv(pr, xhat, proxy.pts[j]);
      pair.at_left(m, j) = ps.value(pl, proxy.pts[j]);
      pair.at_left(mw + m, j) = ps.deriv(pl, xhat, proxy.pts[j]);
    }
  return pair;
}

CopyTriplet assemble_Z_top(const Geometry& geo) {
  const double d = geo.spec.period;
  const std::vector<double> ys(1, geo.cell.y_up);
  CopyTriplet t;
  t.center = plain_block(geo.spec.omega[0], geo.interfaces[0], 0.0,
                         line_targets(geo.cell.top_x, ys, false));
  t.plus = plain_block(geo.spec.omega[0], geo.interfaces[0], d,
                       line_targets(geo.cell.top_x, ys, false));
  t.minus = plain_block(geo.spec.omega[0], geo.interfaces[0], -d,
                        line_targets(geo.cell.top_x, ys, false));
  return t;
}

CopyTriplet assemble_Z_bottom(const Geometry& geo) {
  const double d = geo.spec.period;
  const int last = geo.spec.num_interfaces() - 1;
  const int bot = geo.spec.num_layers() - 1;
  const std::vector<double> ys(1, geo.cell.y_down);
  CopyTriplet t;
  t.center = plain_block(geo.spec.omega[bot], geo.interfaces[last], 0.0,
                         line_targets(geo.cell.bottom_x, ys, false));
  t.plus = plain_block(geo.spec.omega[bot], geo.interfaces[last], d,
                       line_targets(geo.cell.bottom_x, ys, false));
  t.minus = plain_block(geo.spec.omega[bot], geo.interfaces[last], -d,
                        line_targets(geo.cell.bottom_x, ys, false));
  return t;
}

namespace {

CMat proxy_line_block(double omega, const ProxyCircle& proxy, const std::vector<double>& xs,
                      double y) {
  const PointSource ps{omega};
  const int m = static_cast<int>(xs.size());
  const int np = static_cast<int>(proxy.pts.size());
  CMat out(2 * m, np);
  const Vec2 yhat(0.0, 1.0);
  for (int j = 0; j < np; ++j)
    for (int k = 0; k < m; ++k) {
      const Point p(xs[k], y);
      out(k, j) = ps.value(p, proxy.pts[j]);
      out(m + k, j) = ps.deriv(p, yhat, proxy.pts[j]);
    }
  return out;
}

}  // namespace

CMat assemble_V_top(const Geometry& geo) {
  return proxy_line_block(geo.spec.omega[0], geo.cell.proxy[0], geo.cell.top_x, geo.cell.y_up);
}

CMat assemble_V_bottom(const Geometry& geo) {
  const int bot = geo.spec.num_layers() - 1;
  return proxy_line_block(geo.spec.omega[bot], geo.cell.proxy[bot], geo.cell.bottom_x,
                          geo.cell.y_down);
}

CMat assemble_W(const RayleighBlochBasis& basis, const std::vector<double>& x) {
  return -rayleigh_bloch_block(basis, x, true);
}

CVec assemble_rhs(const Geometry& geo, const IncidentWave& wave) {
  int total = 0;
  for (const auto& di : geo.interfaces) total += 2 * di.n();
  CVec f = CVec::Zero(total);
  const DiscretizedInterface& top = geo.interfaces[0];
  for (int k = 0; k < top.n(); ++k) {
    f[2 * k] = -wave.value(top.pts[k]);
    f[2 * k + 1] = -wave.grad_dot(top.normals[k], top.pts[k]);
  }
  return f;
}

CVec potential_values(double omega, const DiscretizedInterface& src, double shift_x,
                      const CVec& density, const std::vector<Point>& pts) {
  const HelmholtzKernel kern(omega);
  CVec out = CVec::Zero(pts.size());
  const Vec2 dir(0.0, 1.0);
  for (std::size_t k = 0; k < pts.size(); ++k)
    for (int j = 0; j < src.n(); ++j) {
      const KernelBlock2 kb = kern.eval(pts[k], dir, src.node_shifted(j, shift_x), src.normals[j]);
      const double f = src.weights[j] * src.speed[j];
      out[k] += f * (kb.d * density[2 * j] + kb.s * density[2 * j + 1]);
    }
  return out;
}

CVec proxy_values(double omega, const ProxyCircle& proxy, const CVec& coeffs,
                  const std::vector<Point>& pts) {
  const PointSource ps{omega};
  CVec out = CVec::Zero(pts.size());
  for (std::size_t k = 0; k < pts.size(); ++k)
    for (std::size_t j = 0; j < proxy.pts.size(); ++j)
      out[k] += coeffs[j] * ps.value(pts[k], proxy.pts[j]);
  return out;
}

}  // namespace strata
