#pragma once

#include <memory>
#include <vector>

#include "strata/geometry.hpp"
#include "strata/kernels.hpp"
#include "strata/types.hpp"

namespace strata {

enum class RowLayout {
  Interleaved,  // rows (value_k, deriv_k) per target: interface blocks
  Stacked,      // all value rows then all derivative rows: wall/top blocks
};

struct TargetSet {
  std::vector<Point> pts;
  std::vector<Vec2> dirs;  // directional-derivative direction per target
  RowLayout layout = RowLayout::Interleaved;
  // Source-curve parameter of each target when the targets lie on the
  // (unshifted) source curve; lets the singular quadrature split exactly
  // at the target node.
  std::vector<double> on_curve_param;
};

/// Nystrom discretization of a layer-potential block. Columns interleave the
/// two densities (tau_j, sigma_j); near-singular interactions are corrected by
/// adaptive product integration against the source panels' Lagrange basis.
class NystromOperator {
 public:
  /// integrate_dp: corrected blocks include the hypersingular row; disable for
  /// single-wavenumber self interactions where that integral does not exist.
  NystromOperator(std::shared_ptr<const PairKernel> kernel, const DiscretizedInterface* source,
                  double source_shift_x, TargetSet targets, double sign, bool near_corrected,
                  bool integrate_dp = true);

  int rows() const { return 2 * static_cast<int>(targets_.pts.size()); }
  int cols() const { return 2 * source_->n(); }
  Cplx entry(int i, int j) const;
  CMat extract(const std::vector<int>& row_ids, const std::vector<int>& col_ids) const;
  CMat dense() const;
  const TargetSet& targets() const { return targets_; }

 private:
  struct NearBlock {
    int panel;
    Eigen::Matrix<Cplx, 2, Eigen::Dynamic> m;  // 2 x (2q): (value,deriv) x (tau,sigma per node)
  };
  KernelBlock2 raw(int target, int node) const;
  const NearBlock* near_block(int target, int panel) const;
  void build_near(int target, int panel);

  std::shared_ptr<const PairKernel> kernel_;
  const DiscretizedInterface* source_;
  double shift_;
  TargetSet targets_;
  double sign_;
  bool integrate_dp_;
  std::vector<std::vector<NearBlock>> near_;  // per target, sorted by panel
};

enum class KernelKind { S, D, Sp, Dp };

/// Plain Nystrom matrix for targets off the source curve (no singular handling).
CMat kernel_block(double omega, const TargetSet& targets, const DiscretizedInterface& source,
                  KernelKind kind);

/// Self-interaction Nystrom matrix with near-singular quadrature. The
/// hypersingular kind Dp is only defined through two-wavenumber differences
/// and is rejected here.
CMat self_kernel_block(double omega, const DiscretizedInterface& interface, KernelKind kind);

/// Interface node targets (normal-direction derivative rows, interleaved).
TargetSet interface_targets(const DiscretizedInterface& di);

// --- Block builders -------------------------------------------------------
//
// Interface indices i and layer indices l are 0-based here; layer l sits
// between interface l-1 (above) and interface l (below).

/// Self block A^s_{i,i}: transmission difference kernels plus the jump term.
NystromOperator make_A_self(const Geometry& geo, int i);
CMat assemble_A_self(const Geometry& geo, int i);

/// Periodic copy blocks: sources translated by +d ("plus") or -d ("minus").
NystromOperator make_A_copy(const Geometry& geo, int i, int copy_sign);

/// Vertical neighbor block from interface j onto interface i (|i-j| = 1),
/// one source copy c in {0, +1, -1}; the layer-side sign is included.
NystromOperator make_A_vertical(const Geometry& geo, int i, int j, int copy);

/// Proxy-to-interface block B_{i,l}, l in {i, i+1}; sign included.
CMat assemble_B(const Geometry& geo, int i, int l);

/// Wall blocks for layer l from interface i in {l-1, l}. The pair stores the
/// far-copy reductions of the wall residual r = u(R) - alpha u(L):
///   r = alpha^{-1} * [at_right] - alpha^2 * [at_left] + proxy terms,
/// where at_right evaluates the in-cell sources on the line x = 3d/2 and
/// at_left on x = -3d/2. Rows: M_w values then M_w x-derivatives.
struct WallPair {
  CMat at_right, at_left;
};
WallPair assemble_C(const Geometry& geo, int l, int i);

/// Proxy-to-wall pair: evaluations at the true walls x = +-d/2.
WallPair assemble_Q(const Geometry& geo, int l);

/// Top/bottom interface evaluations: center and +-d copies (phased later).
struct CopyTriplet {
  CMat center, plus, minus;
};
CopyTriplet assemble_Z_top(const Geometry& geo);
CopyTriplet assemble_Z_bottom(const Geometry& geo);

CMat assemble_V_top(const Geometry& geo);
CMat assemble_V_bottom(const Geometry& geo);

/// Rayleigh-Bloch block with the sign convention (representation) - (expansion) = 0.
CMat assemble_W(const RayleighBlochBasis& basis, const std::vector<double>& x);

/// Right-hand side over all interface rows (interleaved), nonzero on interface 0.
CVec assemble_rhs(const Geometry& geo, const IncidentWave& wave);

// Stage-III phase combinations.
inline CMat combine_wall(const WallPair& p, Cplx alpha) {
  return (1.0 / alpha) * p.at_right - (alpha * alpha) * p.at_left;
}
inline CMat combine_proxy_wall(const WallPair& p, Cplx alpha) {
  return p.at_right - alpha * p.at_left;
}
inline CMat combine_triplet(const CopyTriplet& t, Cplx alpha) {
  return t.center + alpha * t.plus + (1.0 / alpha) * t.minus;
}

/// Potential of interface densities (interleaved tau/sigma) at external points.
CVec potential_values(double omega, const DiscretizedInterface& src, double shift_x,
                      const CVec& density, const std::vector<Point>& pts);

/// Potential of proxy charges at external points.
CVec proxy_values(double omega, const ProxyCircle& proxy, const CVec& coeffs,
                  const std::vector<Point>& pts);

}  // namespace strata
