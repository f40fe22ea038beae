#pragma once

#include <map>
#include <utility>
#include <vector>

#include "strata/types.hpp"

namespace strata {

/// How a stored factor scales with the Bloch phase alpha.
enum class PhaseTag { One, Alpha, AlphaInv };

inline Cplx phase_scale(PhaseTag tag, Cplx alpha) {
  switch (tag) {
    case PhaseTag::Alpha: return alpha;
    case PhaseTag::AlphaInv: return 1.0 / alpha;
    default: return 1.0;
  }
}

struct LowRankFactor {
  CMat left;   // m x k
  CMat right;  // k x n
  PhaseTag tag = PhaseTag::One;
  double tol = 0.0;
  bool saturated = false;  // rank exceeded min(m,n)/2
  int rank() const { return static_cast<int>(left.cols()); }
  CMat dense() const { return left * right; }
};

/// Row interpolative decomposition  M ~ interp * M(skeleton, :), with an
/// identity sub-block of interp on the skeleton rows.
struct RowId {
  std::vector<int> skeleton;
  CMat interp;  // m x k
};
RowId row_id(const CMat& m, double eps, int min_rank = 0);

/// Column interpolative decomposition  M ~ M(:, skeleton) * interp.
struct ColId {
  std::vector<int> skeleton;
  CMat interp;  // k x n
};
ColId col_id(const CMat& m, double eps, int min_rank = 0);

/// Randomized spectral-norm estimate (power iteration, fixed seed).
double estimate_norm(const std::function<CVec(const CVec&)>& apply,
                     const std::function<CVec(const CVec&)>& apply_adj, int rows, int cols,
                     int iters = 10);
double estimate_norm(const CMat& m, int iters = 10);

/// Adaptive randomized sketch feeding a row interpolative decomposition.
LowRankFactor factor(const CMat& m, double eps);

/// Truncated SVD-based pseudoinverse; singular values kept are those
///  > eps_schur * sigma_max.
struct TruncatedPinv {
  CMat t_hat;       // cols x l
  RVec sigma_inv;   // l
  CMat u_hat_star;  // l x rows
  int rank() const { return static_cast<int>(sigma_inv.size()); }
  CMat apply(const CMat& rhs) const {
    return t_hat * (sigma_inv.asDiagonal() * (u_hat_star * rhs));
  }
  CVec apply(const CVec& rhs) const {
    return t_hat * (sigma_inv.asDiagonal() * (u_hat_star * rhs));
  }
};
TruncatedPinv truncated_pinv(const CMat& q, double eps_schur);

/// Low-rank factorization of B Q^+ C from the factored B (the small-inner-
/// dimension route): L = B.left, R = B.right * T Sigma^-1 U* C.
LowRankFactor factor_BQC(const LowRankFactor& b_factor, const TruncatedPinv& pinv, const CMat& c);

/// Reference route: L = B T, R = Sigma^-1 U* C; rank equals the pinv rank.
LowRankFactor factor_BQC_direct(const CMat& b, const TruncatedPinv& pinv, const CMat& c);

/// Horizontal/vertical stack of scaled parts, with optional recompression.
LowRankFactor combine_P_block(const std::vector<std::pair<const LowRankFactor*, Cplx>>& parts,
                              double recompress_eps = 0.0);

LowRankFactor recompress(const LowRankFactor& f, double eps);

/// Global Woodbury factors assembled from tri-diagonal P blocks. Block-row i
/// stacks the left factors of P(i, i-1), P(i, i), P(i, i+1); the right factors
/// are keyed by column interface.
struct GlobalLR {
  std::vector<CMat> left;                      // per interface: 2N_i x k_i
  std::vector<std::map<int, CMat>> right;      // per interface: col j -> k_i x 2N_j
  int core_dim(int i) const { return static_cast<int>(left[i].cols()); }
};
GlobalLR assemble_global_LR(int num_interfaces,
                            const std::map<std::pair<int, int>, LowRankFactor>& blocks);

}  // namespace strata
