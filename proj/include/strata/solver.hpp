#pragma once

#include <array>
#include <map>
#include <memory>
#include <optional>
#include <vector>

#include "strata/assembly.hpp"
#include "strata/geometry.hpp"
#include "strata/hbs.hpp"
#include "strata/kernels.hpp"
#include "strata/lowrank.hpp"

namespace strata {

struct ScatteringSolution {
  IncidentWave wave;
  double kappa0 = 0.0;
  int order_shift = 0;
  std::vector<CVec> sigma;    // per interface, interleaved (tau, sigma) pairs
  std::vector<CVec> proxy_c;  // per layer
  CVec a_up, a_down;          // Rayleigh-Bloch coefficients, orders -K..K
  double omega_top = 0.0, omega_bottom = 0.0, period = 1.0;
  double flux_error = -1.0;   // filled by analysis::flux_error via solve()
};

struct StageTimings {
  double stage1 = 0.0, stage2 = 0.0, stage3 = 0.0, solve = 0.0;
  int stage3_builds = 0, solves = 0;
};

/// Block tri-diagonal LU (Thomas) factorization.
struct BlockThomas {
  std::vector<Eigen::PartialPivLU<CMat>> pivot_lu;
  std::vector<CMat> lower;  // X_{i,i-1} T_{i-1}^{-1}
  std::vector<CMat> upper;  // X_{i,i+1}
  std::vector<int> sizes;
};
BlockThomas block_thomas_factor(const std::vector<CMat>& diag, const std::vector<CMat>& lower,
                                const std::vector<CMat>& upper);
CVec block_thomas_solve(const BlockThomas& f, const CVec& rhs);

struct StageOneArtifacts {
  // A0 inverse for one interface
  std::optional<HbsInverse> hbs_inv;
  std::optional<Eigen::PartialPivLU<CMat>> dense_lu;
  // phase-tagged low-rank factors
  LowRankFactor a_plus, a_minus;                 // tags Alpha / AlphaInv
  std::array<LowRankFactor, 3> vert_up{};       // A_{i,i-1}: copies {0,+d,-d}
  std::array<LowRankFactor, 3> vert_down{};     // A_{i,i+1}
  LowRankFactor b_up, b_down;                    // B_{i,i}, B_{i,i+1} factors
  CMat b_up_dense, b_down_dense;                 // kept for the direct (Eq-15 style) route
};

struct StageTwoArtifacts {
  // per layer l: wall pairs from the adjacent interfaces (above = l-1, below = l)
  std::vector<std::optional<WallPair>> c_above, c_below;
  std::vector<WallPair> q;  // proxy wall pairs
  CopyTriplet z_top, z_bottom;
  CMat v_top, v_bottom;
};

struct PhaseArtifacts {
  Cplx alpha;
  double kappa0 = 0.0;
  RayleighBlochBasis rb_up, rb_down;
  std::vector<TruncatedPinv> qhat_pinv;          // per layer
  std::vector<CMat> chat_above, chat_below;      // per layer: rows x 2N_{l-1} / 2N_l
  GlobalLR lr;
  std::vector<CMat> a0inv_left;                  // G_i = A0_i^{-1} L_i
  BlockThomas thomas;
  std::vector<int> core_sizes;
};

class SolverState {
 public:
  static SolverState build(const ProblemSpec& spec);

  ScatteringSolution solve(double theta);
  std::vector<ScatteringSolution> sweep(const std::vector<double>& thetas);

  /// Local updates; the unit cell (walls, proxy circles) is kept frozen.
  void update_interface(int i, std::shared_ptr<const Curve> curve, int n_points = -1);
  void update_wavenumber(int l, double omega);

  const Geometry& geometry() const { return geo_; }
  const StageTimings& timings() const { return timings_; }
  void reset_timings() { timings_ = {}; }
  int phase_cache_size() const { return static_cast<int>(phase_cache_.size()); }

  /// Exposed for tests: per-phase artifacts and block A0 solves.
  const PhaseArtifacts& phase_artifacts(double theta);
  CVec solve_A0(int i, const CVec& rhs) const;
  CMat solve_A0(int i, const CMat& rhs) const;
  const StageOneArtifacts& stage1(int i) const { return stage1_[i]; }
  const StageTwoArtifacts& stage2() const { return stage2_; }

 private:
  void build_stage1_for(int i);
  void build_stage2_for_layer(int l);
  void build_stage2_tops();
  PhaseArtifacts& ensure_phase(const BlochPhase& bp);
  ScatteringSolution solve_with(const PhaseArtifacts& ph, const IncidentWave& wave,
                                const BlochPhase& bp);

  Geometry geo_;
  std::vector<StageOneArtifacts> stage1_;
  StageTwoArtifacts stage2_;
  std::map<std::pair<long long, long long>, PhaseArtifacts> phase_cache_;
  StageTimings timings_;
};

}  // namespace strata
