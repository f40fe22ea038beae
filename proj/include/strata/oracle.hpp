#pragma once

#include <map>

#include "strata/solver.hpp"

namespace strata {

/// Dense alpha-combined rectangular system in the reordered block layout.
struct DenseSystem {
  CMat a;     // 2N x 2N
  CMat bhat;  // 2N x xdim
  CMat chat;  // hat_rows x 2N
  CMat qhat;  // hat_rows x xdim
  CVec f;     // 2N
  std::vector<int> sigma_off;  // per interface
  std::vector<int> x_off;      // per layer (c_1,a^U | c_l | c_last,a^D ordering)
  std::vector<int> row_off;    // per layer block of hat rows
  int sigma_dim = 0, xdim = 0, hat_rows = 0;
};

DenseSystem assemble_dense_system(const Geometry& geo, const IncidentWave& wave);

/// Least-squares solve of the full rectangular system.
ScatteringSolution dense_solve(const Geometry& geo, const IncidentWave& wave);

/// The predecessor solver's ordering: x from the big pseudoinverse, then the
/// densities by back-substitution.
ScatteringSolution part1_block_solve(const Geometry& geo, const IncidentWave& wave);

/// Dense Schur complement blocks and the low-rank perturbation split.
struct DenseSchur {
  std::map<std::pair<int, int>, CMat> s;  // Schur blocks
  std::map<std::pair<int, int>, CMat> p;  // S = A0 + P split, assembled blockwise
};
DenseSchur dense_schur(const Geometry& geo, const IncidentWave& wave);

/// Dense A(alpha) block (self + jump + phased copies, or phased verticals).
CMat dense_A_block(const Geometry& geo, int i, int j, Cplx alpha);

}  // namespace strata
