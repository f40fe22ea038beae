#pragma once

#include <vector>

#include "strata/solver.hpp"

namespace strata {

struct BraggOrder {
  int n;
  double kappa_n;
  Cplx k_n;
  bool propagating;
  bool wood;  // |k_n| < 1e-8 * omega
};

std::vector<BraggOrder> bragg_orders(double kappa0, double omega, double period, int terms);

/// Energy-conservation defect of the propagating orders:
/// | 1 - sum_up (k_n/k_inc) |a_n|^2 - sum_down (k_n/k_inc) |a_n|^2 |.
double flux_error(const ScatteringSolution& sol);

struct FieldEval {
  CVec values;
  std::vector<bool> flagged;  // inside the near-interface exclusion band
};

/// Total field: layer representations inside the cell (plus the incident wave
/// in the top layer), Rayleigh-Bloch expansions outside, quasi-periodic
/// continuation across periods.
FieldEval evaluate_field(const Geometry& geo, const ScatteringSolution& sol,
                         const std::vector<Point>& pts);

struct ConvergenceRow {
  int n_per_interface;
  double flux_error;
  StageTimings timings;
};

std::vector<ConvergenceRow> convergence_study(ProblemSpec spec, const std::vector<int>& n_list,
                                              double theta);

}  // namespace strata
