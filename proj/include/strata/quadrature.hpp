#pragma once

#include <functional>
#include <vector>

#include "strata/types.hpp"

namespace strata {

struct GaussRule {
  std::vector<double> x;  // nodes on [-1, 1]
  std::vector<double> w;
};

/// Gauss-Legendre rule, cached per order.
const GaussRule& gauss_legendre(int n);

/// Barycentric weights for polynomial interpolation through the given nodes.
std::vector<double> barycentric_weights(const std::vector<double>& nodes);

/// Adaptive Gauss-Legendre integration of a complex vector-valued integrand.
/// Subdivides until the two-half refinement changes the result by less than
/// tol (absolute, per component, accumulated).
void adaptive_integrate(const std::function<void(double, CVec&)>& f, double a, double b,
                        double tol, CVec& out, int max_depth = 48);

}  // namespace strata
