#pragma once

#include "strata/types.hpp"

namespace strata {

inline constexpr double kEulerGamma = 0.57721566490153286061;

// Bessel functions of real argument (GSL-backed).
double bessel_j0(double z);
double bessel_j1(double z);
double bessel_y0(double z);
double bessel_y1(double z);

// Hankel functions of the first kind.
Cplx hankel_h0(double z);
Cplx hankel_h1(double z);

/// Regular series pieces of the Bessel functions around z = 0, used to
/// evaluate two-wavenumber kernel differences without cancellation:
///   Y0(z) = (2/pi) [ (ln(z/2)+gamma) J0(z) + s0(z) ]
///   Y1(z) = (2/pi) [ (ln(z/2)+gamma) J1(z) - 1/z - (z/4) s1(z) ]
struct BesselSeriesParts {
  double j0;         // J0(z)
  double j1_over_z;  // J1(z)/z
  double s0;         // entire part of Y0
  double s1;         // entire part of Y1 (odd part scaled)
};
BesselSeriesParts bessel_series_parts(double z);

/// Free-space Helmholtz Green's function (i/4) H0^(1)(omega * |x - y|).
Cplx helmholtz_green(double omega, const Point& target, const Point& source);

}  // namespace strata
