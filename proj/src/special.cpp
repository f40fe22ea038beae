#include "strata/special.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_sf_bessel.h>

#include <cmath>

namespace strata {

namespace {
// Domain violations are prevented by callers; never abort from inside GSL.
const bool kGslHandlerOff = [] {
  gsl_set_error_handler_off();
  return true;
}();
}  // namespace

double bessel_j0(double z) { return gsl_sf_bessel_J0(z); }
double bessel_j1(double z) { return gsl_sf_bessel_J1(z); }
double bessel_y0(double z) { return gsl_sf_bessel_Y0(z); }
double bessel_y1(double z) { return gsl_sf_bessel_Y1(z); }

Cplx hankel_h0(double z) { return {gsl_sf_bessel_J0(z), gsl_sf_bessel_Y0(z)}; }
Cplx hankel_h1(double z) { return {gsl_sf_bessel_J1(z), gsl_sf_bessel_Y1(z)}; }

BesselSeriesParts bessel_series_parts(double z) {
  // Power series in q = z^2/4; converges fast for z <= ~6.
  const double q = 0.25 * z * z;
  double term0 = 1.0;    // (-1)^k q^k / (k!)^2
  double term1 = 0.5;    // (-1)^k q^k / (k! (k+1)!) * 1/2  -> J1/z partial
  double j0 = term0;
  double j1z = term1;
  double s0 = 0.0;
  double s1 = 1.0;  // k = 0 term: (H_0 + H_1) * 1 / (0! 1!) = 1
  double hk = 0.0;  // harmonic number H_k
  for (int k = 1; k < 40; ++k) {
    term0 *= -q / (static_cast<double>(k) * k);
    term1 *= -q / (static_cast<double>(k) * (k + 1));
    hk += 1.0 / k;
    const double hk1 = hk + 1.0 / (k + 1);
    j0 += term0;
    j1z += term1;
    s0 += -term0 * hk;                 // (-1)^(k+1) H_k q^k / (k!)^2
    s1 += 2.0 * term1 * (hk + hk1);    // (-1)^k (H_k + H_{k+1}) q^k / (k!(k+1)!)
    if (std::abs(term0) < 1e-18 && std::abs(term1) < 1e-18) break;
  }
  return {j0, j1z, s0, s1};
}

Cplx helmholtz_green(double omega, const Point& target, const Point& source) {
  const double r = dist(target, source);
  if (r == 0.0) throw NumericalError("helmholtz_green: coincident target/source");
  return 0.25 * kI * hankel_h0(omega * r);
}

}  // namespace strata
