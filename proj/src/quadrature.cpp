#include "strata/quadrature.hpp"

#include <cmath>
#include <map>
#include <mutex>

namespace strata {

static GaussRule compute_gauss_legendre(int n) {
  GaussRule rule;
  rule.x.resize(n);
  rule.w.resize(n);
  for (int i = 0; i < n; ++i) {
    // Newton iteration from the Chebyshev estimate.
    double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      pp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / pp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    rule.x[n - 1 - i] = x;
    rule.w[n - 1 - i] = 2.0 / ((1.0 - x * x) * pp * pp);
  }
  return rule;
}

const GaussRule& gauss_legendre(int n) {
  static std::map<int, GaussRule> cache;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, compute_gauss_legendre(n)).first;
  return it->second;
}

std::vector<double> barycentric_weights(const std::vector<double>& nodes) {
  const int n = static_cast<int>(nodes.size());
  std::vector<double> w(n, 1.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (j != i) w[i] /= (nodes[i] - nodes[j]);
  return w;
}

namespace {

void gl_segment(const std::function<void(double, CVec&)>& f, double a, double b, CVec& acc,
                CVec& scratch) {
  const GaussRule& rule = gauss_legendre(12);
  const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  for (std::size_t i = 0; i < rule.x.size(); ++i) {
    f(mid + half * rule.x[i], scratch);
    acc += (half * rule.w[i]) * scratch;
  }
}

void adaptive_rec(const std::function<void(double, CVec&)>& f, double a, double b,
                  const CVec& whole, double tol, CVec& out, int depth, int max_depth,
                  CVec& scratch, int& budget) {
  const double mid = 0.5 * (a + b);
  CVec left = CVec::Zero(out.size()), right = CVec::Zero(out.size());
  gl_segment(f, a, mid, left, scratch);
  gl_segment(f, mid, b, right, scratch);
  budget -= 24;
  const double err = (whole - left - right).cwiseAbs().maxCoeff();
  const double mag = std::max(left.cwiseAbs().maxCoeff(), right.cwiseAbs().maxCoeff());
  if (err < std::max(tol, 1e-15 * mag) || depth >= max_depth || budget <= 0) {
    out += left + right;
    return;
  }
  adaptive_rec(f, a, mid, left, tol, out, depth + 1, max_depth, scratch, budget);
  adaptive_rec(f, mid, b, right, tol, out, depth + 1, max_depth, scratch, budget);
}

}  // namespace

void adaptive_integrate(const std::function<void(double, CVec&)>& f, double a, double b,
                        double tol, CVec& out, int max_depth) {
  CVec scratch(out.size());
  CVec whole = CVec::Zero(out.size());
  gl_segment(f, a, b, whole, scratch);
  int budget = 120000;
  adaptive_rec(f, a, b, whole, tol, out, 0, max_depth, scratch, budget);
}

}  // namespace strata
