#include "strata/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <unordered_map>

#include "strata/quadrature.hpp"

namespace strata {

Point FourierCurve::eval(double t) const {
  double y = spec_.offset;
  for (std::size_t j = 0; j < spec_.sin_coeffs.size(); ++j)
    y += spec_.scale * spec_.sin_coeffs[j] * std::sin(2.0 * kPi * (j + 1) * t);
  for (std::size_t j = 0; j < spec_.cos_coeffs.size(); ++j)
    y += spec_.scale * spec_.cos_coeffs[j] * std::cos(2.0 * kPi * (j + 1) * t);
  return {spec_.period * (t - 0.5), y};
}

Point FourierCurve::deriv(double t) const {
  double dy = 0.0;
  for (std::size_t j = 0; j < spec_.sin_coeffs.size(); ++j)
    dy += spec_.scale * spec_.sin_coeffs[j] * 2.0 * kPi * (j + 1) * std::cos(2.0 * kPi * (j + 1) * t);
  for (std::size_t j = 0; j < spec_.cos_coeffs.size(); ++j)
    dy -= spec_.scale * spec_.cos_coeffs[j] * 2.0 * kPi * (j + 1) * std::sin(2.0 * kPi * (j + 1) * t);
  return {spec_.period, dy};
}

Point eval_fourier_curve(const FourierCurveSpec& spec, double t) {
  return FourierCurve(spec).eval(t);
}

std::vector<double> sorted_random_coeffs(std::uint64_t seed, int count) {
  std::mt19937_64 rng(seed);
  std::vector<double> c(count);
  for (auto& v : c) v = static_cast<double>(rng() >> 11) * 0x1p-53;
  std::sort(c.begin(), c.end(), std::greater<>());
  return c;
}

namespace {

std::vector<double> panel_breaks(int& n_points, int& q, const PanelPlan& plan) {
  std::vector<double> breaks;
  if (plan.corners.empty()) {
    if (n_points < 32) {
      q = n_points;
      breaks = {0.0, 1.0};
    } else {
      q = 32;
      const int np = (n_points + q - 1) / q;
      n_points = np * q;
      for (int i = 0; i <= np; ++i) breaks.push_back(static_cast<double>(i) / np);
    }
    return breaks;
  }
  q = 16;
  const int np = std::max(2, (n_points + q - 1) / q);
  std::set<double> bset;
  for (int i = 0; i <= np; ++i) bset.insert(static_cast<double>(i) / np);
  for (double c : plan.corners) bset.insert(c);
  for (int level = 0; level < plan.dyadic_levels; ++level) {
    for (double c : plan.corners) {
      auto it = bset.find(c);
      if (it != bset.end() && std::next(it) != bset.end()) bset.insert(0.5 * (c + *std::next(it)));
      if (it != bset.begin()) bset.insert(0.5 * (c + *std::prev(it)));
    }
  }
  breaks.assign(bset.begin(), bset.end());
  n_points = q * (static_cast<int>(breaks.size()) - 1);
  return breaks;
}

void check_no_self_intersection(const DiscretizedInterface& di) {
  const int n = di.n();
  if (n < 4) return;
  double max_len = 0.0;
  for (int i = 0; i + 1 < n; ++i) max_len = std::max(max_len, dist(di.pts[i], di.pts[i + 1]));
  const double cell = std::max(max_len, 1e-12);
  auto key = [cell](const Point& p) {
    return std::make_pair(static_cast<long>(std::floor(p.x / cell)),
                          static_cast<long>(std::floor(p.y / cell)));
  };
  std::unordered_map<long long, std::vector<int>> grid;
  auto hash = [](std::pair<long, long> k) {
    return (static_cast<long long>(k.first) << 24) ^ static_cast<long long>(k.second);
  };
  auto cross = [](const Point& o, const Point& a, const Point& b) {
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
  };
  auto intersects = [&](int i, int j) {
    const Point &a = di.pts[i], &b = di.pts[i + 1], &c = di.pts[j], &d2 = di.pts[j + 1];
    const double d1 = cross(a, b, c), e1 = cross(a, b, d2);
    const double d3 = cross(c, d2, a), e3 = cross(c, d2, b);
    return ((d1 > 0) != (e1 > 0)) && ((d3 > 0) != (e3 > 0));
  };
  for (int i = 0; i + 1 < n; ++i) {
    const auto k0 = key(di.pts[i]);
    for (long dx = -1; dx <= 1; ++dx)
      for (long dy = -1; dy <= 1; ++dy) {
        auto it = grid.find(hash({k0.first + dx, k0.second + dy}));
        if (it == grid.end()) continue;
        for (int j : it->second)
          if (std::abs(i - j) > 1 && intersects(i, j))
            throw SpecError("discretize_interface: self-intersecting interface polyline");
      }
    grid[hash(k0)].push_back(i);
  }
}

}  // namespace

DiscretizedInterface discretize_interface(std::shared_ptr<const Curve> curve, int n_points,
                                          const PanelPlan& plan) {
  if (n_points < 16 || n_points % 2 != 0)
    throw SpecError("discretize_interface: point count must be even and >= 16");
  DiscretizedInterface di;
  di.curve = curve;
  int q = 0;
  const std::vector<double> breaks = panel_breaks(n_points, q, plan);
  const GaussRule& rule = gauss_legendre(q);
  for (std::size_t p = 0; p + 1 < breaks.size(); ++p) {
    Panel panel{breaks[p], breaks[p + 1], di.n(), q};
    const double mid = 0.5 * (panel.t0 + panel.t1), half = 0.5 * (panel.t1 - panel.t0);
    for (int i = 0; i < q; ++i) {
      const double t = mid + half * rule.x[i];
      const Point pt = curve->eval(t);
      const Point dv = curve->deriv(t);
      const double sp = std::hypot(dv.x, dv.y);
      di.t.push_back(t);
      di.pts.push_back(pt);
      di.normals.push_back(Vec2(-dv.y / sp, dv.x / sp));
      di.speed.push_back(sp);
      di.weights.push_back(half * rule.w[i]);
    }
    di.panels.push_back(panel);
  }
  check_no_self_intersection(di);
  return di;
}

double DiscretizedInterface::arc_length() const {
  double len = 0.0;
  for (int k = 0; k < n(); ++k) len += weights[k] * speed[k];
  return len;
}

void ProblemSpec::validate() const {
  if (period <= 0) throw SpecError("period must be positive");
  if (omega.size() != interfaces.size() + 1)
    throw SpecError("layer count must be one more than interface count");
  if (n_points.size() != interfaces.size())
    throw SpecError("one point count is required per interface");
  for (double w : omega)
    if (w <= 0) throw SpecError("wavenumbers must be positive");
  for (int n : n_points)
    if (n < 16 || n % 2 != 0) throw SpecError("interface point counts must be even and >= 16");
  if (aux.proxy_points < 1 || aux.wall_points < 1 || aux.top_points < 1 || aux.rb_terms < 1)
    throw SpecError("auxiliary parameters must be >= 1");
  // Interfaces ordered top to bottom and vertically non-intersecting.
  const int samples = 512;
  for (std::size_t i = 0; i + 1 < interfaces.size(); ++i) {
    double min_gap = 1e300;
    for (int s = 0; s < samples; ++s) {
      const double t = (s + 0.5) / samples;
      min_gap = std::min(min_gap, interfaces[i]->eval(t).y - interfaces[i + 1]->eval(t).y);
    }
    if (min_gap <= 0)
      throw SpecError("interfaces must be ordered by decreasing height and non-intersecting");
  }
}

namespace {

void interface_extent(const Curve& c, double& y_min, double& y_max) {
  y_min = 1e300;
  y_max = -1e300;
  const int samples = 2048;
  for (int s = 0; s < samples; ++s) {
    const double y = c.eval((s + 0.5) / samples).y;
    y_min = std::min(y_min, y);
    y_max = std::max(y_max, y);
  }
}

}  // namespace

UnitCell build_unit_cell(const ProblemSpec& spec,
                         const std::vector<DiscretizedInterface>& interfaces) {
  const double d = spec.period;
  const int num_layers = spec.num_layers();
  const int num_if = spec.num_interfaces();
  UnitCell cell;
  cell.x_left = -0.5 * d;
  cell.x_right = 0.5 * d;

  std::vector<double> if_min(num_if), if_max(num_if), if_wall_y(num_if);
  for (int i = 0; i < num_if; ++i) {
    interface_extent(*spec.interfaces[i], if_min[i], if_max[i]);
    if_wall_y[i] = spec.interfaces[i]->eval(0.0).y;
  }
  cell.y_up = if_max[0] + 0.3 * d;
  cell.y_down = if_min[num_if - 1] - 0.3 * d;

  const GaussRule& wall_rule = gauss_legendre(spec.aux.wall_points);
  for (int l = 0; l < num_layers; ++l) {
    WallSegment seg;
    seg.y_hi = (l == 0) ? cell.y_up : if_wall_y[l - 1];
    seg.y_lo = (l == num_layers - 1) ? cell.y_down : if_wall_y[l];
    if (seg.y_hi - seg.y_lo <= 1e-9 * d)
      throw SpecError("build_unit_cell: layer " + std::to_string(l + 1) + " has zero wall extent");
    const double mid = 0.5 * (seg.y_hi + seg.y_lo), half = 0.5 * (seg.y_hi - seg.y_lo);
    for (int m = 0; m < spec.aux.wall_points; ++m) seg.y.push_back(mid + half * wall_rule.x[m]);
    cell.wall.push_back(seg);
  }

  for (int m = 0; m < spec.aux.top_points; ++m) {
    const double x = -0.5 * d + d * (m + 0.5) / spec.aux.top_points;
    cell.top_x.push_back(x);
    cell.bottom_x.push_back(x);
  }

  for (int l = 0; l < num_layers; ++l) {
    ProxyCircle pc;
    const double y_hi = (l == 0) ? cell.y_up : if_max[l - 1];
    const double y_lo = (l == num_layers - 1) ? cell.y_down : if_min[l];
    pc.center = Point(0.0, 0.5 * (y_hi + y_lo));
    pc.radius = std::max(0.8 * d, 0.75 * std::hypot(d, y_hi - y_lo));
    for (int j = 0; j < spec.aux.proxy_points; ++j) {
      const double a = 2.0 * kPi * (j + 0.37) / spec.aux.proxy_points;
      pc.pts.emplace_back(pc.center.x + pc.radius * std::cos(a),
                          pc.center.y + pc.radius * std::sin(a));
    }
    cell.proxy.push_back(pc);
  }
  (void)interfaces;
  return cell;
}

Geometry build_geometry(const ProblemSpec& spec) {
  spec.validate();
  Geometry geo;
  geo.spec = spec;
  for (int i = 0; i < spec.num_interfaces(); ++i) {
    const PanelPlan plan =
        (i < static_cast<int>(spec.panel_plans.size())) ? spec.panel_plans[i] : PanelPlan{};
    geo.interfaces.push_back(discretize_interface(spec.interfaces[i], spec.n_points[i], plan));
  }
  geo.cell = build_unit_cell(spec, geo.interfaces);
  return geo;
}

}  // namespace strata
