#include "singext/conformal.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "singext/error.hpp"
#include "singext/parallel.hpp"

namespace singext {

const char* direction_name(TransportDirection d) {
  return d == TransportDirection::half_space_to_ball ? "half_space_to_ball" : "ball_to_half_space";
}

TransportDirection parse_direction(const std::string& name) {
  if (name == "half_space_to_ball" || name == "to_ball" || name == "plane_to_sphere") {
    return TransportDirection::half_space_to_ball;
  }
  if (name == "ball_to_half_space" || name == "to_half_space" || name == "sphere_to_plane") {
    return TransportDirection::ball_to_half_space;
  }
  fail(ErrorCode::InvalidInput, "unknown transport direction '" + name + "'");
}

namespace {

Point north(int dim) {
  Point n = Point::Zero(dim);
  n[dim - 1] = 1.0;
  return n;
}

Point invert(const Point& z) {
  const Point N = north(static_cast<int>(z.size()));
  const Point d = z - N;
  const double r2 = d.squaredNorm();
  if (!(r2 > 0)) fail(ErrorCode::InvalidInput, "inversion center");
  return N + 2.0 * d / r2;
}

Point flip_last(Point z) {
  z[z.size() - 1] = -z[z.size() - 1];
  return z;
}

}  // namespace

Point MobiusTransport::apply(const Point& z) const {
  if (z.size() != dim) fail(ErrorCode::InvalidInput, "point dimension differs from the transport dimension");
  if (direction == TransportDirection::half_space_to_ball) return invert(flip_last(z));
  return flip_last(invert(z));
}

double MobiusTransport::conformal_factor(const Point& z) const {
  const Point q = direction == TransportDirection::half_space_to_ball ? flip_last(z) : z;
  return 2.0 / (q - north(dim)).squaredNorm();
}

MobiusTransport MobiusTransport::inverse() const {
  MobiusTransport t = *this;
  t.direction = direction == TransportDirection::half_space_to_ball ? TransportDirection::ball_to_half_space
                                                                    : TransportDirection::half_space_to_ball;
  return t;
}

Point plane_to_sphere(const Point& x) {
  Point z = Point::Zero(x.size() + 1);
  z.head(x.size()) = x;
  return invert(z);
}

Point sphere_to_plane(const Point& p) {
  const Point z = invert(p);
  return z.head(p.size() - 1);
}

std::vector<Point> transport_points(const std::vector<Point>& pts, TransportDirection direction) {
  std::vector<Point> out;
  out.reserve(pts.size());
  for (const Point& p : pts) out.push_back(MobiusTransport{static_cast<int>(p.size()), direction}.apply(p));
  return out;
}

namespace {

// On S^1 with phi the angle measured from the north pole, the boundary chart
// is x = tan((phi - pi) / 2).
double plane_of(double phi) { return std::tan(0.5 * (phi - kPi)); }
double phi_of(double x) { return kPi + 2.0 * std::atan(x); }

double theta_of_phi(double phi) {
  double t = wrap_angle(phi + 0.5 * kPi);
  if (2.0 * kPi - t < 1e-12) t = 0.0;
  return t;
}

SurfaceMap sphere_to_line(const SurfaceMap& u, const TransportOptions& opt) {
  struct Cell {
    double phi, w;
    std::size_t i;
  };
  std::vector<Cell> kept;
  std::vector<std::size_t> cap;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double phi = wrap_angle(u.params[i][0] - 0.5 * kPi);
    const double w = u.weights[i];
    const bool in_cap = phi < opt.cap_radius || phi > 2 * kPi - opt.cap_radius || phi - 0.5 * w <= 0.0 ||
                        phi + 0.5 * w >= 2 * kPi;
    if (in_cap) {
      cap.push_back(i);
    } else {
      kept.push_back({phi, w, i});
    }
  }
  if (cap.empty()) fail(ErrorCode::InvalidInput, "cap radius is below the mesh spacing");
  if (kept.empty()) fail(ErrorCode::InvalidInput, "every node lies in the pole cap");
  Point tail;
  if (opt.policy == TailPolicy::strict) {
    tail = u.values[cap.front()];
    for (std::size_t i : cap) {
      if ((u.values[i] - tail).norm() > opt.tolerance) {
        fail(ErrorCode::PoleOnSupport, "map is not constant in the pole cap");
      }
    }
  } else {
    auto pole_dist = [&](std::size_t i) {
      const double phi = wrap_angle(u.params[i][0] - 0.5 * kPi);
      return std::min(phi, 2 * kPi - phi);
    };
    tail = u.values[*std::min_element(cap.begin(), cap.end(),
                                      [&](std::size_t a, std::size_t b) { return pole_dist(a) < pole_dist(b); })];
  }
  std::sort(kept.begin(), kept.end(), [](const Cell& a, const Cell& b) { return a.phi < b.phi; });
  SurfaceMap out;
  out.domain = DomainKind::plane_R1_tail;
  out.m = 1;
  out.shape = {static_cast<int>(kept.size()), 1};
  out.periodic = {false, false};
  out.L_bound = u.L_bound;
  out.manifold_ref = u.manifold_ref;
  for (const Cell& c : kept) {
    const double x = plane_of(c.phi);
    out.params.push_back(make_params({x}));
    out.coords.push_back(make_point({x}));
    out.weights.push_back(plane_of(c.phi + 0.5 * c.w) - plane_of(c.phi - 0.5 * c.w));
    out.values.push_back(u.values[c.i]);
  }
  const double a = plane_of(kept.front().phi - 0.5 * kept.front().w);
  const double b = plane_of(kept.back().phi + 0.5 * kept.back().w);
  out.tail = Tail{{a, 0.0}, {b, 0.0}, tail};
  return out;
}

SurfaceMap line_to_sphere(const SurfaceMap& u, DomainKind target) {
  if (!u.tail) fail(ErrorCode::PoleOnSupport, "plane map without a constant tail is not defined at the pole");
  const double a = u.tail->lo[0], b = u.tail->hi[0];
  std::vector<std::size_t> order(u.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t p, std::size_t q) { return u.coords[p][0] < u.coords[q][0]; });
  struct Cell {
    double phi, w;
    Point value;
  };
  std::vector<Cell> cells;
  double edge = a;
  for (std::size_t i : order) {
    const double next = edge + u.weights[i];
    cells.push_back({phi_of(u.coords[i][0]), phi_of(next) - phi_of(edge), u.values[i]});
    edge = next;
  }
  if (std::abs(edge - b) > 1e-9 * (b - a)) fail(ErrorCode::InvalidInput, "plane cells do not tile the tail window");
  const double cap_lo = phi_of(b), cap_len = 2 * kPi - (phi_of(b) - phi_of(a));
  const double spacing = 0.5 * (cells.front().w + cells.back().w);
  const int count = std::max(1, static_cast<int>(std::lround(cap_len / spacing)));
  for (int j = 0; j < count; ++j) {
    cells.push_back({cap_lo + (j + 0.5) * cap_len / count, cap_len / count, u.tail->value});
  }
  for (Cell& c : cells) c.phi = theta_of_phi(c.phi);  // now the usual angle theta
  std::sort(cells.begin(), cells.end(), [](const Cell& p, const Cell& q) { return p.phi < q.phi; });
  SurfaceMap out;
  out.domain = target;
  out.m = 1;
  out.shape = {static_cast<int>(cells.size()), 1};
  out.periodic = {true, false};
  out.L_bound = u.L_bound;
  out.manifold_ref = u.manifold_ref;
  for (const Cell& c : cells) {
    out.params.push_back(make_params({c.phi}));
    out.coords.push_back(make_point({std::cos(c.phi), std::sin(c.phi)}));
    out.weights.push_back(c.w);
    out.values.push_back(c.value);
  }
  return out;
}

}  // namespace

SurfaceMap transport_map(const SurfaceMap& u, TransportDirection direction, const TransportOptions& opt) {
  if (u.m != 1) fail(ErrorCode::Unsupported, "boundary transport is implemented for one-dimensional boundaries");
  if (direction == TransportDirection::half_space_to_ball) {
    if (!is_plane(u.domain)) fail(ErrorCode::InvalidInput, "half_space_to_ball needs a plane-domain map");
    return line_to_sphere(u, DomainKind::sphere_S1);
  }
  if (is_plane(u.domain)) fail(ErrorCode::InvalidInput, "ball_to_half_space needs a sphere-domain map");
  return sphere_to_line(u, opt);
}

std::size_t BallGrid::size() const {
  std::size_t s = 1;
  for (int a = 0; a < dim; ++a) s *= static_cast<std::size_t>(n);
  return s;
}

Point BallGrid::center(std::size_t idx) const {
  Point c(dim);
  for (int a = 0; a < dim; ++a) {
    c[a] = -1.0 + (static_cast<double>(idx % n) + 0.5) * cell();
    idx /= n;
  }
  return c;
}

double hyperbolic_density(const Point& x) {
  const double r2 = x.squaredNorm();
  if (!(r2 < 1.0)) fail(ErrorCode::BoundaryTouch, "density is infinite on the unit sphere");
  return std::pow(2.0 / (1.0 - r2), static_cast<double>(x.size()));
}

double hyperbolic_disk_area(double rho) {
  const double s = std::sinh(0.5 * rho);
  return 4.0 * kPi * s * s;
}

std::vector<std::uint8_t> ball_region(const BallGrid& g, double radius) {
  std::vector<std::uint8_t> r(g.size(), 0);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = g.center(i).norm() < radius ? 1 : 0;
  return r;
}

namespace {

// Hyperbolic measure of one cell: 3-point Gauss-Legendre per axis.
double cell_measure(const BallGrid& g, const Point& c) {
  static const double xg[3] = {-std::sqrt(0.6), 0.0, std::sqrt(0.6)};
  static const double wg[3] = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
  const double h = 0.5 * g.cell();
  const Point far = c.cwiseAbs() + Point::Constant(c.size(), h);
  if (far.norm() >= 1.0) fail(ErrorCode::BoundaryTouch, "region reaches the unit sphere");
  int total = 1;
  for (int a = 0; a < g.dim; ++a) total *= 3;
  double s = 0.0;
  for (int k = 0; k < total; ++k) {
    Point p = c;
    double w = 1.0;
    int r = k;
    for (int a = 0; a < g.dim; ++a) {
      p[a] += h * xg[r % 3];
      w *= wg[r % 3];
      r /= 3;
    }
    s += w * hyperbolic_density(p);
  }
  return s * std::pow(h, g.dim);
}

}  // namespace

double hyperbolic_measure(const BallGrid& g, const std::vector<std::uint8_t>& region) {
  if (region.size() != g.size()) fail(ErrorCode::InvalidInput, "region size differs from the grid");
  return block_sum(region.size(), 4096, 0.0, [&](std::size_t lo, std::size_t hi) {
    double s = 0.0;
    for (std::size_t i = lo; i < hi; ++i) {
      if (region[i]) s += cell_measure(g, g.center(i));
    }
    return s;
  });
}

BallField sample_ball(const BallGrid& g, const std::function<std::optional<Point>(const Point&)>& f, double collar) {
  BallField F;
  F.grid = g;
  F.values.resize(g.size());
  F.support.assign(g.size(), 0);
  for_blocks(g.size(), 1024, [&](std::size_t, std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      const Point c = g.center(i);
      if (c.norm() > 1.0 - collar) continue;
      if (auto v = f(c)) {
        F.values[i] = *v;
        F.support[i] = 1;
      }
    }
  });
  return F;
}

BallField ball_field(const ExtensionMap& U, const BallGrid& g, double collar) {
  if (g.dim != 2) fail(ErrorCode::Unsupported, "half-plane extensions live in dimension 2");
  const MobiusTransport back{2, TransportDirection::ball_to_half_space};
  return sample_ball(
      g,
      [&](const Point& w) -> std::optional<Point> {
        const Point z = back.apply(w);
        return U(z[0], z[1]).value;
      },
      collar);
}

DistributionReport hyperbolic_distribution(const BallField& F, int report_points, double collar) {
  const BallGrid& g = F.grid;
  std::vector<double> grad, weights;
  std::vector<std::size_t> stride(g.dim, 1);
  for (int a = 1; a < g.dim; ++a) stride[a] = stride[a - 1] * g.n;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!F.support[i]) continue;
    const Point c = g.center(i);
    if (c.norm() > 1.0 - collar) continue;
    double sq = 0.0;
    std::size_t rest = i;
    for (int a = 0; a < g.dim; ++a) {
      const int ia = static_cast<int>(rest % g.n);
      rest /= g.n;
      const bool lo = ia > 0 && F.support[i - stride[a]];
      const bool hi = ia + 1 < g.n && F.support[i + stride[a]];
      if (!lo && !hi) continue;
      const Point& up = hi ? F.values[i + stride[a]] : F.values[i];
      const Point& dn = lo ? F.values[i - stride[a]] : F.values[i];
      const double span = g.cell() * ((lo ? 1 : 0) + (hi ? 1 : 0));
      sq += ((up - dn) / span).squaredNorm();
    }
    grad.push_back(0.5 * (1.0 - c.squaredNorm()) * std::sqrt(sq));
    weights.push_back(cell_measure(g, c));
  }
  DistributionReport r = distribution(grad, weights, g.dim - 1, report_points);
  r.collar = collar;
  return r;
}

}  // namespace singext
