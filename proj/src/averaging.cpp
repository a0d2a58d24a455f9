#include "singext/averaging.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "singext/error.hpp"
#include "singext/parallel.hpp"
#include "singext/quadrature.hpp"

namespace singext {

double Mollifier::value(double r) const {
  if (r > 1.0) return 0.0;
  const double r2 = r * r;
  double v = 0.0, p = 1.0;
  for (double c : profile) {
    v += c * p;
    p *= r2;
  }
  return v;
}

double Mollifier::radial_derivative(double r) const {
  if (r > 1.0) return 0.0;
  const double r2 = r * r;
  double v = 0.0, p = r;  // d/dr r^{2k} = 2k r^{2k-1}
  for (std::size_t k = 1; k < profile.size(); ++k) {
    v += 2.0 * k * profile[k] * p;
    p *= r2;
  }
  return v;
}

double Mollifier::cumulative(double z) const {
  z = std::clamp(z, -1.0, 1.0);
  auto F = [&](double t) {
    double v = 0.0, p = t;
    for (std::size_t k = 0; k < profile.size(); ++k) {
      v += profile[k] * p / (2.0 * k + 1.0);
      p *= t * t;
    }
    return v;
  };
  return F(z) - F(-1.0);
}

std::string Mollifier::id() const {
  std::ostringstream os;
  os.precision(17);
  os << "radial-poly-m" << m;
  for (double c : profile) os << ':' << c;
  return os.str();
}

Mollifier mollifier_from_profile(int m, std::vector<double> profile) {
  if (m != 1 && m != 2) fail(ErrorCode::InvalidInput, "mollifier dimension must be 1 or 2");
  if (profile.empty()) fail(ErrorCode::InvalidInput, "empty mollifier profile");
  Mollifier phi;
  phi.m = m;
  phi.profile = std::move(profile);
  // polynomial in r, so a 16-point rule is exact
  const GaussRule& g = gauss_legendre(16);
  double mass = 0.0;
  for (std::size_t q = 0; q < g.nodes.size(); ++q) {
    const double r = 0.5 * (g.nodes[q] + 1.0), w = 0.5 * g.weights[q];
    mass += m == 1 ? 2.0 * w * phi.value(r) : 2.0 * kPi * w * phi.value(r) * r;
  }
  phi.integral = mass;
  const int n = 20000;
  for (int i = 0; i <= n; ++i) {
    const double r = static_cast<double>(i) / n;
    phi.sup_bound = std::max(phi.sup_bound, std::abs(phi.value(r)));
    phi.grad_bound = std::max(phi.grad_bound, std::abs(phi.radial_derivative(r)));
  }
  if (std::abs(mass - 1.0) > 1e-10) fail(ErrorCode::BoundViolation, "mollifier mass is " + std::to_string(mass));
  if (phi.sup_bound > 1.0) fail(ErrorCode::BoundViolation, "mollifier sup exceeds 1");
  if (phi.grad_bound > 2.0) fail(ErrorCode::BoundViolation, "mollifier gradient bound exceeds 2");
  if (std::abs(phi.value(1.0)) > 1e-12) fail(ErrorCode::BoundViolation, "mollifier does not vanish on the unit sphere");
  return phi;
}

Mollifier build_mollifier(int m) {
  if (m == 1) return mollifier_from_profile(1, {15.0 / 16, -30.0 / 16, 15.0 / 16});
  if (m == 2) return mollifier_from_profile(2, {3.0 / kPi, -6.0 / kPi, 3.0 / kPi});
  fail(ErrorCode::InvalidInput, "mollifier dimension must be 1 or 2");
}

std::vector<double> SlabSpec::xs() const {
  std::vector<double> v(static_cast<std::size_t>(nx));
  for (int i = 0; i < nx; ++i) v[i] = x_lo + (x_hi - x_lo) * i / (nx - 1);
  return v;
}

std::vector<double> SlabSpec::heights() const {
  std::vector<double> v(static_cast<std::size_t>(ny));
  for (int j = 0; j < ny; ++j) v[j] = h_min * std::pow(h_max / h_min, static_cast<double>(j) / (ny - 1));
  v.back() = h_max;
  return v;
}

nlohmann::json SlabSpec::to_json() const {
  return {{"m", m}, {"x_lo", x_lo}, {"x_hi", x_hi}, {"nx", nx}, {"h_min", h_min}, {"h_max", h_max}, {"ny", ny}};
}

SlabSpec SlabSpec::from_json(const nlohmann::json& j) {
  SlabSpec s;
  s.m = j.at("m");
  s.x_lo = j.at("x_lo");
  s.x_hi = j.at("x_hi");
  s.nx = j.at("nx");
  s.h_min = j.at("h_min");
  s.h_max = j.at("h_max");
  s.ny = j.at("ny");
  return s;
}

AveragingOperator::AveragingOperator(const SurfaceMap& u, Mollifier phi) : u_(u), phi_(std::move(phi)) {
  if (!is_plane(u.domain)) fail(ErrorCode::InvalidInput, "averaging needs a plane-domain map");
  if (!u.tail) fail(ErrorCode::TailNotConstant, "plane-domain map has no tail marker");
  if (u.m != phi_.m) fail(ErrorCode::InvalidInput, "mollifier and map dimensions differ");
  if (u.size() < 2) fail(ErrorCode::InvalidInput, "map needs at least two nodes");
  dim_ = static_cast<int>(u.values[0].size());
  a_ = u.tail->lo[0];
  b_ = u.tail->hi[0];
  if (u.m == 1) {
    knots_.push_back(a_);
    for (const Point& c : u.coords) knots_.push_back(c[0]);
    knots_.push_back(b_);
    if (!std::is_sorted(knots_.begin(), knots_.end())) fail(ErrorCode::InvalidInput, "line map nodes must be sorted inside the window");
    build_tree();
  } else if (u.shape[0] < 2 || u.shape[1] < 2) {
    fail(ErrorCode::InvalidInput, "plane map grid too small");
  }
}

Point AveragingOperator::trace(const Point& x) const {
  if (u_.m == 1) {
    const double s = x[0];
    if (s < a_ || s > b_) return u_.tail->value;
    const std::size_t n = u_.size();
    if (s <= knots_[1]) return u_.values[0];
    if (s >= knots_[n]) return u_.values[n - 1];
    const std::size_t k = static_cast<std::size_t>(std::upper_bound(knots_.begin(), knots_.end(), s) - knots_.begin()) - 1;
    const double t = (s - knots_[k]) / (knots_[k + 1] - knots_[k]);
    return (1 - t) * u_.values[k - 1] + t * u_.values[k];
  }
  const Tail& tl = *u_.tail;
  if (x[0] < tl.lo[0] || x[0] > tl.hi[0] || x[1] < tl.lo[1] || x[1] > tl.hi[1]) return tl.value;
  double f[2];
  int i0[2];
  for (int ax = 0; ax < 2; ++ax) {
    const int n = u_.shape[ax];
    const double h = (tl.hi[ax] - tl.lo[ax]) / n;
    f[ax] = std::clamp((x[ax] - tl.lo[ax]) / h - 0.5, 0.0, n - 1.0);
    i0[ax] = std::min(static_cast<int>(f[ax]), n - 2);
    f[ax] -= i0[ax];
  }
  auto v = [&](int di, int dj) { return u_.values[u_.index(i0[0] + di, i0[1] + dj)]; };
  return (1 - f[0]) * ((1 - f[1]) * v(0, 0) + f[1] * v(0, 1)) + f[0] * ((1 - f[1]) * v(1, 0) + f[1] * v(1, 1));
}

Point AveragingOperator::segment_integral(std::size_t k, double x, double y, double s0, double s1) const {
  const std::size_t n = u_.size();
  if (k == 0 || k == n) {
    const double mass = phi_.cumulative((x - s0) / y) - phi_.cumulative((x - s1) / y);
    return u_.values[k == 0 ? 0 : n - 1] * mass;
  }
  // linear times quartic: the 3-point rule is exact
  const GaussRule& g = gauss_legendre(3);
  const double L = knots_[k + 1] - knots_[k], half = 0.5 * (s1 - s0), mid = 0.5 * (s1 + s0);
  double wl = 0.0, wr = 0.0;
  for (int q = 0; q < 3; ++q) {
    const double s = mid + half * g.nodes[q];
    const double w = g.weights[q] * half * phi_.value(std::abs(x - s) / y) / y;
    const double t = (s - knots_[k]) / L;
    wl += w * (1 - t);
    wr += w * t;
  }
  return wl * u_.values[k - 1] + wr * u_.values[k];
}

void AveragingOperator::build_tree() {
  if (phi_.profile.size() > 3) fail(ErrorCode::Unsupported, "line averaging needs a profile of degree <= 4");
  const std::size_t segs = u_.size() + 1;
  leaves_ = 1;
  while (leaves_ < segs) leaves_ *= 2;
  const std::size_t nodes = 2 * leaves_;
  const std::size_t stride = 5 * static_cast<std::size_t>(dim_);
  node_lo_.assign(nodes, b_);
  node_hi_.assign(nodes, b_);
  moments_.assign(nodes * stride, 0.0);
  const GaussRule& g = gauss_legendre(3);
  const std::size_t n = u_.size();
  for (std::size_t k = 0; k < segs; ++k) {
    const std::size_t node = leaves_ + k;
    const double lo = knots_[k], hi = knots_[k + 1], half = 0.5 * (hi - lo);
    node_lo_[node] = lo;
    node_hi_[node] = hi;
    const Point& left = u_.values[k == 0 ? 0 : k - 1];
    const Point& right = u_.values[k == n ? n - 1 : k];
    double* M = &moments_[node * stride];
    for (int q = 0; q < 3; ++q) {
      const double w = g.weights[q] * half, d = half * g.nodes[q], t = 0.5 * (g.nodes[q] + 1.0);
      double pw = w;
      for (int r = 0; r < 5; ++r) {
        for (int c2 = 0; c2 < dim_; ++c2) M[r * dim_ + c2] += pw * ((1 - t) * left[c2] + t * right[c2]);
        pw *= d;
      }
    }
  }
  static const double binom[5][5] = {{1, 0, 0, 0, 0}, {1, 1, 0, 0, 0}, {1, 2, 1, 0, 0}, {1, 3, 3, 1, 0}, {1, 4, 6, 4, 1}};
  for (std::size_t node = leaves_ - 1; node >= 1; --node) {
    const std::size_t l = 2 * node, r = 2 * node + 1;
    node_lo_[node] = node_lo_[l];
    node_hi_[node] = std::max(node_hi_[l], node_hi_[r]);
    if (node_lo_[r] < node_lo_[node]) node_lo_[node] = node_lo_[r];
    const double c = 0.5 * (node_lo_[node] + node_hi_[node]);
    double* M = &moments_[node * stride];
    for (std::size_t child : {l, r}) {
      const double delta = 0.5 * (node_lo_[child] + node_hi_[child]) - c;
      const double* C = &moments_[child * stride];
      double dp[5] = {1, delta, delta * delta, delta * delta * delta, delta * delta * delta * delta};
      for (int q = 0; q < 5; ++q) {
        for (int rr = 0; rr <= q; ++rr) {
          const double f = binom[q][rr] * dp[q - rr];
          for (int c2 = 0; c2 < dim_; ++c2) M[q * dim_ + c2] += f * C[rr * dim_ + c2];
        }
      }
    }
  }
}

void AveragingOperator::query(std::size_t node, double x, double y, double c0, double c1, Point& sum) const {
  const double lo = node_lo_[node], hi = node_hi_[node];
  if (hi <= c0 || lo >= c1) return;
  if (c0 <= lo && hi <= c1) {
    // phi(t - w) expanded in w = (s - c) / y; exact for the quartic profile
    const double t = (x - 0.5 * (lo + hi)) / y;
    const double a0 = phi_.profile[0], a2 = phi_.profile.size() > 1 ? phi_.profile[1] : 0.0,
                 a4 = phi_.profile.size() > 2 ? phi_.profile[2] : 0.0;
    const double t2 = t * t;
    const double D[5] = {a0 + a2 * t2 + a4 * t2 * t2, -(2 * a2 * t + 4 * a4 * t2 * t), a2 + 6 * a4 * t2, -(4 * a4 * t), a4};
    const std::size_t stride = 5 * static_cast<std::size_t>(dim_);
    const double* M = &moments_[node * stride];
    double scale = 1.0 / y;
    for (int q = 0; q < 5; ++q) {
      const double f = D[q] * scale;
      for (int c2 = 0; c2 < dim_; ++c2) sum[c2] += f * M[q * dim_ + c2];
      scale /= y;
    }
    return;
  }
  if (node >= leaves_) {
    sum += segment_integral(node - leaves_, x, y, std::max(lo, c0), std::min(hi, c1));
    return;
  }
  query(2 * node, x, y, c0, c1, sum);
  query(2 * node + 1, x, y, c0, c1, sum);
}

Point AveragingOperator::eval1(double x, double y) const {
  Point sum = Point::Zero(dim_);
  const double lo = x - y, hi = x + y;
  // mass of phi((x - s) / y) / y over s in [s0, s1]
  auto mass = [&](double s0, double s1) { return phi_.cumulative((x - s0) / y) - phi_.cumulative((x - s1) / y); };
  if (lo < a_) sum += u_.tail->value * mass(lo, std::min(hi, a_));
  if (hi > b_) sum += u_.tail->value * mass(std::max(lo, b_), hi);
  const double c0 = std::max(lo, a_), c1 = std::min(hi, b_);
  if (c1 > c0) query(1, x, y, c0, c1, sum);
  return sum;
}

Point AveragingOperator::eval2(const Point& x, double y, int nr, int nt) const {
  Point sum = Point::Zero(dim_);
  const GaussRule& g = gauss_legendre(nr);
  Point p(2);
  for (int i = 0; i < nr; ++i) {
    const double r = 0.5 * (g.nodes[i] + 1.0);
    const double wr = 0.5 * g.weights[i] * r * phi_.value(r) * (2 * kPi / nt);
    for (int j = 0; j < nt; ++j) {
      const double th = 2 * kPi * (j + 0.5) / nt;
      p[0] = x[0] - y * r * std::cos(th);
      p[1] = x[1] - y * r * std::sin(th);
      sum += wr * trace(p);
    }
  }
  return sum;
}

Point AveragingOperator::operator()(const Point& x, double y) const {
  if (!(y > 0)) fail(ErrorCode::SlabTooShallow, "averaging height must be positive");
  return u_.m == 1 ? eval1(x[0], y) : eval2(x, y, 16, 32);
}

Point AveragingOperator::operator()(double x, double y) const {
  if (!(y > 0)) fail(ErrorCode::SlabTooShallow, "averaging height must be positive");
  if (u_.m != 1) fail(ErrorCode::InvalidInput, "scalar position needs a line-domain map");
  return eval1(x, y);
}

double AveragingOperator::error_estimate(const Point& x, double y) const {
  if (u_.m == 1) return 0.0;
  return (eval2(x, y, 16, 32) - eval2(x, y, 32, 64)).norm();
}

std::size_t AveragedField::horizontal_count() const {
  return slab.m == 1 ? xs.size() : xs.size() * xs.size();
}

Point AveragedField::at(double x, double y) const {
  if (op) return (*op)(x, y);
  if (slab.m != 1) fail(ErrorCode::Unsupported, "grid-only sampling is implemented for m = 1");
  const double tol = 1e-12 * (slab.x_hi - slab.x_lo);
  if (x < slab.x_lo - tol || x > slab.x_hi + tol || y < slab.h_min * (1 - 1e-12) || y > slab.h_max * (1 + 1e-12)) {
    fail(ErrorCode::CoverageGap, "point outside the averaged slab");
  }
  const double fx = std::clamp((x - slab.x_lo) / (slab.x_hi - slab.x_lo) * (slab.nx - 1), 0.0, slab.nx - 1.0);
  const double fy =
      std::clamp(std::log(y / slab.h_min) / std::log(slab.h_max / slab.h_min) * (slab.ny - 1), 0.0, slab.ny - 1.0);
  const std::size_t ix = std::min<std::size_t>(static_cast<std::size_t>(fx), slab.nx - 2);
  const std::size_t iy = std::min<std::size_t>(static_cast<std::size_t>(fy), slab.ny - 2);
  const double tx = fx - ix, ty = fy - iy;
  return (1 - ty) * ((1 - tx) * values[index(iy, ix)] + tx * values[index(iy, ix + 1)]) +
         ty * ((1 - tx) * values[index(iy + 1, ix)] + tx * values[index(iy + 1, ix + 1)]);
}

AveragedField average_extend(const SurfaceMap& u, const Mollifier& phi, const SlabSpec& slab) {
  if (!(slab.h_min > 0)) fail(ErrorCode::SlabTooShallow, "slab floor must be above the boundary");
  if (!(slab.h_max > slab.h_min) || slab.nx < 2 || slab.ny < 2 || !(slab.x_hi > slab.x_lo)) {
    fail(ErrorCode::InvalidInput, "degenerate slab");
  }
  if (slab.m != u.m) fail(ErrorCode::InvalidInput, "slab and map dimensions differ");
  auto op = std::make_shared<AveragingOperator>(u, phi);
  for (int ax = 0; ax < u.m; ++ax) {
    if (slab.x_lo > u.tail->lo[ax] - slab.h_max || slab.x_hi < u.tail->hi[ax] + slab.h_max) {
      fail(ErrorCode::InvalidInput, "slab window must contain the map window expanded by h_max");
    }
  }
  AveragedField V;
  V.slab = slab;
  V.xs = slab.xs();
  V.heights = slab.heights();
  V.ambient_dim = op->ambient_dim();
  V.mollifier_id = phi.id();
  V.op = op;
  const std::size_t nh = V.horizontal_count();
  V.values.assign(nh * V.heights.size(), Point());
  for_blocks(V.values.size(), 256, [&](std::size_t, std::size_t lo, std::size_t hi) {
    Point x(u.m);
    for (std::size_t k = lo; k < hi; ++k) {
      const std::size_t ih = k / nh, ix = k % nh;
      if (u.m == 1) {
        x[0] = V.xs[ix];
      } else {
        x[0] = V.xs[ix / V.xs.size()];
        x[1] = V.xs[ix % V.xs.size()];
      }
      V.values[k] = (*op)(x, V.heights[ih]);
    }
  });
  return V;
}

void distance_field(AveragedField& V, const EmbeddedManifold& M) {
  V.dist.assign(V.values.size(), 0.0);
  V.outside_tube.assign(V.values.size(), 0);
  V.manifold_hash = M.spec_hash();
  const double reach = M.reach();
  for_blocks(V.values.size(), 256, [&](std::size_t, std::size_t lo, std::size_t hi) {
    for (std::size_t k = lo; k < hi; ++k) {
      const Closest c = M.closest(V.values[k]);
      V.dist[k] = c.distance;
      V.outside_tube[k] = (!c.unique || !c.converged || c.distance >= reach) ? 1 : 0;
    }
  });
}

double trace_l1_error(const AveragingOperator& V, double y) {
  const SurfaceMap& u = V.map();
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += u.weights[i] * (V(u.coords[i], y) - u.values[i]).norm();
  return s;
}

void write_field(const AveragedField& V, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::InvalidInput, "cannot write '" + path + "'");
  std::vector<double> buf;
  buf.reserve(V.values.size() * V.ambient_dim + V.dist.size());
  for (const Point& p : V.values) {
    for (int c = 0; c < V.ambient_dim; ++c) buf.push_back(p[c]);
  }
  buf.insert(buf.end(), V.dist.begin(), V.dist.end());
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(double)));
  nlohmann::json side = {{"format", "f64le"},
                         {"slab", V.slab.to_json()},
                         {"ambient_dim", V.ambient_dim},
                         {"nodes", V.values.size()},
                         {"has_dist", !V.dist.empty()},
                         {"mollifier", V.mollifier_id},
                         {"manifold_hash", hex64(V.manifold_hash)}};
  std::ofstream js(path + ".json");
  js << side.dump(2) << "\n";
}

AveragedField read_field(const std::string& path) {
  std::ifstream js(path + ".json");
  if (!js) fail(ErrorCode::InvalidInput, "missing sidecar '" + path + ".json'");
  nlohmann::json side;
  try {
    js >> side;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::InvalidInput, std::string("bad sidecar: ") + e.what());
  }
  AveragedField V;
  V.slab = SlabSpec::from_json(side.at("slab"));
  V.xs = V.slab.xs();
  V.heights = V.slab.heights();
  V.ambient_dim = side.at("ambient_dim");
  V.mollifier_id = side.at("mollifier");
  V.manifold_hash = std::stoull(side.at("manifold_hash").get<std::string>(), nullptr, 16);
  const std::size_t n = side.at("nodes");
  const bool has_dist = side.at("has_dist");
  const std::size_t count = n * V.ambient_dim + (has_dist ? n : 0);
  std::vector<double> buf(count);
  std::ifstream in(path, std::ios::binary);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(count * sizeof(double)));
  if (!in || static_cast<std::size_t>(in.gcount()) != count * sizeof(double)) {
    fail(ErrorCode::InvalidInput, "field file '" + path + "' is truncated");
  }
  V.values.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    V.values[k] = Eigen::Map<const Eigen::VectorXd>(buf.data() + k * V.ambient_dim, V.ambient_dim);
  }
  if (has_dist) {
    V.dist.assign(buf.begin() + static_cast<long>(n * V.ambient_dim), buf.end());
    V.outside_tube.assign(n, 0);
  }
  return V;
}

}  // namespace singext
