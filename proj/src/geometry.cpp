#include "singext/geometry.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <queue>
#include <sstream>

#include "singext/error.hpp"

namespace singext {

namespace {

double van_der_corput(std::size_t i, unsigned base) {
  double v = 0.0, denom = 1.0;
  while (i > 0) {
    denom *= base;
    v += static_cast<double>(i % base) / denom;
    i /= base;
  }
  return v;
}

// 5-point Gauss-Legendre on [0, 1].
constexpr std::array<double, 5> kGl5X{0.04691007703066800, 0.23076534494715845, 0.5, 0.76923465505284155,
                                      0.95308992296933200};
constexpr std::array<double, 5> kGl5W{0.11846344252809454, 0.23931433524968324, 0.28444444444444444,
                                      0.23931433524968324, 0.11846344252809454};

Frame orthonormalize(const Frame& J) {
  Frame Q = J;
  for (Eigen::Index c = 0; c < J.cols(); ++c) {
    Point v = J.col(c);
    const double n0 = v.norm();
    for (Eigen::Index k = 0; k < c; ++k) v -= Q.col(k).dot(v) * Q.col(k);
    const double n1 = v.norm();
    if (!(n1 > 1e-10 * std::max(n0, 1e-300)) || n0 == 0.0) {
      fail(ErrorCode::DegenerateTangent, "chart differential is rank-deficient");
    }
    Q.col(c) = v / n1;
  }
  return Q;
}

}  // namespace

const char* kind_name(ManifoldKind kind) {
  switch (kind) {
    case ManifoldKind::circle: return "circle";
    case ManifoldKind::sphere: return "sphere";
    case ManifoldKind::clifford_torus: return "clifford_torus";
    case ManifoldKind::cylinder: return "cylinder";
    case ManifoldKind::warped_cylinder: return "warped_cylinder";
    case ManifoldKind::flat: return "flat";
    case ManifoldKind::point_cloud: return "point_cloud";
  }
  return "unknown";
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex64(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---------------------------------------------------------------------------
// EmbeddedManifold

std::vector<double> EmbeddedManifold::geodesics_from(const Point& p, const std::vector<Point>& qs) const {
  std::vector<double> out;
  out.reserve(qs.size());
  for (const auto& q : qs) out.push_back(geodesic(p, q));
  return out;
}

nlohmann::json EmbeddedManifold::spec() const {
  nlohmann::json j;
  j["kind"] = kind_name(kind());
  j["parameters"] = parameters_json();
  j["projection_backend"] = backend_ == ProjectionBackend::analytic ? "analytic" : "sampled";
  j["tolerances"] = {{"projection", tol_.projection},
                     {"on_manifold", tol_.on_manifold},
                     {"geodesic_refine", tol_.geodesic_refine}};
  if (window_) j["truncation_window"] = {(*window_)[0], (*window_)[1]};
  return j;
}

std::uint64_t EmbeddedManifold::spec_hash() const { return fnv1a(spec().dump()); }

// ---------------------------------------------------------------------------
// ChartManifold

Frame ChartManifold::chart_jacobian(const Params& s) const {
  const double h = 1e-6;
  Frame J(ambient_dim(), s.size());
  for (Eigen::Index c = 0; c < s.size(); ++c) {
    Params a = s, b = s;
    a[c] += h;
    b[c] -= h;
    J.col(c) = (chart(a) - chart(b)) / (2 * h);
  }
  return J;
}

Frame ChartManifold::tangent_frame(const Params& s) const { return orthonormalize(chart_jacobian(s)); }

Params ChartManifold::wrap(Params s) const {
  const ParamDomain d = domain();
  for (int i = 0; i < d.dim; ++i) {
    if (d.periodic[i]) {
      const double period = d.hi[i] - d.lo[i];
      double r = std::fmod(s[i] - d.lo[i], period);
      if (r < 0) r += period;
      if (r >= period) r = 0.0;
      s[i] = d.lo[i] + r;
    } else {
      s[i] = std::clamp(s[i], d.lo[i], d.hi[i]);
    }
  }
  return s;
}

Params ChartManifold::sample_map(double u1, double u2) const {
  const ParamDomain d = domain();
  Params s(d.dim);
  s[0] = d.lo[0] + u1 * (d.hi[0] - d.lo[0]);
  if (d.dim > 1) s[1] = d.lo[1] + u2 * (d.hi[1] - d.lo[1]);
  return s;
}

std::vector<Params> ChartManifold::sample_params(std::size_t n) const {
  const ParamDomain d = domain();
  std::vector<Params> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (d.dim == 1) {
      out.push_back(sample_map(van_der_corput(i, 2), 0.0));
    } else {
      out.push_back(sample_map(van_der_corput(i + 1, 2), van_der_corput(i + 1, 3)));
    }
  }
  return out;
}

std::vector<FramedSample> ChartManifold::samples(std::size_t n) const {
  std::vector<FramedSample> out;
  out.reserve(n);
  for (const auto& s : sample_params(n)) out.push_back({chart(s), tangent_frame(s)});
  return out;
}

std::vector<FramedSample> ChartManifold::lattice_samples(std::size_t n) const {
  const ParamDomain d = domain();
  std::array<int, 2> counts{static_cast<int>(std::max<std::size_t>(n, 2)), 1};
  if (d.dim == 2) {
    // Split n between the axes in proportion to their extents.
    const double ratio = (d.hi[0] - d.lo[0]) / (d.hi[1] - d.lo[1]);
    counts[0] = std::max(2, static_cast<int>(std::round(std::sqrt(n * ratio))));
    counts[1] = std::max(2, static_cast<int>(std::round(static_cast<double>(n) / counts[0])));
  }
  for (int i = 0; i < d.dim; ++i) {
    if (d.periodic[i] && counts[i] % 2) ++counts[i];
  }
  std::vector<FramedSample> out;
  for (int i = 0; i < counts[0]; ++i) {
    for (int j = 0; j < counts[1]; ++j) {
      Params s(d.dim);
      for (int a = 0; a < d.dim; ++a) {
        const int k = a == 0 ? i : j;
        const double u = d.periodic[a] ? double(k) / counts[a] : (k + 0.5) / counts[a];
        s[a] = d.lo[a] + u * (d.hi[a] - d.lo[a]);
      }
      out.push_back({chart(s), tangent_frame(s)});
    }
  }
  return out;
}

void ChartManifold::build_seed_table() const {
  if (!seed_table_.empty()) return;
  const ParamDomain d = domain();
  std::array<int, 2> n{1, 1};
  for (int i = 0; i < d.dim; ++i) {
    const double span = d.hi[i] - d.lo[i];
    n[i] = d.periodic[i] ? 48 : std::clamp(static_cast<int>(std::ceil(span / 0.1)) + 1, 8, 400);
  }
  for (int i = 0; i < n[0]; ++i) {
    for (int j = 0; j < n[1]; ++j) {
      Params s(d.dim);
      const double u0 = d.periodic[0] ? double(i) / n[0] : double(i) / std::max(1, n[0] - 1);
      s[0] = d.lo[0] + u0 * (d.hi[0] - d.lo[0]);
      if (d.dim > 1) {
        const double u1 = d.periodic[1] ? double(j) / n[1] : double(j) / std::max(1, n[1] - 1);
        s[1] = d.lo[1] + u1 * (d.hi[1] - d.lo[1]);
      }
      seed_table_.emplace_back(s, chart(s));
    }
  }
}

std::vector<Params> ChartManifold::seeds(const Point& z) const {
  build_seed_table();
  std::vector<std::pair<double, std::size_t>> best;
  for (std::size_t i = 0; i < seed_table_.size(); ++i) {
    best.emplace_back((seed_table_[i].second - z).squaredNorm(), i);
  }
  const std::size_t k = std::min<std::size_t>(3, best.size());
  std::partial_sort(best.begin(), best.begin() + static_cast<long>(k), best.end());
  std::vector<Params> out;
  for (std::size_t i = 0; i < k; ++i) out.push_back(seed_table_[best[i].second].first);
  return out;
}

Closest ChartManifold::closest(const Point& z) const {
  if (backend_ == ProjectionBackend::analytic) {
    if (auto c = closest_analytic(z)) return *c;
  }
  return closest_sampled(z);
}

Closest ChartManifold::closest_sampled(const Point& z) const {
  Closest best;
  best.distance = kInf;
  best.converged = false;
  for (const Params& seed : seeds(z)) {
    Params s = wrap(seed);
    Point r = chart(s) - z;
    double F = r.squaredNorm();
    double mu = 1e-3;
    for (int it = 0; it < 200; ++it) {
      const Frame J = chart_jacobian(s);
      const Params g = J.transpose() * r;
      Metric H = J.transpose() * J;
      if (g.norm() == 0.0) break;
      Metric A = H;
      for (Eigen::Index i = 0; i < A.rows(); ++i) A(i, i) += mu * H(i, i) + 1e-300;
      const Params step = -A.ldlt().solve(g);
      const Params s_new = wrap(s + step);
      const Point p_new = chart(s_new);
      const Point r_new = p_new - z;
      const double F_new = r_new.squaredNorm();
      if (F_new < F) {
        const double moved = (r_new - r).norm();
        s = s_new;
        r = r_new;
        F = F_new;
        mu = std::max(mu / 3.0, 1e-12);
        if (moved < 1e-3 * tol_.projection) break;
      } else {
        mu *= 4.0;
        if (mu > 1e10) break;
      }
    }
    // Stationarity: the residual must be normal to M (or vanish).
    const Frame T = tangent_frame(s);
    const double tangential = (T.transpose() * r).norm();
    const double dist = std::sqrt(F);
    const bool ok = dist <= 1e-13 || tangential <= std::max(1e-7 * dist, 0.1 * tol_.projection);
    if (dist < best.distance) {
      best.point = chart(s);
      best.distance = dist;
      best.converged = ok;
    }
  }
  best.unique = best.distance < reach();
  return best;
}

double ChartManifold::segment_length(const Params& a, const Params& b) const {
  const Params d = b - a;
  if (d.norm() == 0.0) return 0.0;
  double total = 0.0;
  const int panels = 2;
  for (int p = 0; p < panels; ++p) {
    for (std::size_t k = 0; k < kGl5X.size(); ++k) {
      const double u = (p + kGl5X[k]) / panels;
      const Params s = a + u * d;
      const Metric g = declared_metric(s);
      total += kGl5W[k] / panels * std::sqrt(std::max(0.0, d.dot(g * d)));
    }
  }
  return total;
}

std::vector<double> ChartManifold::graph_geodesics(const Params& src, const std::vector<Params>& targets) const {
  const ParamDomain dom = domain();
  std::vector<double> out(targets.size(), 0.0);
  if (targets.empty()) return out;

  // Minimal-image parameter offset from a to b.
  auto offset = [&](const Params& a, const Params& b) {
    Params d = b - a;
    for (int i = 0; i < dom.dim; ++i) {
      if (dom.periodic[i]) {
        const double period = dom.hi[i] - dom.lo[i];
        d[i] -= period * std::round(d[i] / period);
      }
    }
    return d;
  };

  if (dom.dim == 1) {
    for (std::size_t t = 0; t < targets.size(); ++t) {
      const Params d = offset(src, targets[t]);
      double best = segment_length(src, src + d);
      if (dom.periodic[0]) {
        const double period = dom.hi[0] - dom.lo[0];
        Params other = d;
        other[0] += d[0] > 0 ? -period : period;
        best = std::min(best, segment_length(src, src + other));
      }
      out[t] = best;
    }
    return out;
  }

  // Upper bound on all target distances from straight parameter segments.
  double upper = 0.0;
  for (const auto& t : targets) upper = std::max(upper, segment_length(src, src + offset(src, t)));
  const Metric g0 = declared_metric(src);

  std::array<double, 2> lo{}, hi{};
  for (int i = 0; i < 2; ++i) {
    if (dom.periodic[i]) {
      lo[i] = dom.lo[i];
      hi[i] = dom.hi[i];
    } else {
      double mn = src[i], mx = src[i];
      for (const auto& t : targets) {
        mn = std::min(mn, t[i]);
        mx = std::max(mx, t[i]);
      }
      const double pad = 1.5 * upper / std::sqrt(std::max(g0(i, i), 1e-12)) + 1e-9;
      lo[i] = std::max(dom.lo[i], mn - pad);
      hi[i] = std::min(dom.hi[i], mx + pad);
    }
  }
  double extent = 0.0;
  for (int i = 0; i < 2; ++i) extent = std::max(extent, (hi[i] - lo[i]) * std::sqrt(std::max(g0(i, i), 1e-12)));
  extent = std::max(extent, 1e-9);

  constexpr int S = 6;
  std::vector<std::array<int, 2>> stencil;
  for (int a = -S; a <= S; ++a) {
    for (int b = -S; b <= S; ++b) {
      if ((a == 0 && b == 0) || std::gcd(std::abs(a), std::abs(b)) != 1) continue;
      stencil.push_back({a, b});
    }
  }

  std::vector<double> prev;
  for (int level = 0; level < 6; ++level) {
    const double ell = extent / (24.0 * std::pow(2.0, level));
    std::array<int, 2> n{};
    std::array<double, 2> h{};
    for (int i = 0; i < 2; ++i) {
      const double len = (hi[i] - lo[i]) * std::sqrt(std::max(g0(i, i), 1e-12));
      if (dom.periodic[i]) {
        n[i] = std::max(8, static_cast<int>(std::ceil(len / ell)));
        h[i] = (hi[i] - lo[i]) / n[i];
      } else {
        n[i] = std::max(2, static_cast<int>(std::ceil(len / ell)) + 1);
        h[i] = (hi[i] - lo[i]) / (n[i] - 1);
      }
    }
    const std::size_t nn = static_cast<std::size_t>(n[0]) * n[1];
    if (nn > 600000) break;
    auto node_params = [&](int i, int j) {
      Params s(2);
      s[0] = lo[0] + i * h[0];
      s[1] = lo[1] + j * h[1];
      return s;
    };
    auto node_index = [&](int i, int j) -> long {
      if (dom.periodic[0]) i = ((i % n[0]) + n[0]) % n[0];
      else if (i < 0 || i >= n[0]) return -1;
      if (dom.periodic[1]) j = ((j % n[1]) + n[1]) % n[1];
      else if (j < 0 || j >= n[1]) return -1;
      return static_cast<long>(i) * n[1] + j;
    };
    // Grid coordinates of a parameter point (real-valued, minimal image near the grid).
    auto grid_coord = [&](const Params& s) {
      std::array<double, 2> c{};
      for (int i = 0; i < 2; ++i) {
        double v = s[i] - lo[i];
        if (dom.periodic[i]) {
          const double period = hi[i] - lo[i];
          v = std::fmod(v, period);
          if (v < 0) v += period;
        }
        c[i] = v / h[i];
      }
      return c;
    };

    std::vector<double> dist(nn, kInf);
    using Item = std::pair<double, long>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    const auto sc = grid_coord(src);
    const int si = static_cast<int>(std::floor(sc[0])), sj = static_cast<int>(std::floor(sc[1]));
    for (int a = -S; a <= S + 1; ++a) {
      for (int b = -S; b <= S + 1; ++b) {
        const long idx = node_index(si + a, sj + b);
        if (idx < 0) continue;
        const Params p = node_params(static_cast<int>(idx / n[1]), static_cast<int>(idx % n[1]));
        const double w = segment_length(src, src + offset(src, p));
        if (w < dist[idx]) {
          dist[idx] = w;
          pq.push({w, idx});
        }
      }
    }
    while (!pq.empty()) {
      const auto [d, idx] = pq.top();
      pq.pop();
      if (d > dist[idx]) continue;
      const int i = static_cast<int>(idx / n[1]), j = static_cast<int>(idx % n[1]);
      const Params p = node_params(i, j);
      for (const auto& st : stencil) {
        const long nb = node_index(i + st[0], j + st[1]);
        if (nb < 0) continue;
        Params step(2);
        step[0] = st[0] * h[0];
        step[1] = st[1] * h[1];
        const double nd = d + segment_length(p, p + step);
        if (nd < dist[nb]) {
          dist[nb] = nd;
          pq.push({nd, nb});
        }
      }
    }
    std::vector<double> cur(targets.size(), kInf);
    for (std::size_t t = 0; t < targets.size(); ++t) {
      const Params& tp = targets[t];
      const auto tc = grid_coord(tp);
      const int ti = static_cast<int>(std::floor(tc[0])), tj = static_cast<int>(std::floor(tc[1]));
      double best = kInf;
      for (int a = -S; a <= S + 1; ++a) {
        for (int b = -S; b <= S + 1; ++b) {
          const long idx = node_index(ti + a, tj + b);
          if (idx < 0 || !std::isfinite(dist[idx])) continue;
          const Params p = node_params(static_cast<int>(idx / n[1]), static_cast<int>(idx % n[1]));
          best = std::min(best, dist[idx] + segment_length(p, p + offset(p, tp)));
        }
      }
      const Params direct = offset(src, tp);
      if (std::abs(direct[0]) <= S * h[0] && std::abs(direct[1]) <= S * h[1]) {
        best = std::min(best, segment_length(src, src + direct));
      }
      cur[t] = best;
    }
    if (!prev.empty()) {
      double change = 0.0;
      for (std::size_t t = 0; t < cur.size(); ++t) {
        change = std::max(change, std::abs(cur[t] - prev[t]) / std::max(cur[t], ell));
      }
      if (change < tol_.geodesic_refine) return cur;
    }
    prev = std::move(cur);
  }
  fail(ErrorCode::NoConvergence, "geodesic graph refinement did not stabilize");
}

double ChartManifold::geodesic(const Point& p, const Point& q) const {
  if (backend_ == ProjectionBackend::analytic) {
    if (auto g = geodesic_analytic(p, q)) return *g;
  }
  return graph_geodesics(locate(p), {locate(q)})[0];
}

std::vector<double> ChartManifold::geodesics_from(const Point& p, const std::vector<Point>& qs) const {
  if (backend_ == ProjectionBackend::analytic && geodesic_analytic(p, p)) {
    return EmbeddedManifold::geodesics_from(p, qs);
  }
  std::vector<Params> ts;
  ts.reserve(qs.size());
  for (const auto& q : qs) ts.push_back(locate(q));
  return graph_geodesics(locate(p), ts);
}

// ---------------------------------------------------------------------------
// Circle

Circle::Circle(double r, ProjectionBackend backend) : r_(r) {
  if (!(r > 0)) fail(ErrorCode::InvalidInput, "circle radius must be positive");
  backend_ = backend;
}

ParamDomain Circle::domain() const { return {1, {0.0, 0.0}, {2 * kPi, 0.0}, {true, false}}; }

Point Circle::chart(const Params& s) const { return make_point({r_ * std::cos(s[0]), r_ * std::sin(s[0])}); }

Frame Circle::chart_jacobian(const Params& s) const {
  Frame J(2, 1);
  J << -r_ * std::sin(s[0]), r_ * std::cos(s[0]);
  return J;
}

Metric Circle::declared_metric(const Params&) const {
  Metric g(1, 1);
  g(0, 0) = r_ * r_;
  return g;
}

Params Circle::locate(const Point& p) const { return make_params({wrap_angle(std::atan2(p[1], p[0]))}); }

std::optional<Closest> Circle::closest_analytic(const Point& z) const {
  const double n = z.norm();
  if (n == 0.0) return Closest{make_point({r_, 0.0}), r_, true, false};
  return Closest{Point(z * (r_ / n)), std::abs(n - r_), true};
}

std::optional<double> Circle::geodesic_analytic(const Point& p, const Point& q) const {
  const double cross = p[0] * q[1] - p[1] * q[0];
  return r_ * std::atan2(std::abs(cross), p.dot(q));
}

std::vector<Params> Circle::seeds(const Point& z) const {
  if (z.norm() == 0.0) return {make_params({0.0})};
  return {locate(z)};
}

// ---------------------------------------------------------------------------
// Sphere: parameters (polar angle, azimuth)

Sphere::Sphere(double r, ProjectionBackend backend) : r_(r) {
  if (!(r > 0)) fail(ErrorCode::InvalidInput, "sphere radius must be positive");
  backend_ = backend;
}

ParamDomain Sphere::domain() const { return {2, {0.0, 0.0}, {kPi, 2 * kPi}, {false, true}}; }

Point Sphere::chart(const Params& s) const {
  const double st = std::sin(s[0]);
  return make_point({r_ * st * std::cos(s[1]), r_ * st * std::sin(s[1]), r_ * std::cos(s[0])});
}

Frame Sphere::chart_jacobian(const Params& s) const {
  const double st = std::sin(s[0]), ct = std::cos(s[0]), sp = std::sin(s[1]), cp = std::cos(s[1]);
  Frame J(3, 2);
  J << r_ * ct * cp, -r_ * st * sp, r_ * ct * sp, r_ * st * cp, -r_ * st, 0.0;
  return J;
}

Metric Sphere::declared_metric(const Params& s) const {
  Metric g = Metric::Zero(2, 2);
  g(0, 0) = r_ * r_;
  g(1, 1) = r_ * r_ * std::sin(s[0]) * std::sin(s[0]);
  return g;
}

Params Sphere::locate(const Point& p) const {
  const double n = p.norm();
  const double c = n > 0 ? std::clamp(p[2] / n, -1.0, 1.0) : 1.0;
  return make_params({std::acos(c), wrap_angle(std::atan2(p[1], p[0]))});
}

Frame Sphere::tangent_frame(const Params& s) const {
  const Point n = chart(s) / r_;
  Point e = make_point({1.0, 0.0, 0.0});
  if (std::abs(n[0]) > 0.6) e = make_point({0.0, 1.0, 0.0});
  Point t1 = e - e.dot(n) * n;
  t1.normalize();
  const Eigen::Vector3d n3(n[0], n[1], n[2]), t3(t1[0], t1[1], t1[2]);
  const Eigen::Vector3d t2 = n3.cross(t3);
  Frame T(3, 2);
  T.col(0) = t1;
  T.col(1) = Point(t2);
  return T;
}

Params Sphere::sample_map(double u1, double u2) const { return make_params({std::acos(1.0 - 2.0 * u1), 2 * kPi * u2}); }

std::optional<Closest> Sphere::closest_analytic(const Point& z) const {
  const double n = z.norm();
  if (n == 0.0) return Closest{make_point({0.0, 0.0, r_}), r_, true, false};
  return Closest{Point(z * (r_ / n)), std::abs(n - r_), true};
}

std::optional<double> Sphere::geodesic_analytic(const Point& p, const Point& q) const {
  const Eigen::Vector3d a(p[0], p[1], p[2]), b(q[0], q[1], q[2]);
  return r_ * std::atan2(a.cross(b).norm(), a.dot(b));
}

std::vector<Params> Sphere::seeds(const Point& z) const {
  if (z.norm() == 0.0) return {make_params({0.0, 0.0})};
  return {locate(z)};
}

// ---------------------------------------------------------------------------
// Clifford torus: (r1 cos a, r1 sin a, r2 cos b, r2 sin b)

CliffordTorus::CliffordTorus(double r1, double r2, ProjectionBackend backend) : r1_(r1), r2_(r2) {
  if (!(r1 > 0 && r2 > 0)) fail(ErrorCode::InvalidInput, "torus radii must be positive");
  backend_ = backend;
}

double CliffordTorus::diameter() const { return kPi * std::hypot(r1_, r2_); }

ParamDomain CliffordTorus::domain() const { return {2, {0.0, 0.0}, {2 * kPi, 2 * kPi}, {true, true}}; }

Point CliffordTorus::chart(const Params& s) const {
  return make_point({r1_ * std::cos(s[0]), r1_ * std::sin(s[0]), r2_ * std::cos(s[1]), r2_ * std::sin(s[1])});
}

Frame CliffordTorus::chart_jacobian(const Params& s) const {
  Frame J = Frame::Zero(4, 2);
  J(0, 0) = -r1_ * std::sin(s[0]);
  J(1, 0) = r1_ * std::cos(s[0]);
  J(2, 1) = -r2_ * std::sin(s[1]);
  J(3, 1) = r2_ * std::cos(s[1]);
  return J;
}

Metric CliffordTorus::declared_metric(const Params&) const {
  Metric g = Metric::Zero(2, 2);
  g(0, 0) = r1_ * r1_;
  g(1, 1) = r2_ * r2_;
  return g;
}

Params CliffordTorus::locate(const Point& p) const {
  return make_params({wrap_angle(std::atan2(p[1], p[0])), wrap_angle(std::atan2(p[3], p[2]))});
}

std::optional<Closest> CliffordTorus::closest_analytic(const Point& z) const {
  Point p(4);
  const double n1 = std::hypot(z[0], z[1]), n2 = std::hypot(z[2], z[3]);
  if (n1 > 0) {
    p[0] = r1_ * z[0] / n1;
    p[1] = r1_ * z[1] / n1;
  } else {
    p[0] = r1_;
    p[1] = 0.0;
  }
  if (n2 > 0) {
    p[2] = r2_ * z[2] / n2;
    p[3] = r2_ * z[3] / n2;
  } else {
    p[2] = r2_;
    p[3] = 0.0;
  }
  return Closest{p, std::hypot(n1 - r1_, n2 - r2_), true, n1 > 0 && n2 > 0};
}

std::optional<double> CliffordTorus::geodesic_analytic(const Point& p, const Point& q) const {
  const double a1 = std::atan2(std::abs(p[0] * q[1] - p[1] * q[0]), p[0] * q[0] + p[1] * q[1]);
  const double a2 = std::atan2(std::abs(p[2] * q[3] - p[3] * q[2]), p[2] * q[2] + p[3] * q[3]);
  return std::hypot(r1_ * a1, r2_ * a2);
}

std::vector<Params> CliffordTorus::seeds(const Point& z) const { return {locate(z)}; }

// ---------------------------------------------------------------------------
// Cylinder: (r cos theta, r sin theta, t)

Cylinder::Cylinder(double r, double half_window, ProjectionBackend backend) : r_(r) {
  if (!(r > 0)) fail(ErrorCode::InvalidInput, "cylinder radius must be positive");
  if (!(half_window > 0)) fail(ErrorCode::InvalidInput, "cylinder window must be positive");
  backend_ = backend;
  window_ = std::array<double, 2>{-half_window, half_window};
}

ParamDomain Cylinder::domain() const {
  return {2, {0.0, (*window_)[0]}, {2 * kPi, (*window_)[1]}, {true, false}};
}

Point Cylinder::chart(const Params& s) const { return make_point({r_ * std::cos(s[0]), r_ * std::sin(s[0]), s[1]}); }

Frame Cylinder::chart_jacobian(const Params& s) const {
  Frame J = Frame::Zero(3, 2);
  J(0, 0) = -r_ * std::sin(s[0]);
  J(1, 0) = r_ * std::cos(s[0]);
  J(2, 1) = 1.0;
  return J;
}

Metric Cylinder::declared_metric(const Params&) const {
  Metric g = Metric::Zero(2, 2);
  g(0, 0) = r_ * r_;
  g(1, 1) = 1.0;
  return g;
}

Params Cylinder::locate(const Point& p) const { return make_params({wrap_angle(std::atan2(p[1], p[0])), p[2]}); }

std::optional<Closest> Cylinder::closest_analytic(const Point& z) const {
  const double rho = std::hypot(z[0], z[1]);
  if (rho == 0.0) return Closest{make_point({r_, 0.0, z[2]}), r_, true, false};
  return Closest{make_point({r_ * z[0] / rho, r_ * z[1] / rho, z[2]}), std::abs(rho - r_), true};
}

std::optional<double> Cylinder::geodesic_analytic(const Point& p, const Point& q) const {
  const double a = std::atan2(std::abs(p[0] * q[1] - p[1] * q[0]), p[0] * q[0] + p[1] * q[1]);
  return std::hypot(r_ * a, q[2] - p[2]);
}

std::vector<Params> Cylinder::seeds(const Point& z) const { return {wrap(locate(z))}; }

// ---------------------------------------------------------------------------
// Warped cylinder

WarpedCylinder::WarpedCylinder(WarpFunction f, double half_window, std::optional<double> declared_reach)
    : f_(std::move(f)), T_(half_window) {
  if (!(half_window > 0)) fail(ErrorCode::InvalidInput, "warped cylinder window must be positive");
  backend_ = ProjectionBackend::sampled;
  window_ = std::array<double, 2>{-T_, T_};
  const Interval fr = f_.range(0, -T_ - 1, T_ + 1);
  const Interval dr = f_.range(1, -T_ - 1, T_ + 1);
  if (!(fr.lo > 0)) fail(ErrorCode::InvalidInput, "warping function must stay positive on the window");
  if (!(std::max(std::abs(dr.lo), std::abs(dr.hi)) < 1.0)) {
    fail(ErrorCode::InvalidInput, "warping function needs sup|f'| < 1 to embed as a surface of revolution");
  }
  // Tabulate a(t) = int_0^t sqrt(1 - f'^2) by 5-point Gauss-Legendre per cell.
  tab_h_ = 1.0 / 256.0;
  tab_lo_ = -T_ - 1.0;
  const std::size_t cells = static_cast<std::size_t>(std::ceil((2 * T_ + 2.0) / tab_h_));
  tab_a_.assign(cells + 1, 0.0);
  tab_f_.assign(cells + 1, 0.0);
  for (std::size_t c = 0; c < cells; ++c) {
    const double t0 = tab_lo_ + c * tab_h_;
    double acc = 0.0;
    for (std::size_t k = 0; k < kGl5X.size(); ++k) {
      const double d = f_.derivative(1, t0 + kGl5X[k] * tab_h_);
      acc += kGl5W[k] * std::sqrt(1.0 - d * d);
    }
    tab_a_[c + 1] = tab_a_[c] + acc * tab_h_;
  }
  for (std::size_t c = 0; c <= cells; ++c) tab_f_[c] = f_(tab_lo_ + c * tab_h_);
  // shift so that a(0) = 0
  const double a0 = axial(0.0);
  for (auto& a : tab_a_) a -= a0;
  reach_ = declared_reach ? *declared_reach : federer_reach(*this, 400).value;
}

double WarpedCylinder::axial(double t) const {
  const double u = (t - tab_lo_) / tab_h_;
  const long last = static_cast<long>(tab_a_.size()) - 1;
  long c = static_cast<long>(std::floor(u));
  c = std::clamp<long>(c, 0, last - 1);
  const double s = u - c;
  const double t0 = tab_lo_ + c * tab_h_;
  const double d0 = f_.derivative(1, t0), d1 = f_.derivative(1, t0 + tab_h_);
  const double m0 = std::sqrt(1.0 - d0 * d0) * tab_h_, m1 = std::sqrt(1.0 - d1 * d1) * tab_h_;
  const double y0 = tab_a_[c], y1 = tab_a_[c + 1];
  const double s2 = s * s, s3 = s2 * s;
  return (2 * s3 - 3 * s2 + 1) * y0 + (s3 - 2 * s2 + s) * m0 + (-2 * s3 + 3 * s2) * y1 + (s3 - s2) * m1;
}

ParamDomain WarpedCylinder::domain() const { return {2, {-T_, 0.0}, {T_, 2 * kPi}, {false, true}}; }

Point WarpedCylinder::chart(const Params& s) const {
  const double f = f_(s[0]);
  return make_point({axial(s[0]), f * std::cos(s[1]), f * std::sin(s[1])});
}

Frame WarpedCylinder::chart_jacobian(const Params& s) const {
  const double f = f_(s[0]), df = f_.derivative(1, s[0]);
  Frame J(3, 2);
  J << std::sqrt(1.0 - df * df), 0.0, df * std::cos(s[1]), -f * std::sin(s[1]), df * std::sin(s[1]),
      f * std::cos(s[1]);
  return J;
}

Metric WarpedCylinder::declared_metric(const Params& s) const {
  Metric g = Metric::Zero(2, 2);
  const double f = f_(s[0]);
  g(0, 0) = 1.0;
  g(1, 1) = f * f;
  return g;
}

Params WarpedCylinder::locate(const Point& p) const {
  // The profile (a(t), f(t)) is a graph over a with a' > 0; invert a by bisection.
  double lo = -T_, hi = T_;
  for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
    const double mid = 0.5 * (lo + hi);
    (axial(mid) < p[0] ? lo : hi) = mid;
  }
  return make_params({0.5 * (lo + hi), wrap_angle(std::atan2(p[2], p[1]))});
}

std::vector<Params> WarpedCylinder::seeds(const Point& z) const {
  const double rho = std::hypot(z[1], z[2]);
  const double theta = rho > 0 ? wrap_angle(std::atan2(z[2], z[1])) : 0.0;
  // Nearest point shares the meridian half-plane of z; search the profile.
  const long first = static_cast<long>(std::ceil((-T_ - tab_lo_) / tab_h_));
  const long last = static_cast<long>(std::floor((T_ - tab_lo_) / tab_h_));
  std::vector<std::pair<double, long>> cand;
  const long stride = 4;
  double prev2 = kInf, prev1 = kInf;
  long prev_idx = first;
  for (long c = first; c <= last; c += stride) {
    const double d = std::pow(z[0] - tab_a_[c], 2) + std::pow(rho - tab_f_[c], 2);
    if (c > first && prev1 <= d && prev1 <= prev2) cand.emplace_back(prev1, prev_idx);
    prev2 = prev1;
    prev1 = d;
    prev_idx = c;
  }
  if (prev1 <= prev2) cand.emplace_back(prev1, prev_idx);
  std::sort(cand.begin(), cand.end());
  std::vector<Params> out;
  for (std::size_t i = 0; i < std::min<std::size_t>(3, cand.size()); ++i) {
    out.push_back(make_params({tab_lo_ + cand[i].second * tab_h_, theta}));
  }
  if (out.empty()) out.push_back(make_params({0.0, theta}));
  return out;
}

nlohmann::json WarpedCylinder::parameters_json() const { return {{"warp", f_.to_json()}, {"reach", reach_}}; }

// ---------------------------------------------------------------------------
// Flat patch

FlatPatch::FlatPatch(int dim, double half_width) : dim_(dim), w_(half_width) {
  if (dim < 1 || dim > 2) fail(ErrorCode::InvalidInput, "flat patch dimension must be 1 or 2");
  if (!(half_width > 0)) fail(ErrorCode::InvalidInput, "flat patch half width must be positive");
}

ParamDomain FlatPatch::domain() const {
  const double w = std::isfinite(w_) ? w_ : 1.0;
  return {dim_, {-w, -w}, {w, w}, {false, false}};
}

Point FlatPatch::chart(const Params& s) const {
  Point p(dim_);
  for (int i = 0; i < dim_; ++i) p[i] = s[i];
  return p;
}

Frame FlatPatch::chart_jacobian(const Params&) const { return Frame::Identity(dim_, dim_); }

Metric FlatPatch::declared_metric(const Params&) const { return Metric::Identity(dim_, dim_); }

Params FlatPatch::locate(const Point& p) const {
  Params s(dim_);
  for (int i = 0; i < dim_; ++i) s[i] = p[i];
  return s;
}

std::optional<Closest> FlatPatch::closest_analytic(const Point& z) const {
  Point p = z;
  for (int i = 0; i < dim_; ++i) p[i] = std::clamp(z[i], -w_, w_);
  return Closest{p, (z - p).norm(), true};
}

std::optional<double> FlatPatch::geodesic_analytic(const Point& p, const Point& q) const { return (p - q).norm(); }

// ---------------------------------------------------------------------------
// Point cloud

PointCloud::PointCloud(std::vector<FramedSample> pts, std::optional<double> declared_reach, std::string source)
    : pts_(std::move(pts)), source_(std::move(source)) {
  if (pts_.size() < 2) fail(ErrorCode::InvalidInput, "point cloud needs at least two samples");
  backend_ = ProjectionBackend::sampled;
  for (auto& s : pts_) s.tangent = orthonormalize(s.tangent);
  const std::size_t n = pts_.size();
  const std::size_t k = std::min<std::size_t>(8, n - 1);
  adj_.assign(n, {});
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::pair<double, std::size_t>> d;
    d.reserve(n - 1);
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) d.emplace_back((pts_[i].point - pts_[j].point).norm(), j);
    }
    std::partial_sort(d.begin(), d.begin() + static_cast<long>(k), d.end());
    for (std::size_t a = 0; a < k; ++a) {
      adj_[i].emplace_back(d[a].second, d[a].first);
      adj_[d[a].second].emplace_back(i, d[a].first);
    }
  }
  reach_ = declared_reach ? *declared_reach : federer_reach(*this, std::min<std::size_t>(n, 2000)).value;
}

std::shared_ptr<PointCloud> PointCloud::from_csv(const std::string& path, std::optional<double> declared_reach) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::InvalidInput, "cannot open point cloud '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) fail(ErrorCode::InvalidInput, "empty point cloud file");
  std::vector<std::string> cols;
  {
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) cols.push_back(c);
  }
  int amb = 0, tang = 0;
  for (const auto& c : cols) {
    if (!c.empty() && c[0] == 'x') ++amb;
    if (!c.empty() && c[0] == 't') ++tang;
  }
  if (amb == 0 || tang == 0 || tang % amb != 0) fail(ErrorCode::InvalidInput, "point cloud header needs x<i> and t<k>_<i> columns");
  const int n = tang / amb;
  std::vector<FramedSample> pts;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::stringstream ss(line);
    std::string c;
    std::vector<double> v;
    while (std::getline(ss, c, ',')) v.push_back(std::stod(c));
    if (static_cast<int>(v.size()) != amb + tang) fail(ErrorCode::InvalidInput, "point cloud row has wrong width");
    FramedSample s{Point(amb), Frame(amb, n)};
    for (int i = 0; i < amb; ++i) s.point[i] = v[i];
    for (int k = 0; k < n; ++k) {
      for (int i = 0; i < amb; ++i) s.tangent(i, k) = v[amb + k * amb + i];
    }
    pts.push_back(std::move(s));
  }
  return std::make_shared<PointCloud>(std::move(pts), declared_reach, path);
}

int PointCloud::ambient_dim() const { return static_cast<int>(pts_.front().point.size()); }
int PointCloud::intrinsic_dim() const { return static_cast<int>(pts_.front().tangent.cols()); }

double PointCloud::diameter() const {
  double d = 0.0;
  for (const auto& v : dijkstra(0)) d = std::max(d, v);
  return 2.0 * d;
}

std::size_t PointCloud::nearest(const Point& z) const {
  std::size_t best = 0;
  double bd = kInf;
  for (std::size_t i = 0; i < pts_.size(); ++i) {
    const double d = (pts_[i].point - z).squaredNorm();
    if (d < bd) {
      bd = d;
      best = i;
    }
  }
  return best;
}

Closest PointCloud::closest(const Point& z) const {
  const auto& s = pts_[nearest(z)];
  const Point p = s.point + s.tangent * (s.tangent.transpose() * (z - s.point));
  const double d = (z - p).norm();
  return {p, d, true, d < reach_};
}

std::vector<double> PointCloud::dijkstra(std::size_t src) const {
  std::vector<double> dist(pts_.size(), kInf);
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  dist[src] = 0.0;
  pq.push({0.0, src});
  while (!pq.empty()) {
    const auto [d, i] = pq.top();
    pq.pop();
    if (d > dist[i]) continue;
    for (const auto& [j, w] : adj_[i]) {
      if (d + w < dist[j]) {
        dist[j] = d + w;
        pq.push({dist[j], j});
      }
    }
  }
  return dist;
}

double PointCloud::geodesic(const Point& p, const Point& q) const { return geodesics_from(p, {q})[0]; }

std::vector<double> PointCloud::geodesics_from(const Point& p, const std::vector<Point>& qs) const {
  const std::size_t sp = nearest(p);
  const auto dist = dijkstra(sp);
  std::vector<double> out;
  for (const auto& q : qs) {
    const std::size_t sq = nearest(q);
    out.push_back(sp == sq ? (p - q).norm() : std::max((p - q).norm(), dist[sq]));
  }
  return out;
}

std::vector<FramedSample> PointCloud::samples(std::size_t n) const {
  n = std::min(n, pts_.size());
  return {pts_.begin(), pts_.begin() + static_cast<long>(n)};
}

nlohmann::json PointCloud::parameters_json() const {
  return {{"file", source_}, {"samples", pts_.size()}, {"reach", reach_}};
}

// ---------------------------------------------------------------------------
// Factory

std::shared_ptr<const EmbeddedManifold> make_manifold(const nlohmann::json& spec, const std::string& base_dir) {
  try {
    const std::string kind = spec.at("kind").get<std::string>();
    const nlohmann::json params = spec.value("parameters", nlohmann::json::object());
    const std::string backend_name = spec.value("projection_backend", std::string("analytic"));
    if (backend_name != "analytic" && backend_name != "sampled") {
      fail(ErrorCode::InvalidInput, "projection_backend must be analytic or sampled");
    }
    const ProjectionBackend backend = backend_name == "sampled" ? ProjectionBackend::sampled : ProjectionBackend::analytic;
    double half_window = 4.0;
    if (spec.contains("truncation_window")) {
      const auto& w = spec["truncation_window"];
      if (w.is_array()) {
        half_window = std::max(std::abs(w.at(0).get<double>()), std::abs(w.at(1).get<double>()));
      } else {
        half_window = w.get<double>();
      }
    }
    std::shared_ptr<EmbeddedManifold> m;
    if (kind == "circle") {
      m = std::make_shared<Circle>(params.value("radius", 1.0), backend);
    } else if (kind == "sphere") {
      m = std::make_shared<Sphere>(params.value("radius", 1.0), backend);
    } else if (kind == "clifford_torus") {
      m = std::make_shared<CliffordTorus>(params.value("r1", 1.0), params.value("r2", 1.0), backend);
    } else if (kind == "cylinder") {
      m = std::make_shared<Cylinder>(params.value("radius", 1.0), half_window, backend);
    } else if (kind == "warped_cylinder") {
      std::optional<double> reach;
      if (params.contains("reach")) reach = params["reach"].get<double>();
      m = std::make_shared<WarpedCylinder>(WarpFunction::from_json(params.at("warp")), half_window, reach);
    } else if (kind == "flat") {
      double w = kInf;
      if (params.contains("half_width") && params["half_width"].is_number()) w = params["half_width"].get<double>();
      m = std::make_shared<FlatPatch>(params.value("dim", 2), w);
    } else if (kind == "point_cloud") {
      std::optional<double> reach;
      if (params.contains("reach")) reach = params["reach"].get<double>();
      std::filesystem::path file = params.at("file").get<std::string>();
      if (file.is_relative()) file = std::filesystem::path(base_dir) / file;
      m = PointCloud::from_csv(file.string(), reach);
    } else {
      fail(ErrorCode::InvalidInput, "unknown manifold kind '" + kind + "'");
    }
    if (spec.contains("tolerances")) {
      const auto& t = spec["tolerances"];
      Tolerances tol;
      tol.projection = t.value("projection", tol.projection);
      tol.on_manifold = t.value("on_manifold", tol.on_manifold);
      tol.geodesic_refine = t.value("geodesic_refine", tol.geodesic_refine);
      m->set_tolerances(tol);
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::InvalidInput, std::string("malformed manifold spec: ") + e.what());
  }
}

std::shared_ptr<const EmbeddedManifold> load_manifold(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::InvalidInput, "cannot open manifold spec '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::InvalidInput, std::string("malformed manifold spec: ") + e.what());
  }
  return make_manifold(j, std::filesystem::path(path).parent_path().string());
}

// ---------------------------------------------------------------------------
// Free operations

Point project(const EmbeddedManifold& M, const Point& z) {
  if (z.size() != M.ambient_dim()) fail(ErrorCode::InvalidInput, "point has wrong ambient dimension");
  const Closest c = M.closest(z);
  if (!c.unique) fail(ErrorCode::OutsideTube, "distance " + std::to_string(c.distance) + " >= reach, nearest point not unique");
  if (!c.converged) fail(ErrorCode::NoConvergence, "sampled projection did not settle");
  return c.point;
}

bool tube_membership(const EmbeddedManifold& M, const Point& z, double margin) {
  return M.closest(z).distance <= margin;
}

ReachEstimate federer_reach(const EmbeddedManifold& M, std::size_t sample_count) {
  if (sample_count < 2) fail(ErrorCode::InvalidInput, "federer_reach needs at least two samples");
  const auto s = M.samples(sample_count);
  ReachEstimate est;
  est.exact = M.exact_reach();
  est.sample_count = s.size();
  double value = kInf;
  std::size_t next_mark = 2;
  auto quotient = [](const FramedSample& p, const Point& q) {
    const Point v = q - p.point;
    const Point normal = v - p.tangent * (p.tangent.transpose() * v);
    const double nn = normal.norm();
    if (nn <= 1e-14 * v.norm()) return kInf;
    return v.squaredNorm() / (2.0 * nn);
  };
  for (std::size_t j = 1; j < s.size(); ++j) {
    for (std::size_t i = 0; i < j; ++i) {
      value = std::min(value, quotient(s[i], s[j].point));
      value = std::min(value, quotient(s[j], s[i].point));
    }
    if (j + 1 == next_mark || j + 1 == s.size()) {
      est.monotone_history.emplace_back(j + 1, value);
      if (j + 1 == next_mark) next_mark *= 2;
    }
  }
  est.value = value;
  return est;
}

double geodesic_distance(const EmbeddedManifold& M, const Point& p, const Point& q) {
  const double tol = M.tolerances().on_manifold;
  if (!tube_membership(M, p, tol) || !tube_membership(M, q, tol)) {
    fail(ErrorCode::NotOnManifold, "geodesic_distance inputs must lie on the manifold");
  }
  if ((p - q).norm() == 0.0) return 0.0;
  return M.geodesic(p, q);
}

ComparabilityConstant comparability_K(const EmbeddedManifold& M, double L, std::size_t sample_count) {
  if (!(L > 0)) fail(ErrorCode::InvalidInput, "L must be positive");
  std::vector<Point> pts;
  for (const auto& s : M.lattice_samples(sample_count)) {
    if (s.point.norm() <= 2.0 * L) pts.push_back(s.point);
  }
  if (pts.empty()) fail(ErrorCode::EmptyIntersection, "manifold misses the closed ball of radius 2L");
  ComparabilityConstant out;
  out.L = L;
  out.sample_count = pts.size();
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    std::vector<Point> rest(pts.begin() + static_cast<long>(i) + 1, pts.end());
    const auto g = M.geodesics_from(pts[i], rest);
    for (std::size_t j = 0; j < rest.size(); ++j) {
      const double chord = (rest[j] - pts[i]).norm();
      if (chord > 1e-12) out.K = std::max(out.K, g[j] / chord);
    }
  }
  return out;
}

double isometry_defect(const ChartManifold& M, std::size_t n) {
  double worst = 0.0;
  const double h = 1e-6;
  for (const auto& s : M.sample_params(n)) {
    Frame J(M.ambient_dim(), s.size());
    for (Eigen::Index c = 0; c < s.size(); ++c) {
      Params a = s, b = s;
      a[c] += h;
      b[c] -= h;
      J.col(c) = (M.chart(a) - M.chart(b)) / (2 * h);
    }
    const Metric pull = J.transpose() * J;
    const Metric g = M.declared_metric(s);
    worst = std::max(worst, (pull - g).norm() / std::max(g.norm(), 1e-300));
  }
  return worst;
}

}  // namespace singext
