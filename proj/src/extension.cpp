#include "singext/extension.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "singext/error.hpp"
#include "singext/parallel.hpp"

namespace singext {

Point homogeneous_value(const Region& box, const BoxTrace& trace, double x, double y) {
  const double dx = x - box.sx;
  const double dy = y - box.sy;
  const double s = std::max(dx > 0 ? dx / (box.x1 - box.sx) : -dx / (box.sx - box.x0),
                            dy > 0 ? dy / (box.y1 - box.sy) : -dy / (box.sy - box.y0));
  if (s < 1e-15) return trace(box.x1, box.sy);
  return trace(box.sx + dx / s, box.sy + dy / s);
}

namespace {

// Boundary points of a box, side by side (bottom, top, left, right), with n
// intervals per side plus their midpoints.
struct BoundarySample {
  double x, y;
  int side;  // 0 bottom, 1 top, 2 left, 3 right
};

std::vector<BoundarySample> boundary_samples(const Region& r, int n, bool with_bottom) {
  std::vector<BoundarySample> out;
  const int k = 2 * n;
  for (int side = 0; side < 4; ++side) {
    if (side == 0 && !with_bottom) continue;
    for (int i = 0; i <= k; ++i) {
      const double t = static_cast<double>(i) / k;
      switch (side) {
        case 0: out.push_back({r.x0 + t * (r.x1 - r.x0), r.y0, 0}); break;
        case 1: out.push_back({r.x0 + t * (r.x1 - r.x0), r.y1, 1}); break;
        case 2: out.push_back({r.x0, r.y0 + t * (r.y1 - r.y0), 2}); break;
        default: out.push_back({r.x1, r.y0 + t * (r.y1 - r.y0), 3}); break;
      }
    }
  }
  return out;
}

int side_intervals(double len, double hx, int lo, int hi) {
  return std::clamp(static_cast<int>(std::ceil(len / hx)), lo, hi);
}

bool overlaps(const Region& a, const Region& b) {
  const double tol = 1e-12 * std::max({a.x1 - a.x0, b.x1 - b.x0, 1e-300});
  return std::min(a.x1, b.x1) - std::max(a.x0, b.x0) > tol && std::min(a.y1, b.y1) - std::max(a.y0, b.y0) > tol;
}

bool seeds_before(const Region& a, const Region& b) {
  return a.seed_generation != b.seed_generation ? a.seed_generation > b.seed_generation : a.seed_dist > b.seed_dist;
}

void take_seed(Region& r, const Region& o) {
  r.sx = o.sx;
  r.sy = o.sy;
  r.seed_generation = o.seed_generation;
  r.seed_dist = o.seed_dist;
}

void absorb(Region& r, const Region& o) {
  r.x0 = std::min(r.x0, o.x0);
  r.x1 = std::max(r.x1, o.x1);
  r.y0 = std::min(r.y0, o.y0);
  r.y1 = std::max(r.y1, o.y1);
  r.floor = r.floor || o.floor;
}

Region cube_box(const Cube& c) {
  Region r;
  r.x0 = c.lo[0];
  r.x1 = c.lo[0] + c.edge;
  r.y0 = c.lo[1];
  r.y1 = c.lo[1] + c.edge;
  r.sx = c.lo[0] + 0.5 * c.edge;
  r.sy = c.lo[1] + 0.5 * c.edge;
  return r;
}

bool merge_overlapping(std::vector<Region>& regions) {
  bool any = false;
  for (bool again = true; again;) {
    again = false;
    for (std::size_t i = 0; i < regions.size() && !again; ++i) {
      for (std::size_t j = i + 1; j < regions.size(); ++j) {
        if (!overlaps(regions[i], regions[j])) continue;
        if (seeds_before(regions[j], regions[i])) take_seed(regions[i], regions[j]);
        absorb(regions[i], regions[j]);
        regions.erase(regions.begin() + static_cast<std::ptrdiff_t>(j));
        again = any = true;
        break;
      }
    }
  }
  return any;
}

double slab_spacing(const SlabSpec& s) { return (s.x_hi - s.x_lo) / std::max(1, s.nx - 1); }

Point project_or_fail(const EmbeddedManifold& M, const Point& z, const char* where) {
  const Closest c = M.closest(z);
  if (!c.converged || c.distance >= M.reach()) {
    fail(ErrorCode::BoundaryNotOnManifold, std::string(where) + " at distance " + std::to_string(c.distance));
  }
  return c.point;
}

// Trace of a region: the projected average on its upper faces and, for floor
// regions, the projected piecewise-linear map on y = 0.
BoxTrace region_trace(const Region& r, const AveragingOperator& op, const EmbeddedManifold& M) {
  return [r, &op, &M](double x, double y) -> Point {
    if (r.floor && y <= r.y0 + 1e-12 * (r.y1 - r.y0)) {
      const Point z = op.trace(make_point({x}));
      const Closest c = M.closest(z);
      if (c.converged && c.unique && c.distance < M.reach()) return c.point;
      // Nearest node value when the linear reading leaves the tube.
      const SurfaceMap& u = op.map();
      std::size_t best = 0;
      double bd = kInf;
      for (std::size_t i = 0; i < u.size(); ++i) {
        const double d = std::abs(u.coords[i][0] - x);
        if (d < bd) bd = d, best = i;
      }
      if (u.tail && (x < u.tail->lo[0] || x > u.tail->hi[0])) return u.tail->value;
      return u.values[best];
    }
    return project_or_fail(M, op(x, y), "region boundary");
  };
}

}  // namespace

std::vector<Point> homogeneous_extend(const Region& box, const BoxTrace& trace, const EmbeddedManifold& M,
                                      const std::vector<std::array<double, 2>>& points, int samples_per_side) {
  for (const BoundarySample& s : boundary_samples(box, std::max(1, samples_per_side / 2), true)) {
    const Point p = trace(s.x, s.y);
    if (!tube_membership(M, p, M.tolerances().on_manifold)) {
      fail(ErrorCode::BoundaryNotOnManifold, "boundary trace leaves M at (" + std::to_string(s.x) + ", " +
                                                 std::to_string(s.y) + ")");
    }
  }
  std::vector<Point> out;
  out.reserve(points.size());
  for (const auto& q : points) out.push_back(homogeneous_value(box, trace, q[0], q[1]));
  return out;
}

nlohmann::json ExtensionConfig::to_json() const {
  nlohmann::json j = {{"mode", mode_name(mode)},
                      {"eta", eta},
                      {"c1", c1},
                      {"K_samples", K_samples},
                      {"slab", slab.to_json()},
                      {"n_tau", scan.n_tau},
                      {"n_h", scan.n_h},
                      {"safety", scan.cube.safety},
                      {"max_repairs", max_repairs}};
  j["K"] = K ? nlohmann::json(*K) : nlohmann::json(nullptr);
  return j;
}

SlabSpec default_slab(const SurfaceMap& u, int nx) {
  if (!u.tail || u.m != 1) fail(ErrorCode::InvalidInput, "default slab needs a line map with a tail");
  const double a = u.tail->lo[0], b = u.tail->hi[0];
  const double W = b - a;
  SlabSpec s;
  s.m = 1;
  s.x_lo = a - W;
  s.x_hi = b + W;
  s.nx = nx;
  s.h_max = W;
  s.h_min = W / 512.0;
  s.ny = std::max(8, nx / 16);
  return s;
}

double level_measure(const std::vector<double>& grad, const std::vector<double>& weights, double t) {
  double s = 0.0;
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (grad[i] >= t) s += weights[i];
  }
  return s;
}

DistributionReport distribution(const std::vector<double>& grad, const std::vector<double>& weights, int m,
                                int report_points) {
  if (grad.size() != weights.size()) fail(ErrorCode::InvalidInput, "gradient and weight sizes differ");
  DistributionReport r;
  const double p = m + 1;
  std::vector<std::size_t> order(grad.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return grad[a] > grad[b]; });
  // Exact sup of t^p mu(t): attained at a data value, with mu counting ties.
  double cum = 0.0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const double g = grad[order[k]];
    cum += weights[order[k]];
    if (k + 1 < order.size() && grad[order[k + 1]] == g) continue;
    if (g > 0) r.weak_norm = std::max(r.weak_norm, std::pow(g, p) * cum);
  }
  for (std::size_t i = 0; i < grad.size(); ++i) {
    r.measure += weights[i];
    r.w11_norm += weights[i] * grad[i];
    r.dirichlet += weights[i] * grad[i] * grad[i];
    r.strong_norm += weights[i] * std::pow(grad[i], p);
  }
  const double gmax = grad.empty() ? 0.0 : grad[order.front()];
  if (!(gmax > 0)) {
    // Zero field: one row, mu vanishes for every t > 0.
    r.t = {0.0};
    r.mu = {0.0};
    return r;
  }
  // mu(t) on a descending sweep of the sorted values.
  auto mu_on = [&](const std::vector<double>& ts) {
    std::vector<double> mu(ts.size());
    std::size_t k = 0;
    double acc = 0.0;
    for (std::size_t i = ts.size(); i-- > 0;) {
      while (k < order.size() && grad[order[k]] >= ts[i]) acc += weights[order[k++]];
      mu[i] = acc;
    }
    return mu;
  };
  // Layer cake: trapezoid on a log grid above t_lo, mu(t_lo) t_lo below it.
  const int nq = 4096;
  const double t_lo = gmax * 1e-6;
  std::vector<double> tq(nq);
  for (int i = 0; i < nq; ++i) tq[i] = t_lo * std::pow(gmax / t_lo, static_cast<double>(i) / (nq - 1));
  const std::vector<double> mq = mu_on(tq);
  r.layer_cake = mq.front() * t_lo;
  for (int i = 0; i + 1 < nq; ++i) r.layer_cake += 0.5 * (mq[i] + mq[i + 1]) * (tq[i + 1] - tq[i]);
  r.t.resize(report_points);
  for (int i = 0; i < report_points; ++i) {
    r.t[i] = gmax * std::pow(1e-3, 1.0 - static_cast<double>(i) / std::max(1, report_points - 1));
  }
  r.mu = mu_on(r.t);
  return r;
}

nlohmann::json DistributionReport::to_json() const {
  return {{"weak_norm", weak_norm},     {"w11_norm", w11_norm}, {"dirichlet", dirichlet},
          {"strong_norm", strong_norm}, {"layer_cake", layer_cake}, {"measure", measure},
          {"singular_count", singular_count}, {"collar", collar}, {"t", t}, {"mu", mu}};
}

std::string DistributionReport::to_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "t,mu\n";
  for (std::size_t i = 0; i < t.size(); ++i) os << t[i] << "," << mu[i] << "\n";
  return os.str();
}

void gradient_field(ExtensionField& U) {
  const std::size_t nx = U.xs.size(), ny = U.heights.size();
  if (nx < 2 || ny < 2) fail(ErrorCode::InvalidInput, "gradient needs at least 2 x 2 nodes");
  U.grad.assign(nx * ny, 0.0);
  U.weights.assign(nx * ny, 0.0);
  // Values equal up to rounding difference to zero, so constant fields have
  // an exactly vanishing gradient.
  auto difference = [](const Point& a, const Point& b) -> Point {
    const Point d = a - b;
    const double floor = 8 * std::numeric_limits<double>::epsilon() * (a.norm() + b.norm());
    return d.norm() <= floor ? Point(Point::Zero(d.size())) : d;
  };
  auto half_span = [](const std::vector<double>& v, std::size_t i) {
    const std::size_t a = i == 0 ? 0 : i - 1;
    const std::size_t b = i + 1 == v.size() ? i : i + 1;
    return 0.5 * (v[b] - v[a]);
  };
  for (std::size_t ih = 0; ih < ny; ++ih) {
    const std::size_t h0 = ih == 0 ? 0 : ih - 1, h1 = ih + 1 == ny ? ih : ih + 1;
    for (std::size_t ix = 0; ix < nx; ++ix) {
      const std::size_t x0 = ix == 0 ? 0 : ix - 1, x1 = ix + 1 == nx ? ix : ix + 1;
      const Point dx = difference(U.values[U.index(ih, x1)], U.values[U.index(ih, x0)]) / (U.xs[x1] - U.xs[x0]);
      const Point dy = difference(U.values[U.index(h1, ix)], U.values[U.index(h0, ix)]) / (U.heights[h1] - U.heights[h0]);
      U.grad[U.index(ih, ix)] = std::sqrt(dx.squaredNorm() + dy.squaredNorm());
      U.weights[U.index(ih, ix)] = half_span(U.xs, ix) * half_span(U.heights, ih);
    }
  }
}

std::vector<std::optional<Point>> reproject_good(const AveragedField& V, const CubeClassification& cls,
                                                 const EmbeddedManifold& M, double delta_N) {
  std::set<std::pair<int, long>> bad;
  for (std::size_t i = 0; i < cls.cubes.size(); ++i) {
    if (cls.bad[i]) bad.insert({cls.cubes[i].k, cls.cubes[i].j[0]});
  }
  std::vector<std::optional<Point>> out(V.values.size());
  for (std::size_t ih = 0; ih < V.heights.size(); ++ih) {
    for (std::size_t ix = 0; ix < V.xs.size(); ++ix) {
      const Cube c = cube_containing(cls.family, make_point({V.xs[ix]}), V.heights[ih]);
      if (bad.count({c.k, c.j[0]})) continue;
      const std::size_t n = V.index(ih, ix);
      const Closest p = M.closest(V.values[n]);
      if (!p.unique || !p.converged || p.distance >= delta_N) {
        fail(ErrorCode::TubeEscape, "good-cube node (" + std::to_string(V.xs[ix]) + ", " +
                                        std::to_string(V.heights[ih]) + ") at distance " + std::to_string(p.distance));
      }
      out[n] = p.point;
    }
  }
  return out;
}

std::vector<Region> grow_regions(const std::vector<Cube>& bad, const CubeFamily& family, const AveragedField& V,
                                 const EmbeddedManifold& M, double cut, double floor_height) {
  if (family.m != 1) fail(ErrorCode::Unsupported, "regions are implemented for m = 1");
  std::vector<Cube> sorted = bad;
  std::sort(sorted.begin(), sorted.end(), [](const Cube& a, const Cube& b) {
    return a.k != b.k ? a.k < b.k : a.j[0] < b.j[0];
  });
  std::vector<Region> regions;
  auto dist_at = [&](double x, double y) { return M.closest(V.at(x, y)).distance; };
  for (const Cube& c : sorted) {
    Region box = cube_box(c);
    box.seed_generation = c.k;
    box.seed_dist = dist_at(box.sx, box.sy);
    auto host = std::find_if(regions.begin(), regions.end(), [&](const Region& r) {
      return box.x0 >= r.x0 && box.x1 <= r.x1 && box.y0 >= r.y0 && box.y1 <= r.y1;
    });
    // Nested finer cubes are absorbed but move the seed down to them.
    if (host == regions.end()) {
      regions.push_back(box);
    } else if (seeds_before(box, *host)) {
      take_seed(*host, box);
    }
  }
  const double hx = slab_spacing(V.slab);
  const double width_cap = 64.0 * (V.slab.x_hi - V.slab.x_lo), height_cap = 64.0 * V.slab.h_max;
  for (int iter = 0;; ++iter) {
    if (iter > 100000) fail(ErrorCode::CoverageGap, "region growth does not settle");
    bool changed = merge_overlapping(regions);
    for (Region& r : regions) {
      const int n = side_intervals(std::max(r.x1 - r.x0, r.y1 - r.y0), hx, 8, 1024);
      Region grown = r;
      for (const BoundarySample& s : boundary_samples(r, n, !r.floor)) {
        if (s.y <= 0) continue;
        if (dist_at(s.x, s.y) < cut) continue;
        const double eps = 1e-9 * (r.x1 - r.x0);
        double px = s.x, py = s.y;
        switch (s.side) {
          case 0:
            if (r.y0 <= floor_height * (1.0 + 1e-12)) {
              grown.floor = true;
              grown.y0 = 0.0;
              continue;
            }
            py -= eps;
            break;
          case 1: py += eps; break;
          case 2: px -= eps; break;
          default: px += eps; break;
        }
        py = std::max(py, floor_height);
        const Region box = cube_box(cube_containing(family, make_point({px}), py));
        absorb(grown, box);
        if (grown.floor) grown.y0 = 0.0;
      }
      if (grown.x0 != r.x0 || grown.x1 != r.x1 || grown.y0 != r.y0 || grown.y1 != r.y1 || grown.floor != r.floor) {
        r = grown;
        changed = true;
      }
      if (r.x1 - r.x0 > width_cap || r.y1 > height_cap) {
        fail(ErrorCode::CoverageGap, "bad region outgrows the slab by a factor 64");
      }
    }
    if (!changed) break;
  }
  // Seeds move to the barycenter of the part of the box inside the slab; a
  // seed near a face of a large box squeezes that face's trace into a sliver.
  for (Region& r : regions) {
    r.sx = 0.5 * (std::max(r.x0, V.slab.x_lo) + std::min(r.x1, V.slab.x_hi));
    r.sy = r.y0 < V.slab.h_max ? 0.5 * (r.y0 + std::min(r.y1, V.slab.h_max)) : 0.5 * (r.y0 + r.y1);
    if (r.sx <= r.x0 || r.sx >= r.x1) r.sx = 0.5 * (r.x0 + r.x1);
  }
  std::sort(regions.begin(), regions.end(), [](const Region& a, const Region& b) {
    return a.x0 != b.x0 ? a.x0 < b.x0 : a.y0 < b.y0;
  });
  return regions;
}

ExtensionMap::ExtensionMap(std::vector<Region> regions, std::shared_ptr<const AveragingOperator> op,
                           std::shared_ptr<const EmbeddedManifold> M, double delta_N)
    : regions_(std::move(regions)), op_(std::move(op)), M_(std::move(M)), delta_N_(delta_N) {
  for (const Region& r : regions_) traces_.push_back(region_trace(r, *op_, *M_));
}

ExtensionMap::Value ExtensionMap::operator()(double x, double y) const {
  Value out;
  for (std::size_t i = 0; i < regions_.size(); ++i) {
    if (!regions_[i].contains(x, y)) continue;
    out.value = homogeneous_value(regions_[i], traces_[i], x, y);
    out.provenance = Provenance::homogeneous;
    return out;
  }
  const Closest c = M_->closest((*op_)(x, y));
  out.value = c.point;
  out.escaped = !c.unique || !c.converged || c.distance >= delta_N_;
  return out;
}

namespace {

double chordal_diameter(const std::vector<Point>& pts) {
  double d = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t j = i + 1; j < pts.size(); ++j) d = std::max(d, (pts[i] - pts[j]).norm());
  }
  return d;
}

}  // namespace

bool Assembly::invariants_hold() const {
  return std::all_of(invariants.begin(), invariants.end(), [](const InvariantCheck& c) { return c.passed; });
}

nlohmann::json Assembly::to_json() const {
  nlohmann::json regs = nlohmann::json::array();
  for (const Region& r : regions) {
    regs.push_back({{"x0", r.x0}, {"x1", r.x1}, {"y0", r.y0}, {"y1", r.y1}, {"sx", r.sx}, {"sy", r.sy}, {"floor", r.floor},
                    {"removable", r.removable}, {"oscillation", r.oscillation}});
  }
  nlohmann::json inv = nlohmann::json::object();
  for (const InvariantCheck& c : invariants) inv[c.name] = {{"passed", c.passed}, {"detail", c.detail}};
  nlohmann::json sing = nlohmann::json::array();
  for (std::size_t i = 0; i < field.singular_points.size(); ++i) {
    sing.push_back({{"x", field.singular_points[i][0]},
                    {"y", field.singular_points[i][1]},
                    {"removable", static_cast<bool>(field.singular_removable[i])}});
  }
  return {{"config", config.to_json()},
          {"delta_N", delta_N},
          {"delta", delta},
          {"energy",
           {{"gagliardo", energy.gagliardo},
            {"truncated", energy.truncated},
            {"gap_potential", energy.gap_potential},
            {"quadrature_error_estimate", energy.quadrature_error_estimate}}},
          {"lambda", lambda.to_json()},
          {"scan", scan.to_json()},
          {"counting", {{"lhs", counting.lhs}, {"rhs", counting.rhs}, {"ratio", counting.ratio}}},
          {"regions", regs},
          {"singular_points", sing},
          {"distribution", dist.to_json()},
          {"trace_error", trace_error},
          {"averaged_trace_error", averaged_trace_error},
          {"repairs", repairs},
          {"invariants", inv}};
}

Assembly assemble(const SurfaceMap& u, std::shared_ptr<const EmbeddedManifold> Mp, const ExtensionConfig& config) {
  const EmbeddedManifold& M = *Mp;
  if (u.m != 1) fail(ErrorCode::Unsupported, "the extension is implemented for one-dimensional boundaries");
  if (!is_plane(u.domain) || !u.tail) fail(ErrorCode::InvalidInput, "the extension needs a line map with a constant tail");
  if (!(config.eta > 0 && config.eta < 1)) fail(ErrorCode::InvalidInput, "eta must lie in (0, 1)");
  if (!std::isfinite(M.reach())) fail(ErrorCode::InvalidInput, "the target needs a finite reach");
  Assembly a;
  a.config = config;
  a.delta_N = 0.5 * M.reach();
  a.delta = config.eta * a.delta_N / 2.0;
  a.energy = energy_report(u, M, a.delta);
  if (a.energy.divergent || !std::isfinite(a.energy.gagliardo)) {
    fail(ErrorCode::NonFiniteEnergy, "Gagliardo energy diverges under refinement");
  }
  if (config.mode == LambdaMode::bounded_map) {
    if (!u.L_bound) fail(ErrorCode::MissingBound, "bounded mode needs the map's L_bound");
    const double K = config.K ? *config.K : comparability_K(M, *u.L_bound, config.K_samples).K;
    a.lambda = lambda_from_input(config.mode, a.energy.gap_potential, 1, config.c1, K, u.L_bound);
  } else {
    a.lambda = lambda_from_input(config.mode, a.energy.gagliardo, 1, config.c1, std::nullopt, std::nullopt);
  }

  const AveragedField V = average_extend(u, build_mollifier(1), config.slab);
  a.scan = scan_tau_h(a.lambda.lambda, V, M, a.delta_N, config.scan);
  a.counting = counting_bound_check(a.scan, u, M, a.delta_N, config.eta);

  const CubeClassification& cls = a.scan.best;
  std::vector<Cube> bad;
  std::set<std::pair<int, long>> bad_ids;
  for (std::size_t i = 0; i < cls.cubes.size(); ++i) {
    if (!cls.bad[i]) continue;
    bad.push_back(cls.cubes[i]);
    bad_ids.insert({cls.cubes[i].k, cls.cubes[i].j[0]});
  }
  const double cut = cls.safety * a.delta_N / 2.0;

  ExtensionField& F = a.field;
  F.slab = config.slab;
  F.xs = V.xs;
  F.heights = V.heights;
  F.ambient_dim = M.ambient_dim();
  const std::size_t nx = F.xs.size(), nn = F.xs.size() * F.heights.size();
  std::vector<ExtensionMap::Value> nodes(nn);
  for (;;) {
    a.regions = grow_regions(bad, cls.family, V, M, cut, config.slab.h_min);
    const ExtensionMap U(a.regions, V.op, Mp, a.delta_N);
    for_blocks(nn, 256, [&](std::size_t, std::size_t lo, std::size_t hi) {
      for (std::size_t n = lo; n < hi; ++n) nodes[n] = U(F.xs[n % nx], F.heights[n / nx]);
    });
    bool added = false;
    for (std::size_t n = 0; n < nn; ++n) {
      if (!nodes[n].escaped) continue;
      const Cube c = cube_containing(cls.family, make_point({F.xs[n % nx]}), F.heights[n / nx]);
      if (bad_ids.insert({c.k, c.j[0]}).second) {
        bad.push_back(c);
        added = true;
      }
    }
    if (!added) break;
    if (++a.repairs > config.max_repairs) fail(ErrorCode::TubeEscape, "repair limit reached");
  }
  F.values.resize(nn);
  F.provenance.resize(nn);
  for (std::size_t n = 0; n < nn; ++n) {
    F.values[n] = nodes[n].value;
    F.provenance[n] = nodes[n].provenance;
  }

  for (Region& r : a.regions) {
    const BoxTrace tr = region_trace(r, *V.op, M);
    std::vector<Point> pts;
    for (const BoundarySample& s : boundary_samples(r, 128, true)) pts.push_back(tr(s.x, s.y));
    r.oscillation = chordal_diameter(pts);
    r.removable = r.oscillation < a.delta_N;
    F.singular_points.push_back({r.sx, r.sy});
    F.singular_removable.push_back(r.removable ? 1 : 0);
  }

  gradient_field(F);
  a.dist = distribution(F.grad, F.weights, 1);
  a.dist.singular_count =
      static_cast<int>(std::count_if(a.regions.begin(), a.regions.end(), [](const Region& r) { return !r.removable; }));

  a.U = std::make_shared<ExtensionMap>(a.regions, V.op, Mp, a.delta_N);
  const double y0 = config.slab.h_min;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double x = u.coords[i][0];
    a.trace_error += u.weights[i] * ((*a.U)(x, y0).value - u.values[i]).norm();
  }
  a.averaged_trace_error = trace_l1_error(*V.op, y0);
  a.invariants = check_invariants(a, M);
  return a;
}

std::vector<InvariantCheck> check_invariants(const Assembly& a, const EmbeddedManifold& M) {
  std::vector<InvariantCheck> out;
  const ExtensionField& F = a.field;
  {
    // Singular points are never grid nodes unless a center lands on one; skip those.
    std::size_t off = 0;
    const double tol = M.tolerances().on_manifold;
    for (std::size_t n = 0; n < F.values.size(); ++n) {
      const double x = F.xs[n % F.xs.size()], y = F.heights[n / F.xs.size()];
      const bool at_center = std::any_of(F.singular_points.begin(), F.singular_points.end(), [&](const auto& c) {
        return std::abs(c[0] - x) < 1e-14 && std::abs(c[1] - y) < 1e-14;
      });
      if (!at_center && !tube_membership(M, F.values[n], tol)) ++off;
    }
    out.push_back({"on_manifold", off == 0, std::to_string(off) + " nodes off M"});
  }
  {
    bool mono = true;
    for (std::size_t i = 1; i < a.dist.mu.size(); ++i) mono = mono && a.dist.mu[i] <= a.dist.mu[i - 1];
    out.push_back({"mu_monotone", mono, ""});
  }
  {
    const double w = a.dist.w11_norm, l = a.dist.layer_cake;
    const bool ok = std::abs(l - w) <= 0.01 * std::max(w, 1e-300) || (w == 0 && l == 0);
    out.push_back({"layer_cake", ok, "int mu = " + std::to_string(l) + ", int |DU| = " + std::to_string(w)});
  }
  out.push_back({"weak_le_strong", a.dist.weak_norm <= a.dist.strong_norm * (1.0 + 1e-12),
                 "weak " + std::to_string(a.dist.weak_norm) + ", strong " + std::to_string(a.dist.strong_norm)});
  out.push_back({"singular_finite", a.dist.singular_count <= static_cast<int>(a.regions.size()),
                 std::to_string(a.dist.singular_count) + " singular points"});
  return out;
}

EstimateSample estimate_sample(const std::string& name, const Assembly& a) {
  return {name, a.dist.weak_norm, a.energy.gagliardo, a.energy.gap_potential};
}

EstimateFit fit_estimate(const std::vector<EstimateSample>& calibration, LambdaMode mode, double reach, int m,
                         std::optional<double> K, std::optional<double> L) {
  std::vector<double> xs, ys;
  for (const EstimateSample& s : calibration) {
    if (s.weak_norm <= 1e-12) continue;
    if (!(s.energy > 0)) fail(ErrorCode::FitInfeasible, "'" + s.name + "' has a positive norm with zero energy");
    xs.push_back(mode == LambdaMode::general ? s.energy : s.gap);
    ys.push_back(std::log(s.weak_norm / s.energy));
  }
  if (xs.empty()) fail(ErrorCode::FitInfeasible, "no calibration sample with a positive norm");
  double slope = 0.0;
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / ys.size();
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  if (sxx > 1e-300) slope = sxy / sxx;
  EstimateFit f;
  f.mode = mode;
  f.reach = reach;
  f.B = std::max(0.0, slope);
  double lnA = -kInf;
  for (std::size_t i = 0; i < xs.size(); ++i) lnA = std::max(lnA, ys[i] - f.B * xs[i]);
  f.A = std::exp(lnA);
  if (!std::isfinite(f.A) || !(f.A > 0)) fail(ErrorCode::FitInfeasible, "no finite constant covers the calibration set");
  if (mode == LambdaMode::general) {
    f.implied_C = f.B * std::pow(reach, m + 1);
  } else if (K && L && *K * *L > 0) {
    f.implied_C = f.B * std::pow(reach / (2.0 * *K * *L), m + 1);
  }
  return f;
}

EstimateVerification verify_estimate(const EstimateSample& s, const EstimateFit& fit) {
  EstimateVerification v;
  v.name = s.name;
  v.mode = fit.mode;
  v.lhs_weak_norm = s.weak_norm;
  v.energy = s.energy;
  if (fit.mode == LambdaMode::bounded_map) v.gap = s.gap;
  v.fitted_A = fit.A;
  v.fitted_B = fit.B;
  v.reach_used = fit.reach;
  const double x = fit.mode == LambdaMode::general ? s.energy : s.gap;
  v.rhs = fit.A * std::exp(fit.B * x) * s.energy;
  v.slack = v.rhs - v.lhs_weak_norm;
  v.holds = v.slack >= 0;
  return v;
}

nlohmann::json EstimateVerification::to_json() const {
  return {{"name", name},
          {"mode", mode_name(mode)},
          {"lhs_weak_norm", lhs_weak_norm},
          {"energy", energy},
          {"gap", gap ? nlohmann::json(*gap) : nlohmann::json(nullptr)},
          {"fitted_A", fitted_A},
          {"fitted_B", fitted_B},
          {"reach_used", reach_used},
          {"rhs", rhs},
          {"slack", slack},
          {"holds", holds}};
}

void write_extension(const Assembly& a, const std::string& path) {
  const ExtensionField& F = a.field;
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::InvalidInput, "cannot write '" + path + "'");
  std::vector<double> buf;
  buf.reserve(F.values.size() * (F.ambient_dim + 2));
  for (const Point& p : F.values) {
    for (int c = 0; c < F.ambient_dim; ++c) buf.push_back(p[c]);
  }
  buf.insert(buf.end(), F.grad.begin(), F.grad.end());
  for (Provenance p : F.provenance) buf.push_back(static_cast<double>(p));
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(double)));
  nlohmann::json side = a.to_json();
  side["format"] = "f64le";
  side["layout"] = {"values", "grad", "provenance"};
  side["ambient_dim"] = F.ambient_dim;
  side["nodes"] = F.values.size();
  std::ofstream js(path + ".json");
  js << side.dump(2) << "\n";
}

}  // namespace singext
