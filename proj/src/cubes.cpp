#include "singext/cubes.hpp"

#include <algorithm>
#include <cmath>

#include "singext/error.hpp"
#include "singext/parallel.hpp"

namespace singext {

double CubeFamily::edge(int k) const { return tau * std::pow(lambda, -k); }

int CubeFamily::generation_at(double y) const {
  int k = static_cast<int>(std::ceil(-std::log(y * (lambda - 1.0) / tau) / std::log(lambda)));
  while (layer_bottom(k) > y) ++k;
  while (layer_top(k) <= y) --k;
  return k;
}

CubeFamily CubeFamily::covering(int m, double lambda, double tau, std::array<double, 2> h, double h_min, double h_max) {
  if (!(lambda >= 2.0) || !std::isfinite(lambda)) fail(ErrorCode::InvalidInput, "lambda must be finite and >= 2");
  if (!(tau > 1.0 && tau < lambda)) fail(ErrorCode::InvalidInput, "tau must lie in (1, lambda)");
  if (!(h_min > 0 && h_max > h_min)) fail(ErrorCode::InvalidInput, "bad height range");
  CubeFamily f;
  f.m = m;
  f.lambda = lambda;
  f.tau = tau;
  f.h = h;
  f.k_lo = f.generation_at(h_max);
  f.k_hi = f.generation_at(h_min);
  return f;
}

Cube cube_at(const CubeFamily& f, int k, std::array<long, 2> j) {
  Cube c;
  c.k = k;
  c.j = j;
  c.edge = f.edge(k);
  for (int a = 0; a < f.m; ++a) c.lo[a] = c.edge * (static_cast<double>(j[a]) + f.h[a]);
  c.lo[f.m] = f.vertical_offset(k);
  return c;
}

Cube cube_containing(const CubeFamily& f, const Point& x, double y) {
  if (!(y > 0)) fail(ErrorCode::InvalidInput, "height must be positive");
  const int k = f.generation_at(y);
  const double e = f.edge(k);
  std::array<long, 2> j{0, 0};
  for (int a = 0; a < f.m; ++a) j[a] = static_cast<long>(std::floor(x[a] / e - f.h[a]));
  return cube_at(f, k, j);
}

namespace {

// Index range of cubes along one horizontal axis meeting [lo, hi].
std::pair<long, long> j_range(double e, double h, double lo, double hi) {
  long j0 = static_cast<long>(std::floor(lo / e - h));
  long j1 = static_cast<long>(std::ceil(hi / e - h)) - 1;
  while (e * (j0 + 1 + h) <= lo) ++j0;
  while (e * (j1 + h) >= hi) --j1;
  return {j0, j1};
}

}  // namespace

std::vector<Cube> enumerate_cubes(const CubeFamily& f, const SlabSpec& slab) {
  std::vector<Cube> out;
  for (int k = f.k_lo; k <= f.k_hi; ++k) {
    if (f.layer_top(k) <= slab.h_min || f.layer_bottom(k) >= slab.h_max) continue;
    const double e = f.edge(k);
    const auto [a0, a1] = j_range(e, f.h[0], slab.x_lo, slab.x_hi);
    if (f.m == 1) {
      for (long j = a0; j <= a1; ++j) out.push_back(cube_at(f, k, {j, 0}));
    } else {
      const auto [b0, b1] = j_range(e, f.h[1], slab.x_lo, slab.x_hi);
      for (long j = a0; j <= a1; ++j) {
        for (long i = b0; i <= b1; ++i) out.push_back(cube_at(f, k, {j, i}));
      }
    }
  }
  if (out.empty()) fail(ErrorCode::EmptyRange, "no cube generation meets the slab");
  return out;
}

namespace {

double sample_dist(const AveragedField& V, const EmbeddedManifold& M, const Point& x, double y) {
  const Point v = V.op ? (*V.op)(x, y) : V.at(x[0], y);
  const Closest c = M.closest(v);
  if (!c.unique || !c.converged) return std::max(c.distance, M.reach());
  return c.distance;
}

struct Sample {
  Point x;
  double y;
};

std::vector<double> eval_samples(const AveragedField& V, const EmbeddedManifold& M, const std::vector<Sample>& s) {
  std::vector<double> d(s.size());
  for_blocks(s.size(), 64, [&](std::size_t, std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) d[i] = sample_dist(V, M, s[i].x, s[i].y);
  });
  return d;
}

int intervals_for(double edge, double hx, const CubeOptions& opt) {
  const int n = static_cast<int>(std::ceil(edge / hx - 1e-9));
  return std::clamp(n, opt.min_intervals, opt.max_intervals);
}

}  // namespace

CubeClassification classify(const CubeFamily& f, const AveragedField& V, const EmbeddedManifold& M, double delta_N,
                            const CubeOptions& opt) {
  if (!(delta_N > 0)) fail(ErrorCode::InvalidInput, "delta_N must be positive");
  CubeClassification out;
  out.family = f;
  out.threshold = delta_N / 2;
  out.safety = opt.safety;
  out.cubes = enumerate_cubes(f, V.slab);
  out.sup_dist.assign(out.cubes.size(), 0.0);
  const double hx = (V.slab.x_hi - V.slab.x_lo) / (V.slab.nx - 1);
  if (f.m == 1) {
    // Shared boundary lines per generation: bottom, top and the vertical sides.
    std::size_t first = 0;
    while (first < out.cubes.size()) {
      std::size_t last = first;
      while (last < out.cubes.size() && out.cubes[last].k == out.cubes[first].k) ++last;
      const int k = out.cubes[first].k;
      const double e = f.edge(k), yb = f.layer_bottom(k), yt = f.layer_top(k);
      const long j0 = out.cubes[first].j[0];
      const std::size_t J = last - first;
      const int S = 2 * intervals_for(e, hx, opt);
      std::vector<Sample> pts;
      const double x0 = e * (j0 + f.h[0]);
      for (std::size_t i = 0; i <= J * S; ++i) pts.push_back({make_point({x0 + e * i / S}), yb});
      for (std::size_t i = 0; i <= J * S; ++i) pts.push_back({make_point({x0 + e * i / S}), yt});
      for (std::size_t jj = 0; jj <= J; ++jj) {
        for (int i = 1; i < S; ++i) pts.push_back({make_point({x0 + e * jj}), yb + e * i / S});
      }
      const std::vector<double> d = eval_samples(V, M, pts);
      const std::size_t line = J * S + 1, vbase = 2 * line;
      for (std::size_t jj = 0; jj < J; ++jj) {
        double s = 0.0;
        for (std::size_t i = jj * S; i <= (jj + 1) * S; ++i) s = std::max({s, d[i], d[line + i]});
        for (std::size_t side : {jj, jj + 1}) {
          for (int i = 0; i < S - 1; ++i) s = std::max(s, d[vbase + side * (S - 1) + i]);
        }
        out.sup_dist[first + jj] = s;
      }
      first = last;
    }
  } else {
    for (std::size_t c = 0; c < out.cubes.size(); ++c) {
      const Cube& q = out.cubes[c];
      const int S = 2 * intervals_for(q.edge, hx, opt);
      std::vector<Sample> pts;
      for (int axis = 0; axis < 3; ++axis) {
        for (int side = 0; side < 2; ++side) {
          for (int a = 0; a <= S; ++a) {
            for (int b = 0; b <= S; ++b) {
              double p[3];
              int free = 0;
              for (int ax = 0; ax < 3; ++ax) {
                if (ax == axis) {
                  p[ax] = q.lo[ax] + side * q.edge;
                } else {
                  p[ax] = q.lo[ax] + q.edge * (free++ == 0 ? a : b) / S;
                }
              }
              pts.push_back({make_point({p[0], p[1]}), p[2]});
            }
          }
        }
      }
      const std::vector<double> d = eval_samples(V, M, pts);
      out.sup_dist[c] = *std::max_element(d.begin(), d.end());
    }
  }
  out.bad.assign(out.cubes.size(), 0);
  const double cut = opt.safety * out.threshold;
  for (std::size_t c = 0; c < out.cubes.size(); ++c) {
    if (out.sup_dist[c] >= cut) {
      out.bad[c] = 1;
      ++out.bad_count;
    }
  }
  return out;
}

ScanResult scan_tau_h(double lambda, const AveragedField& V, const EmbeddedManifold& M, double delta_N,
                      const ScanOptions& opt) {
  if (opt.n_tau < 1 || opt.n_h < 1) fail(ErrorCode::InvalidInput, "scan needs at least one sample per axis");
  ScanResult r;
  r.lambda = lambda;
  for (int i = 0; i < opt.n_tau; ++i) r.taus.push_back(std::pow(lambda, (i + 0.5) / opt.n_tau));
  const int m = V.slab.m;
  for (int a = 0; a < opt.n_h; ++a) {
    if (m == 1) {
      r.offsets.push_back({(a + 0.5) / opt.n_h, 0.0});
    } else {
      for (int b = 0; b < opt.n_h; ++b) r.offsets.push_back({(a + 0.5) / opt.n_h, (b + 0.5) / opt.n_h});
    }
  }
  int best = -1;
  for (double tau : r.taus) {
    for (const auto& h : r.offsets) {
      const CubeFamily f = CubeFamily::covering(m, lambda, tau, h, V.slab.h_min, V.slab.h_max);
      CubeClassification c = classify(f, V, M, delta_N, opt.cube);
      r.bad_counts.push_back(c.bad_count);
      if (best < 0 || c.bad_count < best) {
        best = c.bad_count;
        r.chosen = r.bad_counts.size() - 1;
        r.best = std::move(c);
      }
    }
  }
  double total = 0.0;
  for (int b : r.bad_counts) total += b;
  r.counting_integral = total * std::log(lambda) / opt.n_tau / static_cast<double>(r.offsets.size());
  return r;
}

nlohmann::json ScanResult::to_json() const {
  nlohmann::json samples = nlohmann::json::array();
  for (std::size_t i = 0; i < taus.size(); ++i) {
    for (std::size_t j = 0; j < offsets.size(); ++j) {
      samples.push_back({{"tau", taus[i]}, {"h", offsets[j]}, {"bad_count", bad_counts[i * offsets.size() + j]}});
    }
  }
  const std::size_t ci = chosen / offsets.size(), cj = chosen % offsets.size();
  return {{"lambda", lambda},
          {"samples", samples},
          {"chosen", {{"tau", taus[ci]}, {"h", offsets[cj]}, {"bad_count", best.bad_count}}},
          {"counting_integral", counting_integral},
          {"threshold", best.threshold},
          {"safety", best.safety},
          {"generations", {best.family.k_lo, best.family.k_hi}}};
}

CountingCheck counting_bound_check(const ScanResult& scan, const SurfaceMap& u, const EmbeddedManifold& M,
                                   double delta_N, double eta) {
  if (!(eta > 0 && eta < 1)) fail(ErrorCode::InvalidInput, "eta must lie in (0, 1)");
  CountingCheck c;
  c.lhs = scan.counting_integral;
  c.rhs = counting_rhs(u, M, delta_N / 2, eta);
  if (c.rhs > 0) {
    c.ratio = c.lhs / c.rhs;
  } else {
    c.ratio = c.lhs > 0 ? kInf : 0.0;
  }
  return c;
}

const char* mode_name(LambdaMode mode) { return mode == LambdaMode::bounded_map ? "bounded" : "general"; }

LambdaMode parse_mode(const std::string& name) {
  if (name == "bounded" || name == "bounded_map") return LambdaMode::bounded_map;
  if (name == "general") return LambdaMode::general;
  fail(ErrorCode::InvalidInput, "unknown mode '" + name + "'");
}

nlohmann::json LambdaChoice::to_json() const {
  nlohmann::json j = {{"lambda", lambda}, {"mode", mode_name(mode)}, {"exponent_input", exponent_input}, {"c1", c1}};
  j["K"] = K ? nlohmann::json(*K) : nlohmann::json(nullptr);
  j["L"] = L ? nlohmann::json(*L) : nlohmann::json(nullptr);
  return j;
}

LambdaChoice lambda_from_input(LambdaMode mode, double input, int m, double c1, std::optional<double> K,
                               std::optional<double> L) {
  LambdaChoice c;
  c.mode = mode;
  c.exponent_input = input;
  c.c1 = c1;
  double expo = 0.0;
  if (mode == LambdaMode::bounded_map) {
    if (!K || !L) fail(ErrorCode::MissingBound, "bounded mode needs K and L");
    c.K = K;
    c.L = L;
    expo = 2.0 * c1 * std::pow(2.0 * *K * *L, m + 1) * input;
  } else {
    expo = 2.0 * c1 * input;
  }
  c.lambda = std::max(2.0, 1.0 + std::exp(expo));
  if (!std::isfinite(c.lambda)) fail(ErrorCode::NonFiniteEnergy, "lambda overflows for exponent " + std::to_string(expo));
  return c;
}

LambdaChoice select_lambda(LambdaMode mode, const SurfaceMap& u, const EmbeddedManifold& M, double delta,
                           std::optional<double> K, double c1) {
  if (mode == LambdaMode::bounded_map) {
    if (!u.L_bound) fail(ErrorCode::MissingBound, "bounded mode needs the map's L_bound");
    if (!K) fail(ErrorCode::MissingBound, "bounded mode needs the comparability constant K");
    return lambda_from_input(mode, gap_potential(u, M, delta), u.m, c1, K, u.L_bound);
  }
  const GagliardoResult g = gagliardo_energy(u, M);
  if (g.divergent || !std::isfinite(g.value)) fail(ErrorCode::NonFiniteEnergy, "Gagliardo energy diverges under refinement");
  return lambda_from_input(mode, g.value, u.m, c1, std::nullopt, std::nullopt);
}

}  // namespace singext
