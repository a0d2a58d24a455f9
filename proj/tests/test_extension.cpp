#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "singext/error.hpp"
#include "singext/extension.hpp"
#include "singext/parallel.hpp"

using namespace singext;

namespace {

Point on_circle(double a) { return make_point({std::cos(a), std::sin(a)}); }

template <class F>
void expect_error(ErrorCode code, F&& f) {
  bool thrown = false;
  try {
    f();
  } catch (const Error& e) {
    thrown = true;
    CHECK(e.code() == code);
  }
  CHECK(thrown);
}

double smoothstep(double t) {
  t = std::clamp(t, 0.0, 1.0);
  return t * t * (3 - 2 * t);
}

// Degree-one loop on the ramp |x| <= w, constant outside.
SurfaceMap loop_map(int n, double w = 0.125) {
  auto angle = [w](double x) { return 2 * kPi * smoothstep((x + w) / (2 * w)); };
  return map_on_line(-1.0, 1.0, n, [&](double x) { return on_circle(angle(x)); }, on_circle(0.0));
}

// Small oscillation, continuous across both window edges.
SurfaceMap wiggle_map(int n) {
  return map_on_line(-1.0, 1.0, n, [](double x) { return on_circle(0.1 * std::sin(kPi * x)); }, on_circle(0.0));
}

ExtensionConfig config_for(const SurfaceMap& u, int nx) {
  ExtensionConfig c;
  c.slab = default_slab(u, nx);
  return c;
}

const std::shared_ptr<const EmbeddedManifold> kCircle = std::make_shared<Circle>(1.0);

}  // namespace

TEST_CASE("homogeneous value follows rays from the seed") {
  Region box;
  box.x0 = 0.0, box.x1 = 2.0, box.y0 = 1.0, box.y1 = 3.0;
  box.sx = 0.5, box.sy = 1.5;
  std::vector<std::array<double, 2>> hits;
  BoxTrace trace = [&](double x, double y) {
    hits.push_back({x, y});
    return make_point({x, y});
  };
  // Ray from (0.5, 1.5) through (1.25, 1.5) leaves through the right face.
  Point v = homogeneous_value(box, trace, 1.25, 1.5);
  CHECK(v[0] == doctest::Approx(2.0));
  CHECK(v[1] == doctest::Approx(1.5));
  // Gauge: s = max(0.25 / 1.5, 0.75 / 1.5) = 0.5, so the boundary point is
  // (0.5 + 0.5, 1.5 + 1.5).
  v = homogeneous_value(box, trace, 0.75, 2.25);
  CHECK(v[0] == doctest::Approx(1.0));
  CHECK(v[1] == doctest::Approx(3.0));
  v = homogeneous_value(box, trace, 0.5, 1.5);
  CHECK(v[0] == 2.0);
  CHECK(v[1] == 1.5);
  // Boundary points map to themselves.
  v = homogeneous_value(box, trace, 0.0, 2.7);
  CHECK(v[0] == doctest::Approx(0.0));
  CHECK(v[1] == doctest::Approx(2.7));
}

TEST_CASE("homogeneous extension gradient decays like 1/rho") {
  // Uniform winding along the sup-norm square about the seed: U is
  // 0-homogeneous, so |DU| at gauge radius rho is twice |DU| at 2 rho.
  Region box;
  box.x0 = -1, box.x1 = 1, box.y0 = 1, box.y1 = 3;
  box.sx = 0.0, box.sy = 2.0;
  BoxTrace trace = [](double x, double y) { return on_circle(std::atan2(y - 2.0, x)); };
  const Circle S(1.0);
  auto grad = [&](double x, double y) {
    const double h = 1e-6;
    const std::vector<std::array<double, 2>> pts{{x + h, y}, {x - h, y}, {x, y + h}, {x, y - h}};
    const auto v = homogeneous_extend(box, trace, S, pts);
    return std::sqrt(((v[0] - v[1]) / (2 * h)).squaredNorm() + ((v[2] - v[3]) / (2 * h)).squaredNorm());
  };
  for (double rho : {0.05, 0.1, 0.2}) {
    const double r = grad(rho * 1.0, 2.0 + rho * 0.3) / grad(2 * rho * 1.0, 2.0 + 2 * rho * 0.3);
    CHECK(r == doctest::Approx(2.0).epsilon(0.10));
  }
}

TEST_CASE("degree-zero trace extends with zero gradient") {
  Region box;
  box.x0 = 0, box.x1 = 1, box.y0 = 0.5, box.y1 = 1.5;
  box.sx = 0.4, box.sy = 0.9;
  const Point p = on_circle(0.3);
  BoxTrace trace = [&](double, double) { return p; };
  const auto v = homogeneous_extend(box, trace, Circle(1.0), {{0.1, 0.6}, {0.4, 0.9}, {0.9, 1.4}});
  for (const Point& q : v) CHECK((q - p).norm() == 0.0);
  BoxTrace off = [](double, double) { return make_point({0.5, 0.0}); };
  expect_error(ErrorCode::BoundaryNotOnManifold,
               [&] { homogeneous_extend(box, off, Circle(1.0), {{0.5, 1.0}}); });
}

TEST_CASE("distribution function against direct evaluation") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> U01(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 50 + trial * 13;
    std::vector<double> g(n), w(n);
    for (std::size_t i = 0; i < n; ++i) {
      g[i] = std::floor(20 * std::pow(U01(rng), 3)) / 2;  // ties and zeros
      w[i] = 0.01 + U01(rng);
    }
    const DistributionReport d = distribution(g, w, 1);
    // Oracle: sup over the data values of t^2 mu(t).
    double weak = 0.0, strong = 0.0, w11 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (g[i] > 0) weak = std::max(weak, g[i] * g[i] * level_measure(g, w, g[i]));
      strong += w[i] * g[i] * g[i];
      w11 += w[i] * g[i];
    }
    CHECK(d.weak_norm == doctest::Approx(weak).epsilon(1e-12));
    CHECK(d.strong_norm == doctest::Approx(strong).epsilon(1e-12));
    CHECK(d.weak_norm <= d.strong_norm * (1 + 1e-12));
    CHECK(d.layer_cake == doctest::Approx(w11).epsilon(0.01));
    for (std::size_t i = 1; i < d.mu.size(); ++i) CHECK(d.mu[i] <= d.mu[i - 1]);
    for (std::size_t i = 0; i < d.t.size(); i += 37) CHECK(d.mu[i] == doctest::Approx(level_measure(g, w, d.t[i])).epsilon(1e-12));
  }
}

TEST_CASE("gradient is exact on affine fields over a graded grid") {
  ExtensionField F;
  F.xs = {0.0, 0.1, 0.2, 0.3, 0.4};
  F.heights = {0.01, 0.02, 0.04, 0.08};
  for (double y : F.heights) {
    for (double x : F.xs) F.values.push_back(make_point({3 * x - y, 2 * y}));
  }
  gradient_field(F);
  for (double g : F.grad) CHECK(g == doctest::Approx(std::sqrt(9.0 + 1.0 + 4.0)).epsilon(1e-12));
  double area = 0.0;
  for (double w : F.weights) area += w;
  CHECK(area == doctest::Approx(0.4 * 0.07));
}

TEST_CASE("constant map extends to itself") {
  const Point p = on_circle(1.0);
  const SurfaceMap u = map_on_line(-1, 1, 128, [&](double) { return p; }, p);
  const Assembly a = assemble(u, kCircle, config_for(u, 128));
  CHECK(a.scan.best.bad_count == 0);
  CHECK(a.regions.empty());
  CHECK(a.dist.singular_count == 0);
  double gmax = 0.0;
  for (double g : a.field.grad) gmax = std::max(gmax, g);
  CHECK(gmax < 1e-10);
  CHECK(a.dist.weak_norm < 1e-18);
  for (const Point& q : a.field.values) CHECK((q - p).norm() < 1e-12);
  CHECK(a.trace_error < 1e-12);
  CHECK(a.invariants_hold());
}

TEST_CASE("small oscillation map is reprojected everywhere") {
  const SurfaceMap u = wiggle_map(256);
  ExtensionConfig cfg = config_for(u, 256);
  const Assembly a = assemble(u, kCircle, cfg);
  CHECK(a.regions.empty());
  CHECK(a.repairs == 0);
  for (Provenance p : a.field.provenance) CHECK(p == Provenance::reprojected);
  CHECK(a.invariants_hold());
  // Lipschitz trace: the L1 trace error roughly halves with h_min.
  cfg.slab.h_min /= 2;
  const Assembly b = assemble(u, kCircle, cfg);
  CHECK(b.trace_error / a.trace_error == doctest::Approx(0.5).epsilon(0.2));
  CHECK(a.trace_error <= 2 * a.averaged_trace_error + 1e-15);
}

TEST_CASE("degree-one loop forces a singular point") {
  for (int n : {256, 512}) {
    const SurfaceMap u = loop_map(n);
    const Assembly a = assemble(u, kCircle, config_for(u, n));
    CHECK(a.dist.singular_count >= 1);
    REQUIRE(!a.field.singular_points.empty());
    const auto& s = a.field.singular_points.front();
    CHECK(s[1] > a.config.slab.h_min);
    CHECK(s[1] < a.config.slab.h_max);
    CHECK(a.invariants_hold());
    for (const InvariantCheck& c : a.invariants) INFO(c.name << ": " << c.detail);
    // The homogeneous part sits exactly on M.
    for (std::size_t i = 0; i < a.field.values.size(); ++i) {
      if (a.field.provenance[i] == Provenance::homogeneous) CHECK(std::abs(a.field.values[i].norm() - 1) < 1e-12);
    }
    CHECK(a.dist.layer_cake == doctest::Approx(a.dist.w11_norm).epsilon(0.01));
    CHECK(a.trace_error < 1e-3);
  }
}

TEST_CASE("reprojection of good cubes and tube escape") {
  const SurfaceMap u = wiggle_map(128);
  SlabSpec slab = default_slab(u, 128);
  AveragedField V = average_extend(u, build_mollifier(1), slab);
  const ScanResult scan = scan_tau_h(2.0, V, *kCircle, 0.5);
  const auto good = reproject_good(V, scan.best, *kCircle, 0.5);
  for (const auto& p : good) {
    REQUIRE(p.has_value());
    CHECK(std::abs(p->norm() - 1.0) < 1e-12);
  }
  // Antipodal jumps with every cube declared good.
  const SurfaceMap w = map_on_line(
      -1, 1, 128, [](double x) { return on_circle(std::abs(x) < 0.5 ? kPi : 0.0); }, on_circle(0.0));
  AveragedField W = average_extend(w, build_mollifier(1), slab);
  CubeClassification all_good = scan_tau_h(2.0, W, *kCircle, 0.5).best;
  std::fill(all_good.bad.begin(), all_good.bad.end(), 0);
  expect_error(ErrorCode::TubeEscape, [&] { reproject_good(W, all_good, *kCircle, 0.5); });
}

TEST_CASE("assembly preconditions") {
  const SurfaceMap s2 = map_on_plane(-1, 1, 8, [](double, double) { return on_circle(0.0); }, on_circle(0.0));
  expect_error(ErrorCode::Unsupported, [&] { assemble(s2, kCircle, ExtensionConfig{}); });
  SurfaceMap u = wiggle_map(64);
  ExtensionConfig cfg = config_for(u, 64);
  cfg.mode = LambdaMode::bounded_map;
  expect_error(ErrorCode::MissingBound, [&] { assemble(u, kCircle, cfg); });
  u.L_bound = 1.0;
  cfg.K = 1.0;
  const Assembly a = assemble(u, kCircle, cfg);
  CHECK(a.lambda.mode == LambdaMode::bounded_map);
  const SurfaceMap step = map_on_line(
      -1, 1, 256, [](double x) { return on_circle(x < 0 ? kPi : 0.0); }, on_circle(0.0));
  expect_error(ErrorCode::NonFiniteEnergy, [&] { assemble(step, kCircle, config_for(step, 256)); });
}

TEST_CASE("estimate fit recovers exact constants") {
  std::vector<EstimateSample> cal;
  for (double E : {1.0, 2.0, 3.5, 5.0}) cal.push_back({"s", 2.0 * std::exp(0.5 * E) * E, E, 0.0});
  cal.push_back({"zero", 0.0, 0.0, 0.0});
  const EstimateFit f = fit_estimate(cal, LambdaMode::general, 1.0, 1);
  CHECK(f.B == doctest::Approx(0.5));
  CHECK(f.A == doctest::Approx(2.0));
  CHECK(f.implied_C == doctest::Approx(0.5));
  for (const EstimateSample& s : cal) {
    const EstimateVerification v = verify_estimate(s, f);
    CHECK(v.slack >= -1e-12 * std::max(1.0, v.rhs));
  }
  const EstimateVerification over = verify_estimate({"over", 100.0, 1.0, 0.0}, f);
  CHECK(!over.holds);
  CHECK(over.slack < 0);
  expect_error(ErrorCode::FitInfeasible, [] { fit_estimate({{"bad", 1.0, 0.0, 0.0}}, LambdaMode::general, 1.0, 1); });
  expect_error(ErrorCode::FitInfeasible, [] { fit_estimate({}, LambdaMode::general, 1.0, 1); });
}

TEST_CASE("assembly is independent of the thread count") {
  const SurfaceMap u = loop_map(256);
  set_thread_count(1);
  const Assembly a = assemble(u, kCircle, config_for(u, 256));
  set_thread_count(3);
  const Assembly b = assemble(u, kCircle, config_for(u, 256));
  set_thread_count(1);
  CHECK(a.dist.weak_norm == b.dist.weak_norm);
  CHECK(a.dist.dirichlet == b.dist.dirichlet);
  CHECK(a.energy.gagliardo == b.energy.gagliardo);
  CHECK(a.to_json().dump() == b.to_json().dump());
}

TEST_CASE("extension output files") {
  const SurfaceMap u = loop_map(128);
  const Assembly a = assemble(u, kCircle, config_for(u, 128));
  const auto dir = std::filesystem::temp_directory_path() / "singext_ext_test";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "U.bin").string();
  write_extension(a, path);
  const std::size_t nodes = a.field.values.size();
  CHECK(std::filesystem::file_size(path) == nodes * (2 + 2) * sizeof(double));
  std::ifstream js(path + ".json");
  const nlohmann::json side = nlohmann::json::parse(js);
  CHECK(side["nodes"] == nodes);
  CHECK(side["distribution"]["singular_count"] == a.dist.singular_count);
  std::filesystem::remove_all(dir);
}

TEST_CASE("singular step map keeps its weak norm under refinement") {
  // Plateau of height 1.75 with ramps of width 1/32: one large bad region.
  auto plateau = [](int n) {
    const double r = 1.0 / 32;
    return map_on_line(-1.0, 1.0, n, [r](double x) {
      return on_circle(1.75 * (smoothstep((x + 0.5 + r / 2) / r) - smoothstep((x - 0.5 + r / 2) / r)));
    }, on_circle(0.0));
  };
  std::vector<double> weak;
  for (int n : {512, 1024}) {
    const SurfaceMap u = plateau(n);
    const Assembly a = assemble(u, kCircle, config_for(u, n));
    REQUIRE(a.regions.size() == 1);
    const Region& r = a.regions.front();
    // Seed at the barycenter of the region's part inside the slab.
    CHECK(r.sy == doctest::Approx(0.5 * (r.y0 + std::min(r.y1, a.config.slab.h_max))));
    weak.push_back(a.dist.weak_norm);
  }
  CHECK(weak[1] / weak[0] == doctest::Approx(1.0).epsilon(0.3));
}
