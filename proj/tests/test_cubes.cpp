#include <doctest.h>

#include "singext/cubes.hpp"
#include "singext/error.hpp"

using namespace singext;

namespace {

// 1 + exp(2 * 0.01 * 8 pi^2 ln 2)
constexpr double kIdentityLambda = 3.98791002355108;

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

SlabSpec test_slab(int nx = 257) {
  SlabSpec s;
  s.nx = nx;
  s.ny = 16;
  s.h_min = 1.0 / 64;
  s.h_max = 1.0;
  return s;
}

SurfaceMap line_map(int n, double (*angle)(double)) {
  return map_on_line(-1.0, 1.0, n, [angle](double x) { return on_circle(angle(x)); }, on_circle(angle(1.0)));
}

double two_jumps(double x) { return std::abs(x) < 0.5 ? kPi : 0.0; }
double wiggle(double x) { return 0.05 * std::sin(3 * x); }

}  // namespace

TEST_CASE("cube family formulas") {
  CubeFamily f;
  f.lambda = 2.0;
  f.tau = 1.5;
  CHECK(f.edge(0) == 1.5);
  CHECK(f.vertical_offset(0) == 1.5);
  f.lambda = 4.0;
  f.tau = 2.0;
  CHECK(f.edge(1) == doctest::Approx(0.5));
  CHECK(f.vertical_offset(1) == doctest::Approx(0.5 / 3));
  for (int k = -2; k < 5; ++k) {
    CHECK(f.edge(k) / f.edge(k + 1) == doctest::Approx(4.0));
    CHECK(f.layer_top(k + 1) == doctest::Approx(f.layer_bottom(k)));
    CHECK(f.layer_bottom(k) > 0.0);
  }
  const Cube c = cube_at(f, 1, {3, 0});
  CHECK(c.lo[0] == doctest::Approx(1.5));
  CHECK(c.lo[1] == doctest::Approx(0.5 / 3));
}

TEST_CASE("generation lookup and covering") {
  const CubeFamily f = CubeFamily::covering(1, 2.7, 1.9, {0.3, 0.0}, 1.0 / 256, 1.0);
  CHECK(f.layer_top(f.k_lo) > 1.0);
  CHECK(f.layer_bottom(f.k_lo) <= 1.0);
  CHECK(f.layer_bottom(f.k_hi) <= 1.0 / 256);
  CHECK(f.layer_top(f.k_hi) > 1.0 / 256);
  for (double y : {0.004, 0.01, 0.1, 0.5, 0.99}) {
    const int k = f.generation_at(y);
    CHECK(f.layer_bottom(k) <= y);
    CHECK(y < f.layer_top(k));
    const Cube c = cube_containing(f, make_point({0.37}), y);
    CHECK(c.lo[0] <= 0.37);
    CHECK(0.37 < c.hi(0));
    CHECK(c.lo[1] <= y);
    CHECK(y < c.hi(1));
  }
  expect_error(ErrorCode::InvalidInput, [] { CubeFamily::covering(1, 1.5, 1.2, {0, 0}, 0.1, 1.0); });
}

TEST_CASE("cubes of one generation tile the window") {
  const SlabSpec s = test_slab();
  const CubeFamily f = CubeFamily::covering(1, 2.0, 1.3, {0.25, 0.0}, s.h_min, s.h_max);
  const std::vector<Cube> cubes = enumerate_cubes(f, s);
  const std::vector<double> xs = s.xs();
  for (int k = f.k_lo; k <= f.k_hi; ++k) {
    double covered = 0.0;
    for (double x : xs) {
      int inside = 0;
      for (const Cube& c : cubes) {
        if (c.k == k && c.lo[0] < x && x < c.hi(0)) ++inside;
      }
      CHECK(inside <= 1);
    }
    for (const Cube& c : cubes) {
      if (c.k == k) covered += std::min(c.hi(0), s.x_hi) - std::max(c.lo[0], s.x_lo);
    }
    CHECK(covered == doctest::Approx(s.x_hi - s.x_lo));
  }
  CubeFamily far = f;
  far.k_lo = far.k_hi = 40;
  expect_error(ErrorCode::EmptyRange, [&] { enumerate_cubes(far, s); });
}

TEST_CASE("two-dimensional families") {
  SlabSpec s;
  s.m = 2;
  s.x_lo = -1.0;
  s.x_hi = 1.0;
  s.nx = 9;
  s.ny = 4;
  s.h_min = 0.25;
  s.h_max = 0.5;
  const CubeFamily f = CubeFamily::covering(2, 2.0, 1.5, {0.5, 0.5}, s.h_min, s.h_max);
  const std::vector<Cube> cubes = enumerate_cubes(f, s);
  CHECK_FALSE(cubes.empty());
  const Point p = make_point({0.0, 0.0, 1.0});
  const SurfaceMap u = map_on_plane(-0.5, 0.5, 8, [&](double, double) { return p; }, p);
  const AveragedField V = average_extend(u, build_mollifier(2), s);
  Sphere sph(1.0);
  CHECK(classify(f, V, sph, sph.reach() / 2).bad_count == 0);
}

TEST_CASE("constant map has no bad cubes") {
  Circle c(1.0);
  const SurfaceMap u = map_on_line(-1.0, 1.0, 256, [](double) { return on_circle(0.4); }, on_circle(0.4));
  const AveragedField V = average_extend(u, build_mollifier(1), test_slab());
  const ScanResult r = scan_tau_h(2.0, V, c, c.reach() / 2);
  for (int b : r.bad_counts) CHECK(b == 0);
  CHECK(r.counting_integral == 0.0);
  const CountingCheck chk = counting_bound_check(r, u, c, c.reach() / 2, 0.5);
  CHECK(chk.lhs == 0.0);
  CHECK(chk.rhs == 0.0);
  CHECK(chk.ratio == 0.0);
}

TEST_CASE("small-oscillation map has no bad cubes") {
  Circle c(1.0);
  const double delta_N = c.reach() / 2, eta = 0.5;
  const SurfaceMap u = line_map(256, wiggle);
  // no pair of values is eta delta_N / 2 apart
  CHECK(truncated_energy(u, c, eta * delta_N / 2) == 0.0);
  const AveragedField V = average_extend(u, build_mollifier(1), test_slab());
  const ScanResult r = scan_tau_h(2.0, V, c, delta_N, {4, 4, {}});
  for (int b : r.bad_counts) CHECK(b == 0);
  const CountingCheck chk = counting_bound_check(r, u, c, delta_N, eta);
  CHECK(chk.lhs == 0.0);
  CHECK(chk.rhs == 0.0);
}

TEST_CASE("antipodal jumps produce bad cubes") {
  Circle c(1.0);
  const SurfaceMap u = line_map(256, two_jumps);
  const AveragedField V = average_extend(u, build_mollifier(1), test_slab());
  const ScanResult r = scan_tau_h(2.0, V, c, c.reach() / 2, {4, 4, {}});
  for (int b : r.bad_counts) CHECK(b >= 1);
  CHECK(r.best.bad_count == *std::min_element(r.bad_counts.begin(), r.bad_counts.end()));
  CHECK(r.counting_integral > 0.0);
  // bad cubes sit over the jumps
  for (std::size_t i = 0; i < r.best.cubes.size(); ++i) {
    if (!r.best.bad[i]) continue;
    const Cube& q = r.best.cubes[i];
    const double mid = q.lo[0] + q.edge / 2;
    CHECK(std::min(std::abs(mid - 0.5), std::abs(mid + 0.5)) < 1.5 * q.edge + q.lo[1] + q.edge);
  }
}

TEST_CASE("raising the threshold never adds bad cubes") {
  Circle c(1.0);
  const SurfaceMap u = line_map(256, [](double x) { return 2.5 * std::tanh(8 * x); });
  const AveragedField V = average_extend(u, build_mollifier(1), test_slab());
  const CubeFamily f = CubeFamily::covering(1, 2.0, 1.4, {0.5, 0.0}, V.slab.h_min, V.slab.h_max);
  int prev = 1 << 30;
  for (double dN : {0.1, 0.2, 0.4, 0.6, 0.8, 1.0}) {
    const int b = classify(f, V, c, dN).bad_count;
    CHECK(b <= prev);
    prev = b;
  }
}

TEST_CASE("mesh refinement keeps robustly good cubes good") {
  Circle c(1.0);
  const SurfaceMap u = line_map(512, [](double x) { return 2.5 * std::tanh(6 * x); });
  const double dN = c.reach() / 2;
  const CubeFamily f = CubeFamily::covering(1, 2.0, 1.4, {0.5, 0.0}, 1.0 / 64, 1.0);
  const CubeClassification coarse = classify(f, average_extend(u, build_mollifier(1), test_slab(129)), c, dN);
  const CubeClassification fine = classify(f, average_extend(u, build_mollifier(1), test_slab(513)), c, dN);
  REQUIRE(coarse.cubes.size() == fine.cubes.size());
  const double cut = coarse.safety * coarse.threshold, gap = (1 - coarse.safety) * coarse.threshold;
  for (std::size_t i = 0; i < coarse.cubes.size(); ++i) {
    if (coarse.sup_dist[i] < cut - 2 * gap) CHECK_FALSE(fine.bad[i]);
  }
}

TEST_CASE("counting ratio is stable across jump spacings") {
  Circle c(1.0);
  const double dN = c.reach() / 2;
  std::vector<double> ratios;
  for (double s : {0.8, 0.4, 0.2}) {
    const SurfaceMap u = map_on_line(-1.0, 1.0, 512, [s](double x) { return on_circle(std::abs(x) < s / 2 ? 2.5 : 0.0); },
                                     on_circle(0.0));
    const AveragedField V = average_extend(u, build_mollifier(1), test_slab());
    const ScanResult r = scan_tau_h(2.0, V, c, dN, {4, 4, {}});
    const CountingCheck chk = counting_bound_check(r, u, c, dN, 0.5);
    REQUIRE(chk.rhs > 0.0);
    ratios.push_back(chk.ratio);
  }
  const double C = ratios[0];
  for (double q : ratios) {
    CHECK(q <= 2 * C);
    CHECK(q >= C / 2);
  }
}

TEST_CASE("lambda selection") {
  Circle c(1.0);
  const SurfaceMap cst = map_on_circle(256, [](double) { return on_circle(0.0); });
  CHECK(select_lambda(LambdaMode::general, cst, c, 0.125, std::nullopt, 0.01).lambda == 2.0);
  SurfaceMap bounded = cst;
  bounded.L_bound = 1.0;
  CHECK(select_lambda(LambdaMode::bounded_map, bounded, c, 0.125, kPi / 2, 0.01).lambda == 2.0);
  const SurfaceMap id = map_on_circle(1024, [](double t) { return on_circle(t); });
  const LambdaChoice g = select_lambda(LambdaMode::general, id, c, 0.125, std::nullopt, 0.01);
  CHECK(g.lambda == doctest::Approx(kIdentityLambda).epsilon(0.01));
  CHECK(lambda_from_input(LambdaMode::general, 8 * kPi * kPi * std::log(2.0), 1, 0.01, {}, {}).lambda ==
        doctest::Approx(kIdentityLambda).epsilon(1e-12));
  // a small arc has zero gap potential at delta = 0.125 but positive energy
  SurfaceMap arc = map_on_circle(256, [](double t) { return on_circle(0.05 * std::sin(t)); });
  arc.L_bound = 1.0;
  CHECK(gagliardo_energy(arc, c).value > 0.0);
  CHECK(select_lambda(LambdaMode::bounded_map, arc, c, 0.125, kPi / 2, 0.01).lambda == 2.0);
  expect_error(ErrorCode::MissingBound, [&] { select_lambda(LambdaMode::bounded_map, id, c, 0.125, kPi / 2, 0.01); });
  expect_error(ErrorCode::MissingBound, [&] { select_lambda(LambdaMode::bounded_map, bounded, c, 0.125, std::nullopt, 0.01); });
  const LambdaChoice b = lambda_from_input(LambdaMode::bounded_map, 0.3, 1, 0.01, kPi / 2, 1.0);
  CHECK(b.lambda == doctest::Approx(1 + std::exp(2 * 0.01 * kPi * kPi * 0.3)));
  CHECK(lambda_from_input(LambdaMode::general, -5.0, 1, 0.01, {}, {}).lambda == 2.0);
}
