#include <doctest.h>

#include <Eigen/SVD>
#include <random>

#include "singext/conformal.hpp"
#include "singext/energy.hpp"
#include "singext/error.hpp"

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

// Angle from the north pole for a point of the unit circle given by theta.
double pole_angle(double theta) { return wrap_angle(theta - 0.5 * kPi); }

// Circle map constant (angle 0) in the cap of angular radius 0.3 about the
// north pole: a ramp of the given degree plus a bump.
SurfaceMap capped_map(int n, int degree, double bump, int k) {
  return map_on_circle(n, [=](double th) {
    const double s = std::clamp((pole_angle(th) - 0.3) / (2 * kPi - 0.6), 0.0, 1.0);
    const double b = 16 * s * s * (1 - s) * (1 - s);
    return on_circle(2 * kPi * degree * smoothstep(s) + bump * b * std::sin(k * kPi * s));
  });
}

}  // namespace

TEST_CASE("Mobius transport roundtrip and image") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> X(-5, 5), Y(0.01, 10);
  for (int dim : {2, 3}) {
    const MobiusTransport T{dim, TransportDirection::half_space_to_ball};
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
      Point z(dim);
      for (int a = 0; a + 1 < dim; ++a) z[a] = X(rng);
      z[dim - 1] = Y(rng);
      const Point w = T.apply(z);
      CHECK(w.norm() < 1.0);
      worst = std::max(worst, (T.inverse().apply(w) - z).norm() / std::max(1.0, z.norm()));
    }
    CHECK(worst <= 1e-12);
    Point c = Point::Zero(dim);
    c[dim - 1] = 1.0;
    CHECK(T.apply(c).norm() < 1e-15);
  }
  // Boundary points land on the sphere through stereographic projection.
  for (double x : {-3.0, -0.2, 0.0, 1.7}) {
    const Point p = plane_to_sphere(make_point({x}));
    CHECK(p[0] == doctest::Approx(2 * x / (1 + x * x)));
    CHECK(p[1] == doctest::Approx((x * x - 1) / (1 + x * x)));
    CHECK(sphere_to_plane(p)[0] == doctest::Approx(x));
    const Point q = MobiusTransport{2, TransportDirection::half_space_to_ball}.apply(make_point({x, 0.0}));
    CHECK((q - p).norm() < 1e-15);
  }
}

TEST_CASE("Mobius transport is conformal") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> X(-2, 2), Y(0.05, 3);
  for (int dim : {2, 3}) {
    for (auto dir : {TransportDirection::half_space_to_ball, TransportDirection::ball_to_half_space}) {
      const MobiusTransport T{dim, dir};
      for (int i = 0; i < 100; ++i) {
        Point z(dim);
        for (int a = 0; a + 1 < dim; ++a) z[a] = X(rng);
        z[dim - 1] = Y(rng);
        if (dir == TransportDirection::ball_to_half_space) z = T.inverse().apply(z);
        Eigen::MatrixXd J(dim, dim);
        const double h = 1e-6;
        for (int a = 0; a < dim; ++a) {
          Point e = Point::Zero(dim);
          e[a] = h;
          J.col(a) = (T.apply(z + e) - T.apply(z - e)) / (2 * h);
        }
        const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXd>(J).singularValues();
        const double f = T.conformal_factor(z);
        CHECK((sv.maxCoeff() - sv.minCoeff()) / f <= 1e-6);
        CHECK(sv.maxCoeff() == doctest::Approx(f).epsilon(1e-6));
      }
    }
  }
}

TEST_CASE("boundary transport roundtrip") {
  const Circle S(1.0);
  const SurfaceMap v = capped_map(1024, 1, 0.4, 3);
  const SurfaceMap line = transport_map(v, TransportDirection::ball_to_half_space);
  CHECK(line.domain == DomainKind::plane_R1_tail);
  for (std::size_t i = 1; i < line.size(); ++i) CHECK(line.coords[i][0] > line.coords[i - 1][0]);
  double sum = 0.0;
  for (double w : line.weights) sum += w;
  CHECK(sum == doctest::Approx(line.tail->hi[0] - line.tail->lo[0]).epsilon(1e-12));
  const SurfaceMap back = transport_map(line, TransportDirection::half_space_to_ball);
  REQUIRE(back.size() == v.size());
  double dv = 0.0, dp = 0.0, dw = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    dv = std::max(dv, (back.values[i] - v.values[i]).norm());
    dp = std::max(dp, std::abs(back.params[i][0] - v.params[i][0]));
    dw = std::max(dw, std::abs(back.weights[i] - v.weights[i]));
  }
  CHECK(dv <= 1e-12);
  CHECK(dp <= 1e-12);
  CHECK(dw <= 1e-12);

  // The identity is not constant at the pole.
  const SurfaceMap id = map_on_circle(1024, [](double t) { return on_circle(t); });
  expect_error(ErrorCode::PoleOnSupport, [&] { transport_map(id, TransportDirection::ball_to_half_space); });
  TransportOptions trunc;
  trunc.policy = TailPolicy::truncate;
  const SurfaceMap id_line = transport_map(id, TransportDirection::ball_to_half_space, trunc);
  const SurfaceMap id_back = transport_map(id_line, TransportDirection::half_space_to_ball);
  REQUIRE(id_back.size() == id.size());
  for (std::size_t i = 0; i < id.size(); ++i) {
    const double phi = pole_angle(id.params[i][0]);
    if (phi < trunc.cap_radius || phi > 2 * kPi - trunc.cap_radius) continue;
    CHECK((id_back.values[i] - id.values[i]).norm() <= 1e-10);
  }
}

TEST_CASE("constant map transports to a constant map") {
  const Circle S(1.0);
  const Point p = on_circle(0.4);
  const SurfaceMap c = map_on_circle(256, [&](double) { return p; });
  const SurfaceMap l = transport_map(c, TransportDirection::ball_to_half_space);
  for (const Point& q : l.values) CHECK(q == p);
  CHECK(l.tail->value == p);
  CHECK(gagliardo_energy(c, S).value == 0.0);
  CHECK(gagliardo_energy(l, S).value == 0.0);
}

TEST_CASE("boundary energy is invariant under transport") {
  const Circle S(1.0);
  int checked = 0;
  for (int degree : {0, 1}) {
    for (double bump : {0.3, 0.8}) {
      for (int k : {1, 2, 4}) {
        if (checked == 10) break;
        const SurfaceMap v = capped_map(1024, degree, bump, k);
        const double Es = gagliardo_energy(v, S).value;
        const double Ep = gagliardo_energy(transport_map(v, TransportDirection::ball_to_half_space), S).value;
        CHECK(Ep == doctest::Approx(Es).epsilon(0.01));
        ++checked;
      }
    }
  }
  CHECK(checked == 10);
  // Line to circle: a degree-one loop with its tail.
  const SurfaceMap u = map_on_line(-1, 1, 1024, [](double x) { return on_circle(2 * kPi * smoothstep((x + 0.5))); },
                                   on_circle(0.0));
  const double El = gagliardo_energy(u, S).value;
  const double Ec = gagliardo_energy(transport_map(u, TransportDirection::half_space_to_ball), S).value;
  CHECK(Ec == doctest::Approx(El).epsilon(0.01));
}

TEST_CASE("transport preconditions") {
  const SurfaceMap s2 = map_on_sphere(8, 8, [](double, double) { return make_point({0, 0, 1}); });
  expect_error(ErrorCode::Unsupported, [&] { transport_map(s2, TransportDirection::ball_to_half_space); });
  const SurfaceMap c = map_on_circle(64, [](double) { return on_circle(0); });
  expect_error(ErrorCode::InvalidInput, [&] { transport_map(c, TransportDirection::half_space_to_ball); });
}

TEST_CASE("hyperbolic measure oracles") {
  const BallGrid g{2, 1024};
  CHECK(hyperbolic_measure(g, std::vector<std::uint8_t>(g.size(), 0)) == 0.0);
  // Hyperbolic radius 1 is Euclidean radius tanh(1/2).
  const double area = hyperbolic_measure(g, ball_region(g, std::tanh(0.5)));
  CHECK(hyperbolic_disk_area(1.0) == doctest::Approx(3.41227626528490).epsilon(1e-14));
  CHECK(area == doctest::Approx(hyperbolic_disk_area(1.0)).epsilon(0.01));
  // Radial reduction: int_0^R (2 / (1 - r^2))^2 2 pi r dr = 4 pi R^2 / (1 - R^2).
  const double half = hyperbolic_measure(g, ball_region(g, 0.5));
  CHECK(half == doctest::Approx(4.18879020478639).epsilon(1e-3));
  expect_error(ErrorCode::BoundaryTouch, [&] { hyperbolic_measure(g, ball_region(g, 1.0)); });
  const BallGrid g3{3, 96};
  const double R = 0.4;
  // int_0^R (2 / (1 - r^2))^3 4 pi r^2 dr by composite Simpson.
  double oracle = 0.0;
  const int n = 2000;
  for (int i = 0; i <= n; ++i) {
    const double r = R * i / n;
    const double f = std::pow(2 / (1 - r * r), 3) * 4 * kPi * r * r;
    oracle += f * (i == 0 || i == n ? 1 : (i % 2 ? 4 : 2));
  }
  oracle *= R / n / 3;
  CHECK(hyperbolic_measure(g3, ball_region(g3, R)) == doctest::Approx(oracle).epsilon(0.02));
}

TEST_CASE("hyperbolic density is radial and bounded below") {
  double last = 0.0;
  for (double r = 0.0; r < 0.99; r += 0.01) {
    const double d = hyperbolic_density(make_point({r, 0.0}));
    CHECK(d >= 4.0);
    CHECK(d >= last);
    CHECK(hyperbolic_density(make_point({0.0, -r})) == d);
    last = d;
  }
  expect_error(ErrorCode::BoundaryTouch, [] { hyperbolic_density(make_point({1.0, 0.0})); });
}

TEST_CASE("hyperbolic distribution") {
  const BallGrid g{2, 512};
  auto in_half = [](const Point& w) { return w.norm() < 0.5; };
  const BallField c = sample_ball(g, [&](const Point& w) -> std::optional<Point> {
    if (!in_half(w)) return std::nullopt;
    return on_circle(0.3);
  });
  const DistributionReport dc = hyperbolic_distribution(c);
  CHECK(dc.weak_norm == 0.0);
  for (double m : dc.mu) CHECK(m == 0.0);
  CHECK(dc.collar == kHyperbolicCollar);

  // |DU|_eucl = 1 on the Euclidean ball of radius 1/2.
  const BallField F = sample_ball(g, [&](const Point& w) -> std::optional<Point> {
    if (!in_half(w)) return std::nullopt;
    return make_point({w[0], 0.0});
  });
  const DistributionReport d = hyperbolic_distribution(F);
  const double whole = hyperbolic_measure(g, F.support);
  CHECK(d.measure == doctest::Approx(whole).epsilon(1e-12));
  CHECK(level_measure({1.0}, {whole}, 1e-300) == whole);
  // {(1 - r^2)/2 >= t} is the disk r <= sqrt(1 - 2t), cut at 1/2.
  for (std::size_t k = 0; k < d.t.size(); k += 16) {
    const double s = std::min(0.5, std::sqrt(std::max(0.0, 1 - 2 * d.t[k])));
    CHECK(d.mu[k] == doctest::Approx(4 * kPi * s * s / (1 - s * s)).epsilon(0.02));
  }
  CHECK(d.layer_cake == doctest::Approx(d.w11_norm).epsilon(0.01));
}

TEST_CASE("extension pulled back to the ball") {
  const auto M = std::make_shared<Circle>(1.0);
  const SurfaceMap u = map_on_line(-1, 1, 256, [](double x) { return on_circle(2 * kPi * smoothstep(4 * x + 0.5)); },
                                   on_circle(0.0));
  ExtensionConfig cfg;
  cfg.slab = default_slab(u, 256);
  const Assembly a = assemble(u, M, cfg);
  REQUIRE(a.dist.singular_count >= 1);
  const BallField F = ball_field(*a.U, BallGrid{2, 128});
  for (std::size_t i = 0; i < F.values.size(); ++i) {
    if (F.support[i]) CHECK(std::abs(F.values[i].norm() - 1.0) < 1e-8);
  }
  const DistributionReport d = hyperbolic_distribution(F);
  CHECK(d.layer_cake == doctest::Approx(d.w11_norm).epsilon(0.01));
  std::vector<Point> sing;
  for (const auto& s : a.field.singular_points) sing.push_back(make_point({s[0], s[1]}));
  for (const Point& w : transport_points(sing, TransportDirection::half_space_to_ball)) CHECK(w.norm() < 1.0);
}
