#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "singext/extension.hpp"
#include "singext/surface_map.hpp"

namespace singext {

enum class TransportDirection { half_space_to_ball, ball_to_half_space };
const char* direction_name(TransportDirection d);
TransportDirection parse_direction(const std::string& name);

// Psi(x', y) = I(x', -y) with I the inversion in the sphere of radius sqrt 2
// about the north pole e_{m+1}: the upper half-space goes to the unit ball,
// (0, 1) to its center, and the boundary R^m to S^m by stereographic
// projection, infinity going to the north pole.
struct MobiusTransport {
  int dim = 2;  // m + 1
  TransportDirection direction = TransportDirection::half_space_to_ball;

  Point apply(const Point& z) const;
  // |D apply| at z (the differential is this times an orthogonal matrix).
  double conformal_factor(const Point& z) const;
  MobiusTransport inverse() const;
};

// Boundary charts: R^m -> S^m minus the north pole, and back.
Point plane_to_sphere(const Point& x);
Point sphere_to_plane(const Point& p);

enum class TailPolicy { strict, truncate };

struct TransportOptions {
  TailPolicy policy = TailPolicy::strict;
  // Angular radius of the cap around the north pole that becomes the tail.
  double cap_radius = 0.25;
  double tolerance = 1e-10;
};

// Moves a boundary map between S^1 (or the Poincare boundary) and the line
// with a tail, cell by cell. Sphere cells inside the pole cap must carry one
// value (strict, PoleOnSupport otherwise) or are replaced by the value nearest
// the pole (truncate). The way back fills the cap with tail-valued cells at the
// spacing of the adjacent cells. m = 1 only.
SurfaceMap transport_map(const SurfaceMap& u, TransportDirection direction, const TransportOptions& opt = {});

std::vector<Point> transport_points(const std::vector<Point>& pts, TransportDirection direction);

// Uniform grid of n^dim cells on [-1, 1]^dim.
struct BallGrid {
  int dim = 2;
  int n = 256;

  double cell() const { return 2.0 / n; }
  std::size_t size() const;
  Point center(std::size_t idx) const;
};

constexpr double kHyperbolicCollar = 1.0 / 64;

double hyperbolic_density(const Point& x);
// Cells whose center lies in the open Euclidean ball of the given radius.
std::vector<std::uint8_t> ball_region(const BallGrid& g, double radius);
// Integral of the density over the marked cells (3-point Gauss per axis);
// BoundaryTouch if a marked cell reaches the unit sphere.
double hyperbolic_measure(const BallGrid& g, const std::vector<std::uint8_t>& region);
double hyperbolic_disk_area(double rho);  // 4 pi sinh^2(rho / 2)

struct BallField {
  BallGrid grid;
  std::vector<Point> values;
  std::vector<std::uint8_t> support;
};

// Samples f on the cells where it returns a value and the center lies inside
// the sphere of radius 1 - collar.
BallField sample_ball(const BallGrid& g, const std::function<std::optional<Point>(const Point&)>& f,
                      double collar = kHyperbolicCollar);
// U o Psi^{-1} for a half-plane extension.
BallField ball_field(const ExtensionMap& U, const BallGrid& g, double collar = kHyperbolicCollar);

// mu_hyp(t) = hyperbolic measure of {|DU|_hyp >= t}, |DU|_hyp = (1 - |x|^2)/2 |DU|.
DistributionReport hyperbolic_distribution(const BallField& F, int report_points = 256,
                                           double collar = kHyperbolicCollar);

}  // namespace singext
