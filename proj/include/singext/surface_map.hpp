#pragma once

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "singext/geometry.hpp"
#include "singext/types.hpp"

namespace singext {

enum class DomainKind { sphere_S1, sphere_S2, plane_R1_tail, plane_R2_tail, poincare_boundary };

const char* domain_name(DomainKind d);
DomainKind parse_domain(const std::string& name);
bool is_plane(DomainKind d);

// Constant value outside a compact window [lo, hi] (per axis) of a plane domain.
struct Tail {
  std::array<double, 2> lo{0.0, 0.0};
  std::array<double, 2> hi{0.0, 0.0};
  Point value;
};

// Discretized boundary map on a structured mesh. Nodes are stored row-major
// over shape = (n1, n2) (n2 = 1 for one-dimensional domains).
struct SurfaceMap {
  DomainKind domain = DomainKind::sphere_S1;
  int m = 1;
  std::array<int, 2> shape{0, 1};
  // Periodic index axes (S1 around the circle, the azimuth of S2).
  std::array<bool, 2> periodic{false, false};
  std::vector<Params> params;  // angle(s) for spheres, coordinates for planes
  std::vector<Point> coords;   // embedded domain positions: R^{m+1} for spheres, R^m for planes
  std::vector<double> weights;
  std::vector<Point> values;
  std::optional<double> L_bound;
  std::optional<Tail> tail;
  std::string manifold_ref;

  std::size_t size() const { return values.size(); }
  std::size_t index(int i, int j) const { return static_cast<std::size_t>(i) * shape[1] + j; }
};

using Map1 = std::function<Point(double)>;
using Map2 = std::function<Point(double, double)>;

// n equally spaced nodes theta_k = 2 pi k / n on the unit circle.
SurfaceMap map_on_circle(int n, const Map1& u, DomainKind domain = DomainKind::sphere_S1);
// Midpoint nodes on [a, b] with constant tail value outside.
SurfaceMap map_on_line(double a, double b, int n, const Map1& u, const Point& tail);
// Midpoint latitude rings times equally spaced azimuths on the unit sphere.
SurfaceMap map_on_sphere(int n_theta, int n_phi, const Map2& u, DomainKind domain = DomainKind::sphere_S2);
// Midpoint grid on a square window with constant tail value outside.
SurfaceMap map_on_plane(double a, double b, int n, const Map2& u, const Point& tail);

// Checks values lie on M (tolerance from M) and respect L_bound.
void validate_map(const SurfaceMap& u, const EmbeddedManifold& M);

// Keeps every 2^level-th node per axis; weights of dropped nodes are merged
// into the kept node that precedes them.
SurfaceMap coarsen(const SurfaceMap& u, int level);

SurfaceMap read_map(const std::string& path);
void write_map(const SurfaceMap& u, const std::string& path);

}  // namespace singext
