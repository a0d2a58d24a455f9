#pragma once

#include <memory>
#include <string>
#include <vector>

#include "singext/geometry.hpp"
#include "singext/surface_map.hpp"

namespace singext {

// Radial polynomial bump phi(z) = sum_k profile[k] |z|^{2k} on the closed unit
// ball of R^m, zero outside.
struct Mollifier {
  int m = 1;
  std::vector<double> profile;
  double integral = 0.0;
  double sup_bound = 0.0;
  double grad_bound = 0.0;

  double value(double r) const;
  // d phi / d r
  double radial_derivative(double r) const;
  // m = 1 only: int_{-1}^{z} phi.
  double cumulative(double z) const;
  std::string id() const;
};

// m = 1: (15/16)(1 - z^2)^2; m = 2: (3/pi)(1 - |z|^2)^2.
Mollifier build_mollifier(int m);
// Checks unit mass, sup phi <= 1 and sup |D phi| <= 2 (BoundViolation otherwise).
Mollifier mollifier_from_profile(int m, std::vector<double> profile);

// Slab {x' in [x_lo, x_hi]^m, y in [h_min, h_max]} with nx nodes per
// horizontal axis and ny heights on a geometric ladder.
struct SlabSpec {
  int m = 1;
  double x_lo = -2.0, x_hi = 2.0;
  int nx = 1024;
  double h_min = 1.0 / 512, h_max = 1.0;
  int ny = 64;

  std::vector<double> xs() const;
  std::vector<double> heights() const;
  nlohmann::json to_json() const;
  static SlabSpec from_json(const nlohmann::json& j);
};

// V(x', y) = int u(x' - y z) phi(z) dz for a plane-domain map. For m = 1 the
// map is read as its piecewise-linear interpolant (constant on the outer half
// cells, tail value outside the window) and the integral is exact cellwise;
// for m = 2 it is bilinear and the integral uses polar Gauss-Legendre.
// Requires an even polynomial profile of degree <= 4 for m = 1.
class AveragingOperator {
 public:
  AveragingOperator(const SurfaceMap& u, Mollifier phi);
  Point operator()(const Point& x, double y) const;
  Point operator()(double x, double y) const;
  // |V_coarse - V_fine| for the doubled polar rule (m = 2); zero for m = 1.
  double error_estimate(const Point& x, double y) const;
  // Piecewise-linear (m = 1) or bilinear (m = 2) reading of the map.
  Point trace(const Point& x) const;
  int m() const { return phi_.m; }
  int ambient_dim() const { return dim_; }
  const Mollifier& mollifier() const { return phi_; }
  const SurfaceMap& map() const { return u_; }

 private:
  Point eval1(double x, double y) const;
  Point eval2(const Point& x, double y, int nr, int nt) const;
  void build_tree();
  void query(std::size_t node, double x, double y, double c0, double c1, Point& sum) const;
  Point segment_integral(std::size_t k, double x, double y, double s0, double s1) const;
  SurfaceMap u_;
  Mollifier phi_;
  int dim_;
  std::vector<double> knots_;  // m = 1: a, node coords..., b
  double a_ = 0.0, b_ = 0.0;
  // m = 1: binary tree over the segments between knots; each node holds
  // int u(s) (s - c)^q ds, q = 0..4, about its center c, so fully covered
  // nodes integrate the quartic kernel exactly from five moments.
  std::size_t leaves_ = 0;
  std::vector<double> node_lo_, node_hi_;
  std::vector<double> moments_;  // node-major, then q, then component
};

struct AveragedField {
  SlabSpec slab;
  std::vector<double> xs;
  std::vector<double> heights;
  // Node order: height-major, then horizontal index (row-major for m = 2).
  std::vector<Point> values;
  std::vector<double> dist;
  std::vector<std::uint8_t> outside_tube;
  int ambient_dim = 0;
  std::string mollifier_id;
  std::uint64_t manifold_hash = 0;
  // Present for freshly built fields; fields read from disk are grid-only.
  std::shared_ptr<const AveragingOperator> op;

  std::size_t horizontal_count() const;
  std::size_t index(std::size_t ih, std::size_t ix) const { return ih * horizontal_count() + ix; }
  // V at an arbitrary slab point: exact through the operator, otherwise
  // bilinear in (x, log y) on the grid (CoverageGap outside it; m = 1 only).
  Point at(double x, double y) const;
};

AveragedField average_extend(const SurfaceMap& u, const Mollifier& phi, const SlabSpec& slab);
// Fills dist and outside_tube; out-of-tube nodes keep the best sampled distance.
void distance_field(AveragedField& V, const EmbeddedManifold& M);

// sum_i w_i |V(x_i, y) - u_i| over the map nodes.
double trace_l1_error(const AveragingOperator& V, double y);

// Raw little-endian doubles (values, then dist if present) plus path + ".json".
void write_field(const AveragedField& V, const std::string& path);
AveragedField read_field(const std::string& path);

}  // namespace singext
