#pragma once

#include <array>
#include <cstdint>
#include <json.hpp>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "singext/types.hpp"
#include "singext/warp.hpp"

namespace singext {

enum class ManifoldKind { circle, sphere, clifford_torus, cylinder, warped_cylinder, flat, point_cloud };
enum class ProjectionBackend { analytic, sampled };

const char* kind_name(ManifoldKind kind);

struct Tolerances {
  double projection = 1e-10;    // ambient length, sampled projection stopping rule
  double on_manifold = 1e-8;    // tube margin used for "lies on M"
  double geodesic_refine = 5e-3;  // relative change between graph refinements
};

struct Closest {
  Point point;
  double distance = 0.0;
  bool converged = true;
  // False when z sits where the nearest point is not unique (medial axis).
  bool unique = true;
};

// A point of M together with an orthonormal basis of its tangent space.
struct FramedSample {
  Point point;
  Frame tangent;
};

struct ParamDomain {
  int dim = 1;
  std::array<double, 2> lo{0.0, 0.0};
  std::array<double, 2> hi{0.0, 0.0};
  std::array<bool, 2> periodic{false, false};
};

class EmbeddedManifold {
 public:
  virtual ~EmbeddedManifold() = default;

  virtual ManifoldKind kind() const = 0;
  virtual int ambient_dim() const = 0;
  virtual int intrinsic_dim() const = 0;
  virtual bool is_compact() const = 0;
  virtual double diameter() const = 0;
  // Reach used for tube decisions: closed form when known, otherwise the
  // sampled Federer estimate computed at construction.
  virtual double reach() const = 0;
  virtual std::optional<double> exact_reach() const { return std::nullopt; }

  // Nearest point and distance; total on ambient points.
  virtual Closest closest(const Point& z) const = 0;
  // Geodesic distance between two on-manifold points (no input checks).
  virtual double geodesic(const Point& p, const Point& q) const = 0;
  virtual std::vector<double> geodesics_from(const Point& p, const std::vector<Point>& qs) const;
  // Deterministic nested sample sequence: the first n of samples(n + k) equal samples(n).
  virtual std::vector<FramedSample> samples(std::size_t n) const = 0;
  // Roughly n samples on a regular parameter lattice (even counts on periodic
  // axes, so antipodal pairs are present); defaults to samples(n).
  virtual std::vector<FramedSample> lattice_samples(std::size_t n) const { return samples(n); }

  ProjectionBackend backend() const { return backend_; }
  const Tolerances& tolerances() const { return tol_; }
  void set_tolerances(const Tolerances& t) { tol_ = t; }
  // Canonical JSON description (kind, parameters, window, backend, tolerances).
  nlohmann::json spec() const;
  std::uint64_t spec_hash() const;
  // Working window in the non-compact parameter, if truncated.
  std::optional<std::array<double, 2>> truncation_window() const { return window_; }

 protected:
  virtual nlohmann::json parameters_json() const = 0;

  ProjectionBackend backend_ = ProjectionBackend::analytic;
  Tolerances tol_;
  std::optional<std::array<double, 2>> window_;
};

// Manifolds given by a global chart on a parameter box (with periodic axes).
class ChartManifold : public EmbeddedManifold {
 public:
  virtual ParamDomain domain() const = 0;
  virtual Point chart(const Params& s) const = 0;
  virtual Frame chart_jacobian(const Params& s) const;
  virtual Metric declared_metric(const Params& s) const = 0;
  // Parameters of an on-manifold point.
  virtual Params locate(const Point& p) const = 0;
  // Orthonormal tangent basis; DegenerateTangent if the chart is singular there.
  virtual Frame tangent_frame(const Params& s) const;

  Closest closest(const Point& z) const override;
  double geodesic(const Point& p, const Point& q) const override;
  std::vector<double> geodesics_from(const Point& p, const std::vector<Point>& qs) const override;
  std::vector<FramedSample> samples(std::size_t n) const override;
  std::vector<FramedSample> lattice_samples(std::size_t n) const override;
  std::vector<Params> sample_params(std::size_t n) const;

  // Multi-start Levenberg-Marquardt projection (used by the sampled backend).
  Closest closest_sampled(const Point& z) const;
  // Shortest paths on a refined parameter graph (used by the sampled backend).
  std::vector<double> graph_geodesics(const Params& src, const std::vector<Params>& targets) const;
  // Arc length of the straight parameter segment a -> b under the declared metric.
  double segment_length(const Params& a, const Params& b) const;

 protected:
  virtual std::optional<Closest> closest_analytic(const Point& z) const = 0;
  virtual std::optional<double> geodesic_analytic(const Point& p, const Point& q) const = 0;
  virtual Params sample_map(double u1, double u2) const;
  virtual std::vector<Params> seeds(const Point& z) const;

  Params wrap(Params s) const;
  // Cached seed table for closest_sampled.
  mutable std::vector<std::pair<Params, Point>> seed_table_;
  void build_seed_table() const;
};

class Circle final : public ChartManifold {
 public:
  explicit Circle(double r, ProjectionBackend backend = ProjectionBackend::analytic);
  ManifoldKind kind() const override { return ManifoldKind::circle; }
  int ambient_dim() const override { return 2; }
  int intrinsic_dim() const override { return 1; }
  bool is_compact() const override { return true; }
  double diameter() const override { return kPi * r_; }
  double reach() const override { return r_; }
  std::optional<double> exact_reach() const override { return r_; }
  ParamDomain domain() const override;
  Point chart(const Params& s) const override;
  Frame chart_jacobian(const Params& s) const override;
  Metric declared_metric(const Params& s) const override;
  Params locate(const Point& p) const override;
  double radius() const { return r_; }

 protected:
  nlohmann::json parameters_json() const override { return {{"radius", r_}}; }
  std::optional<Closest> closest_analytic(const Point& z) const override;
  std::optional<double> geodesic_analytic(const Point& p, const Point& q) const override;
  std::vector<Params> seeds(const Point& z) const override;

 private:
  double r_;
};

class Sphere final : public ChartManifold {
 public:
  explicit Sphere(double r, ProjectionBackend backend = ProjectionBackend::analytic);
  ManifoldKind kind() const override { return ManifoldKind::sphere; }
  int ambient_dim() const override { return 3; }
  int intrinsic_dim() const override { return 2; }
  bool is_compact() const override { return true; }
  double diameter() const override { return kPi * r_; }
  double reach() const override { return r_; }
  std::optional<double> exact_reach() const override { return r_; }
  ParamDomain domain() const override;
  Point chart(const Params& s) const override;
  Frame chart_jacobian(const Params& s) const override;
  Metric declared_metric(const Params& s) const override;
  Params locate(const Point& p) const override;
  Frame tangent_frame(const Params& s) const override;

 protected:
  nlohmann::json parameters_json() const override { return {{"radius", r_}}; }
  std::optional<Closest> closest_analytic(const Point& z) const override;
  std::optional<double> geodesic_analytic(const Point& p, const Point& q) const override;
  Params sample_map(double u1, double u2) const override;
  std::vector<Params> seeds(const Point& z) const override;

 private:
  double r_;
};

class CliffordTorus final : public ChartManifold {
 public:
  CliffordTorus(double r1, double r2, ProjectionBackend backend = ProjectionBackend::analytic);
  ManifoldKind kind() const override { return ManifoldKind::clifford_torus; }
  int ambient_dim() const override { return 4; }
  int intrinsic_dim() const override { return 2; }
  bool is_compact() const override { return true; }
  double diameter() const override;
  double reach() const override { return std::min(r1_, r2_); }
  std::optional<double> exact_reach() const override { return reach(); }
  ParamDomain domain() const override;
  Point chart(const Params& s) const override;
  Frame chart_jacobian(const Params& s) const override;
  Metric declared_metric(const Params& s) const override;
  Params locate(const Point& p) const override;

 protected:
  nlohmann::json parameters_json() const override { return {{"r1", r1_}, {"r2", r2_}}; }
  std::optional<Closest> closest_analytic(const Point& z) const override;
  std::optional<double> geodesic_analytic(const Point& p, const Point& q) const override;
  std::vector<Params> seeds(const Point& z) const override;

 private:
  double r1_, r2_;
};

// Round cylinder of radius r around the third coordinate axis; parameters (theta, t).
class Cylinder final : public ChartManifold {
 public:
  Cylinder(double r, double half_window, ProjectionBackend backend = ProjectionBackend::analytic);
  ManifoldKind kind() const override { return ManifoldKind::cylinder; }
  int ambient_dim() const override { return 3; }
  int intrinsic_dim() const override { return 2; }
  bool is_compact() const override { return false; }
  double diameter() const override { return kInf; }
  double reach() const override { return r_; }
  std::optional<double> exact_reach() const override { return r_; }
  ParamDomain domain() const override;
  Point chart(const Params& s) const override;
  Frame chart_jacobian(const Params& s) const override;
  Metric declared_metric(const Params& s) const override;
  Params locate(const Point& p) const override;

 protected:
  nlohmann::json parameters_json() const override { return {{"radius", r_}}; }
  std::optional<Closest> closest_analytic(const Point& z) const override;
  std::optional<double> geodesic_analytic(const Point& p, const Point& q) const override;
  std::vector<Params> seeds(const Point& z) const override;

 private:
  double r_;
};

// Surface of revolution (a(t), f(t) cos theta, f(t) sin theta) with
// a' = sqrt(1 - f'^2), so the induced metric is dt^2 + f(t)^2 dtheta^2.
// Parameters (t, theta). Always uses the sampled backend.
class WarpedCylinder final : public ChartManifold {
 public:
  WarpedCylinder(WarpFunction f, double half_window, std::optional<double> declared_reach = std::nullopt);
  ManifoldKind kind() const override { return ManifoldKind::warped_cylinder; }
  int ambient_dim() const override { return 3; }
  int intrinsic_dim() const override { return 2; }
  bool is_compact() const override { return false; }
  double diameter() const override { return kInf; }
  double reach() const override { return reach_; }
  ParamDomain domain() const override;
  Point chart(const Params& s) const override;
  Frame chart_jacobian(const Params& s) const override;
  Metric declared_metric(const Params& s) const override;
  Params locate(const Point& p) const override;
  const WarpFunction& warp() const { return f_; }
  // Axial profile a(t).
  double axial(double t) const;

 protected:
  nlohmann::json parameters_json() const override;
  std::optional<Closest> closest_analytic(const Point&) const override { return std::nullopt; }
  std::optional<double> geodesic_analytic(const Point&, const Point&) const override { return std::nullopt; }
  std::vector<Params> seeds(const Point& z) const override;

 private:
  WarpFunction f_;
  double T_;
  double reach_ = 0.0;
  // Tabulated a(t) on a uniform grid covering the window plus a margin.
  double tab_lo_ = 0.0, tab_h_ = 0.0;
  std::vector<double> tab_a_;
  std::vector<double> tab_f_;
};

// Convex box [-w, w]^dim in R^dim (w may be infinite): infinite reach, K = 1.
class FlatPatch final : public ChartManifold {
 public:
  FlatPatch(int dim, double half_width);
  ManifoldKind kind() const override { return ManifoldKind::flat; }
  int ambient_dim() const override { return dim_; }
  int intrinsic_dim() const override { return dim_; }
  bool is_compact() const override { return std::isfinite(w_); }
  double diameter() const override { return 2.0 * w_ * std::sqrt(static_cast<double>(dim_)); }
  double reach() const override { return kInf; }
  std::optional<double> exact_reach() const override { return kInf; }
  ParamDomain domain() const override;
  Point chart(const Params& s) const override;
  Frame chart_jacobian(const Params& s) const override;
  Metric declared_metric(const Params& s) const override;
  Params locate(const Point& p) const override;

 protected:
  nlohmann::json parameters_json() const override { return {{"dim", dim_}, {"half_width", std::isfinite(w_) ? nlohmann::json(w_) : nlohmann::json("inf")}}; }
  std::optional<Closest> closest_analytic(const Point& z) const override;
  std::optional<double> geodesic_analytic(const Point& p, const Point& q) const override;

 private:
  int dim_;
  double w_;
};

// Sampled surface with tangent frames; projection snaps to the nearest sample
// and projects onto its tangent plane, geodesics use a k-nearest-neighbor graph.
class PointCloud final : public EmbeddedManifold {
 public:
  PointCloud(std::vector<FramedSample> pts, std::optional<double> declared_reach, std::string source = "");
  static std::shared_ptr<PointCloud> from_csv(const std::string& path, std::optional<double> declared_reach);
  ManifoldKind kind() const override { return ManifoldKind::point_cloud; }
  int ambient_dim() const override;
  int intrinsic_dim() const override;
  bool is_compact() const override { return true; }
  double diameter() const override;
  double reach() const override { return reach_; }
  Closest closest(const Point& z) const override;
  double geodesic(const Point& p, const Point& q) const override;
  std::vector<double> geodesics_from(const Point& p, const std::vector<Point>& qs) const override;
  std::vector<FramedSample> samples(std::size_t n) const override;
  std::size_t size() const { return pts_.size(); }

 protected:
  nlohmann::json parameters_json() const override;

 private:
  std::size_t nearest(const Point& z) const;
  std::vector<double> dijkstra(std::size_t src) const;
  std::vector<FramedSample> pts_;
  std::vector<std::vector<std::pair<std::size_t, double>>> adj_;
  double reach_ = 0.0;
  std::string source_;
};

std::shared_ptr<const EmbeddedManifold> make_manifold(const nlohmann::json& spec, const std::string& base_dir = ".");
std::shared_ptr<const EmbeddedManifold> load_manifold(const std::string& path);

// Nearest-point projection; OutsideTube at or beyond the reach, NoConvergence
// if the sampled backend fails to settle.
Point project(const EmbeddedManifold& M, const Point& z);
bool tube_membership(const EmbeddedManifold& M, const Point& z, double margin);

struct ReachEstimate {
  double value = kInf;
  std::size_t sample_count = 0;
  std::vector<std::pair<std::size_t, double>> monotone_history;
  std::optional<double> exact;
};

// Sampled Federer quotient inf |q - p|^2 / (2 dist(q - p, T_p M)) over pairs.
ReachEstimate federer_reach(const EmbeddedManifold& M, std::size_t sample_count);

double geodesic_distance(const EmbeddedManifold& M, const Point& p, const Point& q);

struct ComparabilityConstant {
  double K = 1.0;
  double L = 0.0;
  std::size_t sample_count = 0;
};

ComparabilityConstant comparability_K(const EmbeddedManifold& M, double L, std::size_t sample_count);

// Max relative deviation between the finite-difference pullback metric and the
// declared metric over n sampled parameters.
double isometry_defect(const ChartManifold& M, std::size_t n);

// FNV-1a over a byte string; used for config and spec hashes.
std::uint64_t fnv1a(const std::string& bytes);
std::string hex64(std::uint64_t h);

}  // namespace singext
