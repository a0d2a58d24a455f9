#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "singext/averaging.hpp"
#include "singext/cubes.hpp"
#include "singext/energy.hpp"

namespace singext {

enum class Provenance : std::uint8_t { reprojected = 0, homogeneous = 1 };

// Axis-aligned box in the (x', y) half-plane around the barycenter (sx, sy)
// of the bad cube that seeded it. Floor boxes reach down to the boundary
// y = 0, where their trace is the map itself.
struct Region {
  double x0 = 0.0, x1 = 0.0, y0 = 0.0, y1 = 0.0;
  double sx = 0.0, sy = 0.0;
  // Seed ordering on merges: finer generation first, then larger dist(V, M).
  int seed_generation = 0;
  double seed_dist = 0.0;
  bool floor = false;
  bool removable = false;
  double oscillation = 0.0;

  bool contains(double x, double y) const { return x >= x0 && x <= x1 && y >= y0 && y <= y1; }
};

// Boundary trace of a box: value at a boundary point.
using BoxTrace = std::function<Point(double x, double y)>;

// U(p) = trace(c + (p - c) / s) with c the seed barycenter and s the gauge of
// the box about c: constant along rays from c. The point c itself takes the
// ray in the +x direction.
Point homogeneous_value(const Region& box, const BoxTrace& trace, double x, double y);
// Evaluates the homogeneous extension at the given points after checking
// that the sampled boundary trace lies on M (BoundaryNotOnManifold otherwise).
std::vector<Point> homogeneous_extend(const Region& box, const BoxTrace& trace, const EmbeddedManifold& M,
                                      const std::vector<std::array<double, 2>>& points, int samples_per_side = 64);

struct ExtensionConfig {
  LambdaMode mode = LambdaMode::general;
  double eta = 0.5;
  double c1 = 0.01;
  // Comparability constant for bounded mode; computed from M when absent.
  std::optional<double> K;
  std::size_t K_samples = 256;
  SlabSpec slab;
  ScanOptions scan;
  int max_repairs = 64;

  nlohmann::json to_json() const;
};

// Desk-scale slab for a line map on [a, b]: x' in [a - W, b + W], heights
// from W 2^-9 to W (W = b - a), nx horizontal nodes and nx / 16 heights.
SlabSpec default_slab(const SurfaceMap& u, int nx);

struct ExtensionField {
  SlabSpec slab;
  std::vector<double> xs;
  std::vector<double> heights;
  std::vector<Point> values;
  std::vector<Provenance> provenance;
  std::vector<double> grad;  // |DU| per node
  std::vector<double> weights;  // dual cell areas
  std::vector<std::array<double, 2>> singular_points;
  std::vector<std::uint8_t> singular_removable;
  int ambient_dim = 0;

  std::size_t index(std::size_t ih, std::size_t ix) const { return ih * xs.size() + ix; }
};

struct DistributionReport {
  std::vector<double> t;
  std::vector<double> mu;
  double weak_norm = 0.0;     // sup_t t^{m+1} mu(t)
  double w11_norm = 0.0;      // int |DU|
  double dirichlet = 0.0;     // int |DU|^2
  double strong_norm = 0.0;   // int |DU|^{m+1}
  double layer_cake = 0.0;    // int_0^inf mu(t) dt by quadrature
  double measure = 0.0;
  int singular_count = 0;
  // Width of the excluded boundary collar (hyperbolic reports only).
  double collar = 0.0;

  nlohmann::json to_json() const;
  std::string to_csv() const;
};

// Measure of {|DU| >= t}; exact on the discrete data.
double level_measure(const std::vector<double>& grad, const std::vector<double>& weights, double t);
DistributionReport distribution(const std::vector<double>& grad, const std::vector<double>& weights, int m,
                                int report_points = 256);

// Centered differences inside, one-sided at the faces; Frobenius norm.
void gradient_field(ExtensionField& U);

// Projection of V on the nodes of good cubes (others left empty). Throws
// TubeEscape if such a node is at distance >= delta_N from M.
std::vector<std::optional<Point>> reproject_good(const AveragedField& V, const CubeClassification& cls,
                                                 const EmbeddedManifold& M, double delta_N);

struct InvariantCheck {
  std::string name;
  bool passed = true;
  std::string detail;
};

// U at arbitrary points of the closed upper half-plane above the slab floor:
// homogeneous inside the regions, the projected average elsewhere.
class ExtensionMap {
 public:
  struct Value {
    Point value;
    Provenance provenance = Provenance::reprojected;
    // Reprojected point whose average is not within delta_N of M.
    bool escaped = false;
  };

  ExtensionMap(std::vector<Region> regions, std::shared_ptr<const AveragingOperator> op,
               std::shared_ptr<const EmbeddedManifold> M, double delta_N);
  Value operator()(double x, double y) const;
  const std::vector<Region>& regions() const { return regions_; }

 private:
  std::vector<Region> regions_;
  std::shared_ptr<const AveragingOperator> op_;
  std::shared_ptr<const EmbeddedManifold> M_;
  double delta_N_;
  std::vector<BoxTrace> traces_;
};

struct Assembly {
  ExtensionConfig config;
  double delta_N = 0.0;
  double delta = 0.0;
  EnergyReport energy;
  LambdaChoice lambda;
  ScanResult scan;
  CountingCheck counting;
  std::vector<Region> regions;
  ExtensionField field;
  DistributionReport dist;
  double trace_error = 0.0;          // || U(., h_min) - u ||_L1 on the map window
  double averaged_trace_error = 0.0; // || V(., h_min) - u ||_L1
  int repairs = 0;
  std::vector<InvariantCheck> invariants;
  std::shared_ptr<const ExtensionMap> U;

  bool invariants_hold() const;
  nlohmann::json to_json() const;
};

// average -> lambda -> (tau, h) scan -> regions of bad cubes -> reprojection
// and homogeneous extension -> |DU| -> distribution. m = 1 only.
Assembly assemble(const SurfaceMap& u, std::shared_ptr<const EmbeddedManifold> M, const ExtensionConfig& config);

// Bad-cube regions grown until their boundary (floor excluded) is at distance
// below the classification cut.
std::vector<Region> grow_regions(const std::vector<Cube>& bad, const CubeFamily& family, const AveragedField& V,
                                 const EmbeddedManifold& M, double cut, double floor_height);

std::vector<InvariantCheck> check_invariants(const Assembly& a, const EmbeddedManifold& M);

struct EstimateSample {
  std::string name;
  double weak_norm = 0.0;
  double energy = 0.0;
  double gap = 0.0;
};

EstimateSample estimate_sample(const std::string& name, const Assembly& a);

struct EstimateFit {
  LambdaMode mode = LambdaMode::general;
  double A = 0.0;
  double B = 0.0;  // B (general) or B' (bounded)
  double reach = 0.0;
  // B reach^{m+1} (general) or B' (reach / 2KL)^{m+1} (bounded)
  double implied_C = 0.0;
};

struct EstimateVerification {
  std::string name;
  LambdaMode mode = LambdaMode::general;
  double lhs_weak_norm = 0.0;
  double energy = 0.0;
  std::optional<double> gap;
  double fitted_A = 0.0;
  double fitted_B = 0.0;
  double reach_used = 0.0;
  double rhs = 0.0;
  double slack = 0.0;
  bool holds = false;

  nlohmann::json to_json() const;
};

// weak_norm <= A exp(B x) energy with x = energy (general) or gap (bounded):
// B from a least-squares line in log form (clamped at 0), A the smallest value
// covering every calibration sample.
EstimateFit fit_estimate(const std::vector<EstimateSample>& calibration, LambdaMode mode, double reach, int m,
                         std::optional<double> K = std::nullopt, std::optional<double> L = std::nullopt);
EstimateVerification verify_estimate(const EstimateSample& s, const EstimateFit& fit);

void write_extension(const Assembly& a, const std::string& path);

}  // namespace singext
