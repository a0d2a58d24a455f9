#pragma once

#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "singext/geometry.hpp"
#include "singext/warp.hpp"

namespace singext {

enum class Tristate { yes, no, unknown };
const char* tristate_name(Tristate t);

// Declared properties that cannot be computed from samples.
struct GeometryFlags {
  Tristate bounded_geometry = Tristate::unknown;  // 1-bounded geometry
  Tristate group_growth_polynomial = Tristate::unknown;  // growth of pi_1 of a compact quotient
  bool compact = false;
  std::string bounded_geometry_source = "declared";

  static GeometryFlags from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

enum class MetricModel { euclidean, hyperbolic, flat_cylinder, warped_cylinder };
const char* model_name(MetricModel m);

// Two-dimensional model metric. Cylinders have circumference 2 pi radius;
// the warped cylinder is dt^2 + f(t)^2 dtheta^2 on [-window, window] x S^1.
struct SyntheticMetric {
  MetricModel model = MetricModel::euclidean;
  double radius = 1.0;
  WarpFunction warp;
  double window = 64.0;
  GeometryFlags flags;

  static SyntheticMetric from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  bool homogeneous() const { return model != MetricModel::warped_cylinder; }
};

// Closed-form ball volumes of the homogeneous models.
double model_ball_volume(const SyntheticMetric& g, double R);

// Ball volumes around (t0, 0) on the warped cylinder by Dijkstra on a
// 16-neighbour (t, theta) grid, one entry per radius.
struct WarpedGrid {
  int n_theta = 64;
  double dt = 0.125;
};
std::vector<double> warped_ball_volumes(const WarpFunction& f, double window, double t0, const std::vector<double>& radii,
                                        const WarpedGrid& grid = {});

enum class GrowthClass { polynomial, exponential, inconclusive };
const char* growth_class_name(GrowthClass c);

struct GrowthFit {
  std::string model;
  std::vector<double> radii;
  std::vector<double> base_points;                  // t0 of each base point
  std::vector<std::vector<double>> base_volumes;    // [base][radius]
  std::vector<double> volumes;                      // sup over base points
  int fitted_degree = 0;
  double fit_residual = 0.0;  // rms of the log-log fit over the tail
  GrowthClass classification = GrowthClass::inconclusive;
  std::size_t tail_begin = 0;
  double tail_slope = 0.0;  // log-log slope over the tail
  double slope_first = 0.0;  // first and second halves of the tail
  double slope_second = 0.0;
  double exp_rate = 0.0;  // slope of log vol against R over the tail
  double exp_r2 = 0.0;
  // Envelope c R^deg + c0, set when polynomial.
  double envelope_c = 0.0;
  double envelope_c0 = 0.0;

  double envelope(double R) const;
  // True if the envelope dominates every sample at every base point.
  bool envelope_dominates() const;
  nlohmann::json to_json() const;
};

constexpr double kSlopeStability = 0.2;

// base_points = 0 picks 3 for homogeneous models and 8 (one period of f) for
// warped cylinders.
GrowthFit growth_fit(const SyntheticMetric& g, const std::vector<double>& radii, int base_points = 0);
// Classifies precomputed volumes; base_volumes[b][i] belongs to radii[i].
GrowthFit classify_growth(const std::vector<double>& radii, std::vector<std::vector<double>> base_volumes);

struct WarpedAdmissibility {
  WarpFunction f;
  std::array<double, 2> window{0.0, 0.0};
  // Interval enclosures on the window.
  double a = 0.0;
  double b = 0.0;
  std::array<double, 3> derivative_bounds{0.0, 0.0, 0.0};  // sup |f^(k)|, k = 1..3
  // Enclosures over the whole line (infinite for exponential terms).
  double global_a = 0.0;
  double global_b = 0.0;
  std::array<double, 3> global_derivative_bounds{0.0, 0.0, 0.0};
  // Bounds on K = -f''/f and K' from the window enclosures.
  double curvature_bound = 0.0;
  double curvature_derivative_bound = 0.0;
  bool embeddable = false;  // sup |f'| < 1
  bool verdict = false;
  std::vector<std::string> violations;

  nlohmann::json to_json() const;
};

WarpedAdmissibility warped_admissible(const WarpFunction& f, std::array<double, 2> window);

struct TubedCondition {
  std::string name;
  Tristate status = Tristate::unknown;
  std::string detail;
};

struct TubedVerdict {
  Tristate verdict = Tristate::unknown;
  std::vector<TubedCondition> conditions;
  nlohmann::json to_json() const;
};

// yes: bounded geometry and polynomial growth; no: exponential growth (volume
// or fundamental group); unknown otherwise.
TubedVerdict tubed_verdict(const GrowthFit* growth, const GeometryFlags& flags);

// Flags implied by a synthetic metric: models by declaration, warped cylinders
// by admissibility on their window. Flags given in the input win.
GeometryFlags metric_flags(const SyntheticMetric& g, const std::optional<WarpedAdmissibility>& adm);

// Full verdict report for a synthetic metric or an embedded manifold spec.
nlohmann::json diagnose_spec(const nlohmann::json& spec, const std::vector<double>& radii,
                             const std::string& base_dir = ".");
std::vector<double> default_radii(const SyntheticMetric& g);

}  // namespace singext
