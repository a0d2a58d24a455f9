#pragma once

#include <array>
#include <optional>
#include <vector>

#include "singext/averaging.hpp"
#include "singext/energy.hpp"

namespace singext {

// Cubes tau lambda^{-k} ([0,1]^{m+1} + (j, 1/(lambda-1)) + (h, 0)). Generation k
// fills the horizontal layer [e_k/(lambda-1), e_k lambda/(lambda-1)], e_k =
// tau lambda^{-k}, so consecutive generations stack without gaps.
struct CubeFamily {
  int m = 1;
  double lambda = 2.0;
  double tau = 1.5;
  int k_lo = 0, k_hi = 0;
  std::array<double, 2> h{0.0, 0.0};

  double edge(int k) const;
  double vertical_offset(int k) const { return edge(k) / (lambda - 1.0); }
  double layer_bottom(int k) const { return vertical_offset(k); }
  double layer_top(int k) const { return vertical_offset(k) * lambda; }
  // Generation whose layer contains height y > 0.
  int generation_at(double y) const;
  // Generations whose layers meet [h_min, h_max].
  static CubeFamily covering(int m, double lambda, double tau, std::array<double, 2> h, double h_min, double h_max);
};

struct Cube {
  int k = 0;
  std::array<long, 2> j{0, 0};
  double edge = 0.0;
  std::array<double, 3> lo{0.0, 0.0, 0.0};  // horizontal axes first, height last

  double hi(int axis) const { return lo[axis] + edge; }
};

Cube cube_at(const CubeFamily& f, int k, std::array<long, 2> j);
// The cube of the family containing a slab point (x' horizontal, y height).
Cube cube_containing(const CubeFamily& f, const Point& x, double y);

// Cubes of generations k_lo..k_hi meeting the slab (EmptyRange if none).
std::vector<Cube> enumerate_cubes(const CubeFamily& f, const SlabSpec& slab);

struct CubeOptions {
  double safety = 0.9;
  int min_intervals = 2;
  int max_intervals = 16;
};

struct CubeClassification {
  CubeFamily family;
  std::vector<Cube> cubes;
  std::vector<double> sup_dist;
  std::vector<std::uint8_t> bad;
  int bad_count = 0;
  double threshold = 0.0;  // delta_N / 2
  double safety = 0.9;
};

// Bad iff the sampled sup over the cube boundary of dist(V, N) reaches
// safety * delta_N / 2. Boundary edges get between min and max intervals (by
// grid spacing) plus one bisection level.
CubeClassification classify(const CubeFamily& f, const AveragedField& V, const EmbeddedManifold& M, double delta_N,
                            const CubeOptions& opt = {});

struct ScanOptions {
  int n_tau = 8;
  int n_h = 8;
  CubeOptions cube;
};

struct ScanResult {
  double lambda = 2.0;
  std::vector<double> taus;
  std::vector<std::array<double, 2>> offsets;
  // bad_counts[i * offsets.size() + j] for taus[i], offsets[j]
  std::vector<int> bad_counts;
  std::size_t chosen = 0;
  double counting_integral = 0.0;
  CubeClassification best;

  nlohmann::json to_json() const;
};

// Classifies on a (tau, h) sample grid, reports the discretized counting
// integral and keeps the first sample with the fewest bad cubes.
ScanResult scan_tau_h(double lambda, const AveragedField& V, const EmbeddedManifold& M, double delta_N,
                      const ScanOptions& opt = {});

struct CountingCheck {
  double lhs = 0.0;
  double rhs = 0.0;  // without the constant C
  double ratio = 0.0;
};

CountingCheck counting_bound_check(const ScanResult& scan, const SurfaceMap& u, const EmbeddedManifold& M,
                                   double delta_N, double eta);

enum class LambdaMode { bounded_map, general };
const char* mode_name(LambdaMode mode);
LambdaMode parse_mode(const std::string& name);

struct LambdaChoice {
  double lambda = 2.0;
  LambdaMode mode = LambdaMode::general;
  double exponent_input = 0.0;  // gap potential (bounded) or Gagliardo energy (general)
  double c1 = 0.01;
  std::optional<double> K;
  std::optional<double> L;

  nlohmann::json to_json() const;
};

// bounded: 1 + exp(2 C1 (2KL)^{m+1} gap); general: 1 + exp(2 C1 E); clamped to >= 2.
LambdaChoice lambda_from_input(LambdaMode mode, double input, int m, double c1, std::optional<double> K,
                               std::optional<double> L);
LambdaChoice select_lambda(LambdaMode mode, const SurfaceMap& u, const EmbeddedManifold& M, double delta,
                           std::optional<double> K, double c1);

}  // namespace singext
