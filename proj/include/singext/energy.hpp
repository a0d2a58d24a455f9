#pragma once

#include <array>
#include <vector>

#include "singext/geometry.hpp"
#include "singext/surface_map.hpp"

namespace singext {

// Critical Gagliardo energy sum over mesh pairs of w_i w_j d(u_i,u_j)^{m+1} / |x_i - x_j|^{2m},
// plus a Richardson-extrapolated diagonal cell term and, for plane domains,
// the analytic (inside x outside) tail contribution.
struct GagliardoResult {
  double value = 0.0;
  double error_estimate = 0.0;
  bool divergent = false;
  // Values on the mesh coarsened 0, 1 and 2 times.
  std::array<double, 3> levels{0.0, 0.0, 0.0};
  double diagonal = 0.0;
  double tail = 0.0;
};

struct EnergyReport {
  double gagliardo = 0.0;
  double truncated = 0.0;
  double gap_potential = 0.0;
  double delta = 0.0;
  double quadrature_error_estimate = 0.0;
  bool divergent = false;
  std::array<double, 3> levels{0.0, 0.0, 0.0};
};

struct DeltaSums {
  double delta = 0.0;
  double truncated = 0.0;
  double gap = 0.0;
};

GagliardoResult gagliardo_energy(const SurfaceMap& u, const EmbeddedManifold& M);
double truncated_energy(const SurfaceMap& u, const EmbeddedManifold& M, double delta);
double gap_potential(const SurfaceMap& u, const EmbeddedManifold& M, double delta);
// Truncated energies and gap potentials for several thresholds in one pass.
std::vector<DeltaSums> delta_sums(const SurfaceMap& u, const EmbeddedManifold& M, const std::vector<double>& deltas);
EnergyReport energy_report(const SurfaceMap& u, const EmbeddedManifold& M, double delta);

// delta^{-(m+1)} * sum over pairs with d >= delta of (d - eta delta)_+^{m+1} / |x - y|^{2m}.
double counting_rhs(const SurfaceMap& u, const EmbeddedManifold& M, double delta, double eta);

// Integral of |x - y|^{-2m} over y outside the tail window, for x inside it.
double tail_kernel_integral(const Tail& t, int m, const Point& x);

// Symmetric pair kernel d^{m+1} / |x - y|^{2m} used by all sums.
double pair_kernel(double value_distance, double domain_distance, int m);

}  // namespace singext
