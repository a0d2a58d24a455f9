// Acceptance run: one PASS/FAIL line per criterion, exit 1 if any fails.
// Usage: singext_acceptance <path to the singext binary> [fixtures dir]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "singext/averaging.hpp"
#include "singext/conformal.hpp"
#include "singext/diagnostics.hpp"
#include "singext/energy.hpp"
#include "singext/error.hpp"
#include "singext/extension.hpp"
#include "singext/geometry.hpp"

using namespace singext;
namespace fs = std::filesystem;

namespace {

constexpr double kIdentityEnergy = 54.7287077108569;  // 8 pi^2 ln 2
constexpr double kBudgetSeconds = 60.0;

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
  void note(const std::string& s) { detail += (detail.empty() ? "" : "; ") + s; }
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string binary_path;
fs::path fixtures;

// Every assembly built here, for the layer-cake check.
std::vector<std::pair<std::string, DistributionReport>> assembled;

Point on_circle(double a) { return make_point({std::cos(a), std::sin(a)}); }

double smoothstep(double t) {
  t = std::clamp(t, 0.0, 1.0);
  return t * t * (3 - 2 * t);
}

const std::shared_ptr<const EmbeddedManifold> kCircle = std::make_shared<Circle>(1.0);

// Same sampling as assemble uses in bounded mode.
double circle_K() { return comparability_K(*kCircle, 1.0, ExtensionConfig{}.K_samples).K; }

Assembly assemble_logged(const std::string& name, const SurfaceMap& u, LambdaMode mode, int n) {
  ExtensionConfig c;
  c.slab = default_slab(u, n);
  c.mode = mode;
  Assembly a = assemble(u, kCircle, c);
  assembled.emplace_back(name + "@" + std::to_string(n), a.dist);
  return a;
}

Point random_direction(std::mt19937_64& rng, int dim) {
  std::normal_distribution<double> g(0.0, 1.0);
  Point v(dim);
  for (int i = 0; i < dim; ++i) v[i] = g(rng);
  return v / v.norm();
}

Outcome geometry_oracles() {
  Outcome o;
  const Circle c(1.0);
  const Sphere s(1.0);
  const Cylinder cyl(0.7, 2.0);
  const std::pair<const ChartManifold*, double> cases[] = {{&c, 1.0}, {&s, 1.0}, {&cyl, 0.7}};
  std::mt19937_64 rng(20240611);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (const auto& [m, exact] : cases) {
    // 142 samples give 142 * 141 / 2 > 10^4 pairs.
    const double r = federer_reach(*m, 142).value;
    o.require(std::abs(r - exact) <= 0.01 * exact, std::string(kind_name(m->kind())) + " reach " + fmt("%.6g", r));
    double worst = 0.0;
    for (const auto& b : m->samples(1000)) {
      const Point z = b.point + 0.95 * m->reach() * U(rng) * random_direction(rng, m->ambient_dim());
      const Point p = project(*m, z);
      worst = std::max(worst, (project(*m, p) - p).norm());
    }
    o.require(worst <= 1e-10, std::string(kind_name(m->kind())) + " idempotence " + fmt("%.3g", worst));
    o.note(std::string(kind_name(m->kind())) + " reach " + fmt("%.5f", r));
  }
  return o;
}

Outcome energy_oracle() {
  Outcome o;
  const SurfaceMap u = map_on_circle(1024, [](double t) { return on_circle(t); });
  const double e = gagliardo_energy(u, *kCircle).value;
  const double rel = std::abs(e - kIdentityEnergy) / kIdentityEnergy;
  o.require(rel <= 0.005, "relative error " + fmt("%.3g", rel));
  o.note("E = " + fmt("%.6f", e) + ", closed form " + fmt("%.6f", kIdentityEnergy));
  return o;
}

Outcome inequality_chains() {
  Outcome o;
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  const double K = circle_K();
  const double L = 1.0;
  const double slack = 1e-12;
  int violations = 0, checks = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const double a1 = 2 * U(rng), a2 = U(rng), p = 3 * U(rng), jump = 3 * U(rng), at = kPi * (1 + U(rng));
    SurfaceMap u = map_on_circle(1024, [&](double t) {
      return on_circle(a1 * std::sin(t + p) + a2 * std::sin(2 * t) + (t > at ? jump : 0.0));
    });
    u.L_bound = L;
    const double E = gagliardo_energy(u, *kCircle).value;
    for (const DeltaSums& s : delta_sums(u, *kCircle, {0.1, 0.4, 0.9, 1.6, 2.5})) {
      const double d2 = s.delta * s.delta;
      violations += s.gap > s.truncated / d2 * (1 + slack);
      violations += s.truncated > E * (1 + slack);
      violations += s.truncated > 4 * K * K * L * L * s.gap * (1 + slack);
      checks += 3;
    }
  }
  o.require(violations == 0, std::to_string(violations) + " violations");
  o.note(std::to_string(checks) + " inequalities, K = " + fmt("%.6f", K));
  return o;
}

Outcome extension_sanity() {
  Outcome o;
  const int n = 1024;
  const SurfaceMap constant = map_on_line(-1, 1, n, [](double) { return on_circle(1.0); }, on_circle(1.0));
  const Assembly a = assemble_logged("constant", constant, LambdaMode::general, n);
  double mu_max = 0.0;
  for (double m : a.dist.mu) mu_max = std::max(mu_max, m);
  o.require(a.scan.best.bad_count == 0, "constant map has bad cubes");
  o.require(a.dist.singular_count == 0, "constant map has singular points");
  o.require(mu_max == 0.0 && a.dist.weak_norm == 0.0, "constant map has mu > 0");

  // Image within angle 0.1 of a point: a cap well inside eta delta_N / 2 = 0.25.
  const SurfaceMap wiggle =
      map_on_line(-1, 1, n, [](double x) { return on_circle(0.1 * std::sin(kPi * x)); }, on_circle(0.0));
  const Assembly b = assemble_logged("small oscillation", wiggle, LambdaMode::general, n);
  o.require(b.scan.best.bad_count == 0, "small oscillation has bad cubes");
  const AveragedField V = average_extend(wiggle, build_mollifier(1), b.config.slab);
  double dev = 0.0;
  bool all_reprojected = V.values.size() == b.field.values.size();
  for (std::size_t i = 0; all_reprojected && i < V.values.size(); ++i) {
    all_reprojected = b.field.provenance[i] == Provenance::reprojected;
    dev = std::max(dev, (b.field.values[i] - project(*kCircle, V.values[i])).norm());
  }
  o.require(all_reprojected, "small oscillation has homogeneous nodes");
  o.require(dev <= 1e-12, "U differs from the projected average by " + fmt("%.3g", dev));
  o.note("max |U - Pi V| = " + fmt("%.3g", dev));
  return o;
}

SurfaceMap loop_map(int n) {
  const double w = 0.125;
  return map_on_line(-1.0, 1.0, n, [w](double x) { return on_circle(2 * kPi * smoothstep((x + w) / (2 * w))); },
                     on_circle(0.0));
}

Outcome topological_necessity() {
  Outcome o;
  std::vector<double> weak, dir;
  for (int n : {512, 1024, 2048}) {
    const Assembly a = assemble_logged("loop", loop_map(n), LambdaMode::general, n);
    o.require(a.dist.singular_count >= 1, "no singular point at mesh " + std::to_string(n));
    weak.push_back(a.dist.weak_norm);
    dir.push_back(a.dist.dirichlet);
  }
  const auto [lo, hi] = std::minmax_element(weak.begin(), weak.end());
  o.require(*hi <= 2 * *lo, "weak norm drifts by " + fmt("%.3g", *hi / *lo));
  for (std::size_t i = 1; i < dir.size(); ++i) {
    o.require(dir[i] >= 1.2 * dir[i - 1], "Dirichlet growth " + fmt("%.3g", dir[i] / dir[i - 1]));
  }
  o.note("weak " + fmt("%.2f", weak[0]) + "/" + fmt("%.2f", weak[1]) + "/" + fmt("%.2f", weak[2]) + ", Dirichlet " +
         fmt("%.1f", dir[0]) + "/" + fmt("%.1f", dir[1]) + "/" + fmt("%.1f", dir[2]));
  return o;
}

// Smooth bump of amplitude a and frequency k, continuous across the window edges.
SurfaceMap smooth_map(int n, double a, int k) {
  return map_on_line(-1, 1, n, [=](double x) {
    return on_circle(a * std::pow(std::sin(kPi * (x + 1) / 2), 2) * std::sin(k * kPi * x / 2 + 0.3));
  }, on_circle(0.0));
}

// Plateau of height s on |x| <= 1/2 with ramps of width r.
SurfaceMap step_map(int n, double s, double r) {
  return map_on_line(-1, 1, n, [=](double x) {
    return on_circle(s * (smoothstep((x + 0.5 + r / 2) / r) - smoothstep((x - 0.5 + r / 2) / r)));
  }, on_circle(0.0));
}

struct Family {
  std::string name;
  std::function<SurfaceMap(int)> make;
};

const std::vector<Family> kCalibration = {
    {"constant", [](int n) { return smooth_map(n, 0.0, 1); }},
    {"smooth 0.6/1", [](int n) { return smooth_map(n, 0.6, 1); }},
    {"smooth 1.2/2", [](int n) { return smooth_map(n, 1.2, 2); }},
    {"smooth 2.0/3", [](int n) { return smooth_map(n, 2.0, 3); }},
    {"step 1.0", [](int n) { return step_map(n, 1.0, 1.0 / 32); }},
    {"step 1.75", [](int n) { return step_map(n, 1.75, 1.0 / 32); }},
    {"step 2.5", [](int n) { return step_map(n, 2.5, 1.0 / 32); }},
};

// Parameters interleaved with the calibration ones.
const std::vector<Family> kValidation = {
    {"smooth 0.9/1", [](int n) { return smooth_map(n, 0.9, 1); }},
    {"smooth 1.6/2", [](int n) { return smooth_map(n, 1.6, 2); }},
    {"smooth 1.0/3", [](int n) { return smooth_map(n, 1.0, 3); }},
    {"step 1.5", [](int n) { return step_map(n, 1.5, 1.0 / 32); }},
    {"step 2.25", [](int n) { return step_map(n, 2.25, 1.0 / 32); }},
};

std::vector<EstimateSample> samples(const std::vector<Family>& fam, LambdaMode mode, int n) {
  std::vector<EstimateSample> out;
  for (const Family& f : fam) {
    SurfaceMap u = f.make(n);
    u.L_bound = 1.0;
    out.push_back(estimate_sample(f.name, assemble_logged(f.name, u, mode, n)));
  }
  return out;
}

Outcome estimate_shape() {
  Outcome o;
  for (LambdaMode mode : {LambdaMode::general, LambdaMode::bounded_map}) {
    const std::string tag = mode_name(mode);
    std::vector<EstimateFit> fits;
    for (int n : {1024, 2048}) {
      const EstimateFit fit = fit_estimate(samples(kCalibration, mode, n), mode, kCircle->reach(), 1,
                                           circle_K(), 1.0);
      fits.push_back(fit);
      double worst = kInf;
      for (const EstimateSample& s : samples(kValidation, mode, n)) {
        const EstimateVerification v = verify_estimate(s, fit);
        worst = std::min(worst, v.slack);
        o.require(v.holds, tag + " " + std::to_string(n) + " " + s.name + " slack " + fmt("%.4g", v.slack));
      }
      o.note(tag + " " + std::to_string(n) + ": A " + fmt("%.4g", fit.A) + ", B " + fmt("%.4g", fit.B) +
             ", min slack " + fmt("%.4g", worst));
    }
    auto stable = [](double a, double b) { return a == b || (a > 0 && b > 0 && std::max(a / b, b / a) <= 2.0); };
    o.require(stable(fits[0].A, fits[1].A), tag + " A unstable");
    o.require(stable(fits[0].B, fits[1].B), tag + " B unstable");
  }
  return o;
}

Outcome conformal_oracles() {
  Outcome o;
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> X(-5, 5), Y(0.01, 10);
  double worst = 0.0;
  for (int dim : {2, 3}) {
    const MobiusTransport T{dim, TransportDirection::half_space_to_ball};
    for (int i = 0; i < 1000; ++i) {
      Point z(dim);
      for (int a = 0; a + 1 < dim; ++a) z[a] = X(rng);
      z[dim - 1] = Y(rng);
      worst = std::max(worst, (T.inverse().apply(T.apply(z)) - z).norm() / std::max(1.0, z.norm()));
    }
  }
  // Boundary maps: circle map constant near the pole, there and back.
  const SurfaceMap v = map_on_circle(1024, [](double th) {
    const double s = std::clamp((wrap_angle(th - 0.5 * kPi) - 0.3) / (2 * kPi - 0.6), 0.0, 1.0);
    return on_circle(2 * kPi * smoothstep(s) + 0.4 * 16 * s * s * (1 - s) * (1 - s) * std::sin(3 * kPi * s));
  });
  const SurfaceMap line = transport_map(v, TransportDirection::ball_to_half_space);
  const SurfaceMap back = transport_map(line, TransportDirection::half_space_to_ball);
  o.require(back.size() == v.size(), "boundary roundtrip changes the node count");
  for (std::size_t i = 0; i < std::min(v.size(), back.size()); ++i) {
    worst = std::max(worst, (back.values[i] - v.values[i]).norm());
  }
  o.require(worst <= 1e-12, "roundtrip error " + fmt("%.3g", worst));
  const double Es = gagliardo_energy(v, *kCircle).value, Ep = gagliardo_energy(line, *kCircle).value;
  o.require(std::abs(Ep - Es) <= 0.01 * Es, "energy changes by " + fmt("%.3g", std::abs(Ep - Es) / Es));
  const BallGrid g{2, 1024};
  const double area = hyperbolic_measure(g, ball_region(g, std::tanh(0.5)));
  const double exact = 4 * kPi * std::pow(std::sinh(0.5), 2);
  o.require(std::abs(area - exact) <= 0.01 * exact, "disk area " + fmt("%.6g", area));
  o.note("roundtrip " + fmt("%.3g", worst) + ", energy " + fmt("%.4f", Es) + " -> " + fmt("%.4f", Ep) + ", area " +
         fmt("%.5f", area) + " vs " + fmt("%.5f", exact));
  return o;
}

std::vector<double> linspace(double rmax, std::size_t n) {
  std::vector<double> r(n);
  for (std::size_t i = 0; i < n; ++i) r[i] = rmax * static_cast<double>(i + 1) / static_cast<double>(n);
  return r;
}

nlohmann::json load_json(const fs::path& p) {
  std::ifstream in(p);
  return nlohmann::json::parse(in);
}

Outcome diagnostics() {
  Outcome o;
  SyntheticMetric g;
  g.model = MetricModel::flat_cylinder;
  const GrowthFit cyl = growth_fit(g, linspace(50.0, 40));
  o.require(cyl.classification == GrowthClass::polynomial && cyl.fitted_degree == 1,
            "flat cylinder " + std::string(growth_class_name(cyl.classification)) + " degree " +
                std::to_string(cyl.fitted_degree));
  g.model = MetricModel::euclidean;
  const GrowthFit euc = growth_fit(g, linspace(50.0, 40));
  o.require(euc.classification == GrowthClass::polynomial && euc.fitted_degree == 2, "plane not degree 2");
  o.require(std::abs(euc.envelope_c - kPi) <= 1e-12 * kPi && euc.envelope_c0 <= 1e-12,
            "plane envelope " + fmt("%.17g", euc.envelope_c));
  g.model = MetricModel::hyperbolic;
  const GrowthFit hyp = growth_fit(g, linspace(20.0, 20));
  o.require(hyp.classification == GrowthClass::exponential, "hyperbolic plane not exponential");

  WarpedAdmissibility adm;
  for (const auto& [name, key] : {std::pair{"warped_cylinder.json", "yes"}, {"hyperbolic.json", "no"},
                                  {"point_cloud.json", "unknown"}}) {
    const nlohmann::json r = diagnose_spec(load_json(fixtures / name), {}, fixtures.string());
    const std::string v = r["verdict"]["admits_tubed_embedding_by_criterion"];
    o.require(v == key, std::string(name) + " verdict " + v);
  }
  const nlohmann::json spec = load_json(fixtures / "warped_cylinder.json");
  const WarpFunction f = WarpFunction::from_json(spec["parameters"]["warp"]);
  const double window = spec["truncation_window"].get<double>();
  adm = warped_admissible(f, {-window, window});
  o.require(adm.verdict, "warp 2 + sin(t)/4 not admissible");
  o.require(std::abs(adm.a - 1.75) <= 1e-12 && std::abs(adm.b - 2.25) <= 1e-12, "warp enclosure");
  for (double d : adm.derivative_bounds) o.require(std::abs(d - 0.25) <= 1e-12, "warp derivative bound");
  o.note("cylinder degree " + std::to_string(cyl.fitted_degree) + ", plane c " + fmt("%.15f", euc.envelope_c) +
         ", warp a " + fmt("%.4g", adm.a) + " b " + fmt("%.4g", adm.b) + " |K| <= " + fmt("%.4g", adm.curvature_bound));
  return o;
}

Outcome layer_cake() {
  Outcome o;
  double worst = 0.0;
  for (const auto& [name, d] : assembled) {
    const double rel = d.w11_norm > 0 ? std::abs(d.layer_cake - d.w11_norm) / d.w11_norm : std::abs(d.layer_cake);
    worst = std::max(worst, rel);
    o.require(rel <= 0.01, name + " off by " + fmt("%.3g", rel));
  }
  o.note(std::to_string(assembled.size()) + " assemblies, worst " + fmt("%.3g", worst));
  return o;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism() {
  Outcome o;
  const fs::path root = fs::temp_directory_path() / "singext_acceptance";
  fs::remove_all(root);
  const std::string map = (fixtures / "loop_line.csv").string();
  const std::vector<std::pair<std::string, std::vector<std::string>>> runs = {
      {"extend --map " + map, {"distribution.json", "distribution.csv", "estimate.json", "extension.f64",
                               "extension.f64.json"}},
      {"energy --map " + map, {"energy.json"}},
      {"diagnose --spec " + (fixtures / "warped_cylinder.json").string(), {"diagnose.json"}},
  };
  int compared = 0;
  for (std::size_t k = 0; k < runs.size(); ++k) {
    for (int rep = 0; rep < 2; ++rep) {
      const fs::path dir = root / (std::to_string(k) + "_" + std::to_string(rep));
      const std::string cmd = "\"" + binary_path + "\" " + runs[k].first + " --deterministic --out \"" +
                              dir.string() + "\" > /dev/null 2>&1";
      o.require(std::system(cmd.c_str()) == 0, "command failed: " + runs[k].first);
    }
    for (const std::string& f : runs[k].second) {
      const fs::path a = root / (std::to_string(k) + "_0") / f, b = root / (std::to_string(k) + "_1") / f;
      o.require(fs::exists(a) && slurp(a) == slurp(b), f + " differs");
      ++compared;
    }
  }
  o.note(std::to_string(compared) + " files compared");
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: %s <singext binary> [fixtures dir]\n", argv[0]);
    return 2;
  }
  binary_path = argv[1];
  fixtures = argc > 2 ? fs::path(argv[2]) : fs::path(SINGEXT_FIXTURES);
  const std::vector<std::pair<const char*, Outcome (*)()>> criteria = {
      {"geometry oracles", geometry_oracles},
      {"energy oracle", energy_oracle},
      {"inequality chains", inequality_chains},
      {"extension sanity", extension_sanity},
      {"topological necessity", topological_necessity},
      {"estimate shape", estimate_shape},
      {"conformal and hyperbolic oracles", conformal_oracles},
      {"diagnostics", diagnostics},
      {"layer-cake consistency", layer_cake},
      {"determinism", determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    o.require(dt <= kBudgetSeconds, "over the " + fmt("%.0f", kBudgetSeconds) + " s budget");
    failed += !o.pass;
    std::printf("%2zu %s %s (%s; %.1f s)\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first, o.detail.c_str(), dt);
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
