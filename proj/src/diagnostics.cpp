#include "singext/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

#include "singext/error.hpp"
#include "singext/parallel.hpp"
#include "singext/types.hpp"

namespace singext {

namespace {

nlohmann::json num(double x) {
  if (std::isfinite(x)) return x;
  if (std::isnan(x)) return "nan";
  return x > 0 ? "inf" : "-inf";
}

Tristate parse_tristate(const nlohmann::json& j) {
  if (j.is_boolean()) return j.get<bool>() ? Tristate::yes : Tristate::no;
  const std::string s = j.get<std::string>();
  if (s == "yes" || s == "true" || s == "polynomial") return Tristate::yes;
  if (s == "no" || s == "false" || s == "exponential") return Tristate::no;
  if (s == "unknown") return Tristate::unknown;
  fail(ErrorCode::InvalidInput, "cannot read '" + s + "' as yes/no/unknown");
}

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double rms = 0.0;
  double r2 = 0.0;
};

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y, std::size_t lo, std::size_t hi) {
  const double n = static_cast<double>(hi - lo);
  double mx = 0.0, my = 0.0;
  for (std::size_t i = lo; i < hi; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = lo; i < hi; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ss = 0.0;
  for (std::size_t i = lo; i < hi; ++i) {
    const double r = y[i] - f.intercept - f.slope * x[i];
    ss += r * r;
  }
  f.rms = std::sqrt(ss / n);
  f.r2 = syy > 0.0 ? 1.0 - ss / syy : 1.0;
  return f;
}

// Area of {|theta| <= pi r, theta^2 + t^2 <= R^2}: the unrolled ball on a
// cylinder of circumference 2 pi r.
double flat_cylinder_volume(double r, double R) {
  const double h = kPi * r;
  if (R <= h) return kPi * R * R;
  return 2.0 * (h * std::sqrt(R * R - h * h) + R * R * std::asin(h / R));
}

double warp_period(const WarpFunction& f) {
  double freq = 0.0;
  for (const auto& t : f.terms()) {
    if (t.type == WarpTerm::Type::sine && t.frequency != 0.0) {
      const double w = std::abs(t.frequency);
      freq = freq == 0.0 ? w : std::min(freq, w);
    }
  }
  return freq > 0.0 ? 2.0 * kPi / freq : 2.0 * kPi;
}

}  // namespace

const char* tristate_name(Tristate t) {
  switch (t) {
    case Tristate::yes: return "yes";
    case Tristate::no: return "no";
    case Tristate::unknown: return "unknown";
  }
  return "unknown";
}

GeometryFlags GeometryFlags::from_json(const nlohmann::json& j) {
  GeometryFlags f;
  if (!j.is_object()) fail(ErrorCode::InvalidInput, "metadata must be an object");
  if (j.contains("bounded_geometry")) f.bounded_geometry = parse_tristate(j["bounded_geometry"]);
  if (j.contains("group_growth")) f.group_growth_polynomial = parse_tristate(j["group_growth"]);
  try {
    f.compact = j.value("compact", false);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::InvalidInput, std::string("malformed metadata: ") + e.what());
  }
  return f;
}

nlohmann::json GeometryFlags::to_json() const {
  const char* gg = group_growth_polynomial == Tristate::yes  ? "polynomial"
                   : group_growth_polynomial == Tristate::no ? "exponential"
                                                             : "unknown";
  return {{"bounded_geometry", tristate_name(bounded_geometry)},
          {"bounded_geometry_source", bounded_geometry_source},
          {"group_growth", gg},
          {"compact", compact}};
}

const char* model_name(MetricModel m) {
  switch (m) {
    case MetricModel::euclidean: return "euclidean";
    case MetricModel::hyperbolic: return "hyperbolic";
    case MetricModel::flat_cylinder: return "flat_cylinder";
    case MetricModel::warped_cylinder: return "warped_cylinder";
  }
  return "?";
}

SyntheticMetric SyntheticMetric::from_json(const nlohmann::json& j) {
  try {
    SyntheticMetric g;
    const std::string m = j.at("model").get<std::string>();
    if (m == "euclidean") {
      g.model = MetricModel::euclidean;
    } else if (m == "hyperbolic") {
      g.model = MetricModel::hyperbolic;
    } else if (m == "flat_cylinder") {
      g.model = MetricModel::flat_cylinder;
    } else if (m == "warped_cylinder") {
      g.model = MetricModel::warped_cylinder;
      g.warp = WarpFunction::from_json(j.at("warp"));
    } else {
      fail(ErrorCode::InvalidInput, "unknown metric model '" + m + "'");
    }
    g.radius = j.value("radius", 1.0);
    g.window = j.value("window", 64.0);
    if (!(g.radius > 0.0) || !(g.window > 0.0)) fail(ErrorCode::InvalidInput, "radius and window must be positive");
    if (j.contains("metadata")) g.flags = GeometryFlags::from_json(j["metadata"]);
    return g;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::InvalidInput, std::string("malformed metric spec: ") + e.what());
  }
}

nlohmann::json SyntheticMetric::to_json() const {
  nlohmann::json j = {{"model", model_name(model)}, {"radius", radius}, {"window", window},
                      {"metadata", flags.to_json()}};
  if (model == MetricModel::warped_cylinder) j["warp"] = warp.to_json();
  return j;
}

double model_ball_volume(const SyntheticMetric& g, double R) {
  switch (g.model) {
    case MetricModel::euclidean: return kPi * R * R;
    case MetricModel::hyperbolic: {
      const double s = std::sinh(R / 2);
      return 4.0 * kPi * s * s;
    }
    case MetricModel::flat_cylinder: return flat_cylinder_volume(g.radius, R);
    case MetricModel::warped_cylinder: break;
  }
  fail(ErrorCode::Unsupported, "warped cylinder volumes have no closed form");
}

std::vector<double> warped_ball_volumes(const WarpFunction& f, double window, double t0,
                                        const std::vector<double>& radii, const WarpedGrid& grid) {
  if (radii.empty()) return {};
  if (grid.n_theta < 8 || !(grid.dt > 0.0)) fail(ErrorCode::InvalidInput, "warped grid too coarse");
  const double Rmax = *std::max_element(radii.begin(), radii.end());
  if (std::abs(t0) + Rmax >= window) fail(ErrorCode::InvalidInput, "ball of radius " + std::to_string(Rmax) + " leaves the window");
  const std::size_t nt = static_cast<std::size_t>(std::floor(2.0 * window / grid.dt)) + 1;
  const std::size_t nth = static_cast<std::size_t>(grid.n_theta);
  const double dth = 2.0 * kPi / grid.n_theta;
  std::vector<double> fh(2 * nt);  // f at half steps
  for (std::size_t m = 0; m < fh.size(); ++m) fh[m] = f(-window + 0.5 * grid.dt * static_cast<double>(m));
  for (double v : fh) {
    if (!(v > 0.0) || !std::isfinite(v)) fail(ErrorCode::InvalidInput, "warp function must be positive on the window");
  }

  static constexpr int kOff[16][2] = {{1, 0}, {-1, 0}, {0, 1},  {0, -1}, {1, 1},  {1, -1}, {-1, 1}, {-1, -1},
                                      {1, 2}, {1, -2}, {-1, 2}, {-1, -2}, {2, 1}, {2, -1}, {-2, 1}, {-2, -1}};
  const auto src_j = static_cast<std::size_t>(std::lround((t0 + window) / grid.dt));
  std::vector<double> d(nt * nth, kInf);
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  d[src_j * nth] = 0.0;
  pq.push({0.0, src_j * nth});
  while (!pq.empty()) {
    const auto [dist, node] = pq.top();
    pq.pop();
    if (dist > d[node] || dist > Rmax) continue;
    const std::size_t j = node / nth, k = node % nth;
    for (const auto& o : kOff) {
      const long jj = static_cast<long>(j) + o[0];
      if (jj < 0 || jj >= static_cast<long>(nt)) continue;
      const std::size_t kk = (k + nth + static_cast<std::size_t>(o[1] + static_cast<int>(nth))) % nth;
      const double fm = fh[2 * j + static_cast<std::size_t>(o[0] + 2) - 2];
      const double a = o[0] * grid.dt, b = o[1] * dth * fm;
      const double nd = dist + std::sqrt(a * a + b * b);
      const std::size_t nn = static_cast<std::size_t>(jj) * nth + kk;
      if (nd < d[nn]) {
        d[nn] = nd;
        pq.push({nd, nn});
      }
    }
  }
  std::vector<std::pair<double, double>> reached;  // (distance, cell area)
  for (std::size_t j = 0; j < nt; ++j) {
    for (std::size_t k = 0; k < nth; ++k) {
      const double dist = d[j * nth + k];
      if (dist > Rmax) continue;
      if (j == 0 || j + 1 == nt) fail(ErrorCode::InvalidInput, "ball reaches the window edge");
      reached.push_back({dist, fh[2 * j] * grid.dt * dth});
    }
  }
  std::sort(reached.begin(), reached.end());
  std::vector<double> out(radii.size(), 0.0);
  std::vector<std::size_t> order(radii.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return radii[x] < radii[y]; });
  double acc = 0.0;
  std::size_t p = 0;
  for (std::size_t i : order) {
    while (p < reached.size() && reached[p].first <= radii[i]) acc += reached[p++].second;
    out[i] = acc;
  }
  return out;
}

const char* growth_class_name(GrowthClass c) {
  switch (c) {
    case GrowthClass::polynomial: return "polynomial";
    case GrowthClass::exponential: return "exponential";
    case GrowthClass::inconclusive: return "inconclusive";
  }
  return "?";
}

double GrowthFit::envelope(double R) const { return envelope_c * std::pow(R, fitted_degree) + envelope_c0; }

bool GrowthFit::envelope_dominates() const {
  if (classification != GrowthClass::polynomial) return false;
  for (const auto& vb : base_volumes) {
    for (std::size_t i = 0; i < radii.size(); ++i) {
      if (envelope(radii[i]) < vb[i]) return false;
    }
  }
  return true;
}

nlohmann::json GrowthFit::to_json() const {
  nlohmann::json j = {{"model", model},
                      {"radii", radii},
                      {"base_points", base_points},
                      {"base_volumes", base_volumes},
                      {"volumes", volumes},
                      {"fitted_degree", fitted_degree},
                      {"fit_residual", fit_residual},
                      {"classification", growth_class_name(classification)},
                      {"tail_begin", tail_begin},
                      {"tail_slope", tail_slope},
                      {"slope_first", slope_first},
                      {"slope_second", slope_second},
                      {"exp_rate", exp_rate},
                      {"exp_r2", exp_r2}};
  if (classification == GrowthClass::polynomial) {
    j["envelope"] = {{"c", envelope_c}, {"c0", envelope_c0}, {"degree", fitted_degree},
                     {"dominates", envelope_dominates()}};
  }
  return j;
}

GrowthFit classify_growth(const std::vector<double>& radii, std::vector<std::vector<double>> base_volumes) {
  const std::size_t n = radii.size();
  if (base_volumes.empty()) fail(ErrorCode::InvalidInput, "growth fit needs at least one base point");
  for (std::size_t i = 0; i < n; ++i) {
    if (!(radii[i] > 0.0) || (i > 0 && !(radii[i] > radii[i - 1]))) {
      fail(ErrorCode::InvalidInput, "radii must be positive and increasing");
    }
  }
  for (const auto& vb : base_volumes) {
    if (vb.size() != n) fail(ErrorCode::InvalidInput, "one volume per radius required");
    for (std::size_t i = 0; i < n; ++i) {
      if (!(vb[i] > 0.0) || !std::isfinite(vb[i])) fail(ErrorCode::InvalidInput, "volumes must be positive and finite");
      if (i > 0 && vb[i] < vb[i - 1]) fail(ErrorCode::InvalidInput, "volumes must be nondecreasing in the radius");
    }
  }
  GrowthFit g;
  g.radii = radii;
  g.tail_begin = n / 2;
  if (n - g.tail_begin < 4) {
    fail(ErrorCode::InsufficientRadii, std::to_string(n - g.tail_begin) + " tail samples, need 4");
  }
  g.volumes.assign(n, 0.0);
  for (const auto& vb : base_volumes) {
    for (std::size_t i = 0; i < n; ++i) g.volumes[i] = std::max(g.volumes[i], vb[i]);
  }
  g.base_volumes = std::move(base_volumes);

  std::vector<double> lr(n), lv(n);
  for (std::size_t i = 0; i < n; ++i) {
    lr[i] = std::log(radii[i]);
    lv[i] = std::log(g.volumes[i]);
  }
  const std::size_t tb = g.tail_begin, mid = tb + (n - tb) / 2;
  const LineFit loglog = fit_line(lr, lv, tb, n);
  g.tail_slope = loglog.slope;
  g.fit_residual = loglog.rms;
  g.slope_first = fit_line(lr, lv, tb, mid).slope;
  g.slope_second = fit_line(lr, lv, mid, n).slope;
  const LineFit semilog = fit_line(radii, lv, tb, n);
  g.exp_rate = semilog.slope;
  g.exp_r2 = semilog.r2;

  const double drift = g.slope_second - g.slope_first;
  if (std::abs(drift) <= kSlopeStability) {
    g.classification = GrowthClass::polynomial;
  } else if (drift > kSlopeStability && g.exp_rate > 0.0 && g.exp_r2 >= 0.99) {
    g.classification = GrowthClass::exponential;
  }
  if (g.classification != GrowthClass::polynomial) return g;

  g.fitted_degree = std::max(0, static_cast<int>(std::lround(g.tail_slope)));
  const double deg = g.fitted_degree;
  double c = 0.0;
  for (const auto& vb : g.base_volumes) {
    for (std::size_t i = tb; i < n; ++i) c = std::max(c, vb[i] / std::pow(radii[i], deg));
  }
  double c0 = 0.0;
  for (const auto& vb : g.base_volumes) {
    for (std::size_t i = 0; i < n; ++i) c0 = std::max(c0, vb[i] - c * std::pow(radii[i], deg));
  }
  g.envelope_c = c;
  g.envelope_c0 = c0;
  // Rounding in c R^deg can leave a sample an ulp above the envelope.
  while (!g.envelope_dominates()) {
    g.envelope_c0 = g.envelope_c0 > 0.0 ? std::nextafter(g.envelope_c0 * (1 + 1e-15), kInf) : 1e-300;
  }
  return g;
}

GrowthFit growth_fit(const SyntheticMetric& g, const std::vector<double>& radii, int base_points) {
  if (base_points <= 0) base_points = g.homogeneous() ? 3 : 8;
  if (base_points < 3) fail(ErrorCode::InvalidInput, "uniform growth needs at least 3 base points");
  const double period = g.model == MetricModel::warped_cylinder ? warp_period(g.warp) : 1.0;
  std::vector<double> t0(static_cast<std::size_t>(base_points));
  for (std::size_t b = 0; b < t0.size(); ++b) t0[b] = period * static_cast<double>(b) / base_points;
  std::vector<std::vector<double>> vols(t0.size());
  if (g.homogeneous()) {
    for (auto& v : vols) {
      v.resize(radii.size());
      for (std::size_t i = 0; i < radii.size(); ++i) v[i] = model_ball_volume(g, radii[i]);
    }
  } else {
    for_blocks(t0.size(), 1, [&](std::size_t b, std::size_t, std::size_t) {
      vols[b] = warped_ball_volumes(g.warp, g.window, t0[b], radii);
    });
  }
  GrowthFit fit = classify_growth(radii, std::move(vols));
  fit.model = model_name(g.model);
  fit.base_points = t0;
  return fit;
}

nlohmann::json WarpedAdmissibility::to_json() const {
  nlohmann::json db = nlohmann::json::array(), gdb = nlohmann::json::array();
  for (int k = 0; k < 3; ++k) {
    db.push_back(num(derivative_bounds[k]));
    gdb.push_back(num(global_derivative_bounds[k]));
  }
  return {{"warp", f.to_json()},
          {"window", {window[0], window[1]}},
          {"a", num(a)},
          {"b", num(b)},
          {"derivative_bounds", db},
          {"global_a", num(global_a)},
          {"global_b", num(global_b)},
          {"global_derivative_bounds", gdb},
          {"curvature_bound", num(curvature_bound)},
          {"curvature_derivative_bound", num(curvature_derivative_bound)},
          {"embeddable", embeddable},
          {"verdict", verdict},
          {"violations", violations}};
}

WarpedAdmissibility warped_admissible(const WarpFunction& f, std::array<double, 2> window) {
  if (!(window[1] > window[0])) fail(ErrorCode::InvalidInput, "empty window");
  WarpedAdmissibility w;
  w.f = f;
  w.window = window;
  const Interval r0 = f.range(0, window[0], window[1]);
  const Interval g0 = f.global_range(0);
  w.a = r0.lo;
  w.b = r0.hi;
  w.global_a = g0.lo;
  w.global_b = g0.hi;
  for (int k = 1; k <= 3; ++k) {
    const Interval r = f.range(k, window[0], window[1]);
    const Interval g = f.global_range(k);
    w.derivative_bounds[k - 1] = std::max(std::abs(r.lo), std::abs(r.hi));
    w.global_derivative_bounds[k - 1] = std::max(std::abs(g.lo), std::abs(g.hi));
  }
  if (!(w.a > 0.0) || !(w.global_a > 0.0)) w.violations.push_back("a");
  if (!std::isfinite(w.b) || !std::isfinite(w.global_b)) w.violations.push_back("b");
  for (int k = 0; k < 3; ++k) {
    if (!std::isfinite(w.derivative_bounds[k]) || !std::isfinite(w.global_derivative_bounds[k])) {
      w.violations.push_back("derivative_" + std::to_string(k + 1));
    }
  }
  w.verdict = w.violations.empty();
  const auto& D = w.derivative_bounds;
  if (w.a > 0.0) {
    w.curvature_bound = D[1] / w.a;
    w.curvature_derivative_bound = (D[2] * w.b + D[1] * D[0]) / (w.a * w.a);
  } else {
    w.curvature_bound = kInf;
    w.curvature_derivative_bound = kInf;
  }
  w.embeddable = w.global_derivative_bounds[0] < 1.0;
  return w;
}

nlohmann::json TubedVerdict::to_json() const {
  nlohmann::json conds = nlohmann::json::array();
  for (const auto& c : conditions) conds.push_back({{"name", c.name}, {"status", tristate_name(c.status)}, {"detail", c.detail}});
  return {{"admits_tubed_embedding_by_criterion", tristate_name(verdict)}, {"conditions", conds}};
}

TubedVerdict tubed_verdict(const GrowthFit* growth, const GeometryFlags& flags) {
  TubedCondition bg{"bounded_geometry", flags.bounded_geometry, flags.bounded_geometry_source};
  if (flags.compact) bg = {"bounded_geometry", Tristate::yes, "compact"};
  if (flags.bounded_geometry == Tristate::unknown && !flags.compact) bg.detail = "no metadata";

  TubedCondition gr{"uniform_polynomial_growth", Tristate::unknown, "no growth data"};
  if (growth != nullptr) {
    gr.status = growth->classification == GrowthClass::polynomial    ? Tristate::yes
                : growth->classification == GrowthClass::exponential ? Tristate::no
                                                                     : Tristate::unknown;
    gr.detail = std::string("volume growth ") + growth_class_name(growth->classification);
    if (growth->classification == GrowthClass::polynomial) gr.detail += ", degree " + std::to_string(growth->fitted_degree);
  }
  if (flags.compact && gr.status == Tristate::unknown) gr = {gr.name, Tristate::yes, "compact"};
  // Declared fundamental-group growth of a compact quotient transfers to the cover.
  if (flags.group_growth_polynomial == Tristate::no) {
    gr = {gr.name, Tristate::no, "declared exponential fundamental-group growth"};
  } else if (flags.group_growth_polynomial == Tristate::yes && gr.status == Tristate::unknown) {
    gr = {gr.name, Tristate::yes, "declared polynomial fundamental-group growth"};
  }

  TubedVerdict v;
  v.conditions = {bg, gr};
  if (gr.status == Tristate::no) {
    v.verdict = Tristate::no;
  } else if (gr.status == Tristate::yes && bg.status == Tristate::yes) {
    v.verdict = Tristate::yes;
  }
  return v;
}

GeometryFlags metric_flags(const SyntheticMetric& g, const std::optional<WarpedAdmissibility>& adm) {
  GeometryFlags f = g.flags;
  if (f.bounded_geometry != Tristate::unknown) return f;
  if (g.model == MetricModel::warped_cylinder) {
    if (adm) {
      f.bounded_geometry = adm->verdict ? Tristate::yes : Tristate::no;
      f.bounded_geometry_source = "warped admissibility";
    }
  } else {
    f.bounded_geometry = Tristate::yes;  // model spaces are homogeneous
    f.bounded_geometry_source = "model metric";
  }
  return f;
}

std::vector<double> default_radii(const SyntheticMetric& g) {
  double rmax = 50.0;
  std::size_t n = 40;
  if (g.model == MetricModel::hyperbolic) {
    rmax = 20.0;
    n = 20;
  } else if (g.model == MetricModel::warped_cylinder) {
    rmax = std::min(40.0, 0.75 * (g.window - warp_period(g.warp)));
    n = 32;
  }
  if (!(rmax > 0.0)) fail(ErrorCode::InvalidInput, "window too small for a growth fit");
  std::vector<double> r(n);
  for (std::size_t i = 0; i < n; ++i) r[i] = rmax * static_cast<double>(i + 1) / static_cast<double>(n);
  return r;
}

nlohmann::json diagnose_spec(const nlohmann::json& spec, const std::vector<double>& radii, const std::string& base_dir) {
  nlohmann::json out = {{"input", spec}};
  std::optional<SyntheticMetric> metric;
  GeometryFlags flags;
  if (spec.contains("metadata")) flags = GeometryFlags::from_json(spec["metadata"]);

  if (spec.contains("model")) {
    metric = SyntheticMetric::from_json(spec);
    out["source"] = "synthetic";
  } else {
    const auto M = make_manifold(spec, base_dir);
    out["source"] = "embedded";
    out["kind"] = kind_name(M->kind());
    out["reach"] = num(M->reach());
    out["reach_exact"] = M->exact_reach().has_value();
    const auto params = spec.value("parameters", nlohmann::json::object());
    switch (M->kind()) {
      case ManifoldKind::circle:
      case ManifoldKind::sphere:
      case ManifoldKind::clifford_torus: flags.compact = true; break;
      case ManifoldKind::cylinder: {
        SyntheticMetric g;
        g.model = MetricModel::flat_cylinder;
        g.radius = params.value("radius", 1.0);
        g.flags = flags;
        metric = g;
        break;
      }
      case ManifoldKind::warped_cylinder: {
        const auto& W = static_cast<const WarpedCylinder&>(*M);
        SyntheticMetric g;
        g.model = MetricModel::warped_cylinder;
        g.warp = W.warp();
        g.window = M->truncation_window() ? (*M->truncation_window())[1] : 64.0;
        g.flags = flags;
        metric = g;
        break;
      }
      case ManifoldKind::flat:
        if (M->intrinsic_dim() == 2 && !M->is_compact()) {
          SyntheticMetric g;
          g.flags = flags;
          metric = g;
        }
        break;
      case ManifoldKind::point_cloud: break;
    }
  }

  std::optional<GrowthFit> growth;
  if (metric) {
    std::optional<WarpedAdmissibility> adm;
    if (metric->model == MetricModel::warped_cylinder) {
      adm = warped_admissible(metric->warp, {-metric->window, metric->window});
      out["admissibility"] = adm->to_json();
    }
    flags = metric_flags(*metric, adm);
    out["metric"] = metric->to_json();
    growth = growth_fit(*metric, radii.empty() ? default_radii(*metric) : radii);
    out["growth"] = growth->to_json();
  } else {
    out["growth"] = nullptr;
  }
  out["flags"] = flags.to_json();
  out["verdict"] = tubed_verdict(growth ? &*growth : nullptr, flags).to_json();
  return out;
}

}  // namespace singext
