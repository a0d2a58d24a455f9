#include "singext/surface_map.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include "singext/error.hpp"

namespace singext {

const char* domain_name(DomainKind d) {
  switch (d) {
    case DomainKind::sphere_S1: return "sphere_S1";
    case DomainKind::sphere_S2: return "sphere_S2";
    case DomainKind::plane_R1_tail: return "plane_R1_tail";
    case DomainKind::plane_R2_tail: return "plane_R2_tail";
    case DomainKind::poincare_boundary: return "poincare_boundary";
  }
  return "unknown";
}

DomainKind parse_domain(const std::string& name) {
  for (DomainKind d : {DomainKind::sphere_S1, DomainKind::sphere_S2, DomainKind::plane_R1_tail,
                       DomainKind::plane_R2_tail, DomainKind::poincare_boundary}) {
    if (name == domain_name(d)) return d;
  }
  fail(ErrorCode::InvalidInput, "unknown domain '" + name + "'");
}

bool is_plane(DomainKind d) { return d == DomainKind::plane_R1_tail || d == DomainKind::plane_R2_tail; }

namespace {

Point sphere_coords(int m, const Params& s) {
  if (m == 1) return make_point({std::cos(s[0]), std::sin(s[0])});
  const double st = std::sin(s[0]);
  return make_point({st * std::cos(s[1]), st * std::sin(s[1]), std::cos(s[0])});
}

Point domain_coords(const SurfaceMap& u, const Params& s) {
  if (is_plane(u.domain)) {
    Point p(u.m);
    for (int i = 0; i < u.m; ++i) p[i] = s[i];
    return p;
  }
  return sphere_coords(u.m, s);
}

}  // namespace

SurfaceMap map_on_circle(int n, const Map1& u, DomainKind domain) {
  if (n < 4) fail(ErrorCode::InvalidInput, "circle mesh needs at least 4 nodes");
  SurfaceMap m;
  m.domain = domain;
  m.m = 1;
  m.shape = {n, 1};
  m.periodic = {true, false};
  for (int k = 0; k < n; ++k) {
    const double th = 2 * kPi * k / n;
    m.params.push_back(make_params({th}));
    m.coords.push_back(sphere_coords(1, m.params.back()));
    m.weights.push_back(2 * kPi / n);
    m.values.push_back(u(th));
  }
  return m;
}

SurfaceMap map_on_line(double a, double b, int n, const Map1& u, const Point& tail) {
  if (!(b > a) || n < 4) fail(ErrorCode::InvalidInput, "line mesh needs b > a and at least 4 nodes");
  SurfaceMap m;
  m.domain = DomainKind::plane_R1_tail;
  m.m = 1;
  m.shape = {n, 1};
  const double h = (b - a) / n;
  for (int k = 0; k < n; ++k) {
    const double x = a + (k + 0.5) * h;
    m.params.push_back(make_params({x}));
    m.coords.push_back(make_point({x}));
    m.weights.push_back(h);
    m.values.push_back(u(x));
  }
  m.tail = Tail{{a, 0.0}, {b, 0.0}, tail};
  return m;
}

SurfaceMap map_on_sphere(int n_theta, int n_phi, const Map2& u, DomainKind domain) {
  if (n_theta < 4 || n_phi < 4) fail(ErrorCode::InvalidInput, "sphere mesh too small");
  SurfaceMap m;
  m.domain = domain;
  m.m = 2;
  m.shape = {n_theta, n_phi};
  m.periodic = {false, true};
  const double dth = kPi / n_theta, dph = 2 * kPi / n_phi;
  for (int i = 0; i < n_theta; ++i) {
    const double th = (i + 0.5) * dth;
    // exact band area split evenly among the ring's nodes
    const double band = 2 * kPi * (std::cos(i * dth) - std::cos((i + 1) * dth)) / n_phi;
    for (int j = 0; j < n_phi; ++j) {
      const double ph = j * dph;
      m.params.push_back(make_params({th, ph}));
      m.coords.push_back(sphere_coords(2, m.params.back()));
      m.weights.push_back(band);
      m.values.push_back(u(th, ph));
    }
  }
  return m;
}

SurfaceMap map_on_plane(double a, double b, int n, const Map2& u, const Point& tail) {
  if (!(b > a) || n < 4) fail(ErrorCode::InvalidInput, "plane mesh needs b > a and at least 4 nodes");
  SurfaceMap m;
  m.domain = DomainKind::plane_R2_tail;
  m.m = 2;
  m.shape = {n, n};
  const double h = (b - a) / n;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double x = a + (i + 0.5) * h, y = a + (j + 0.5) * h;
      m.params.push_back(make_params({x, y}));
      m.coords.push_back(make_point({x, y}));
      m.weights.push_back(h * h);
      m.values.push_back(u(x, y));
    }
  }
  m.tail = Tail{{a, a}, {b, b}, tail};
  return m;
}

void validate_map(const SurfaceMap& u, const EmbeddedManifold& M) {
  const double tol = M.tolerances().on_manifold;
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (u.values[i].size() != M.ambient_dim()) fail(ErrorCode::InvalidInput, "map value has wrong dimension");
    if (!tube_membership(M, u.values[i], tol)) {
      fail(ErrorCode::NotOnManifold, "map value at node " + std::to_string(i) + " is off the manifold");
    }
    if (u.L_bound && u.values[i].norm() > *u.L_bound * (1 + 1e-12)) {
      fail(ErrorCode::BoundViolation, "map value at node " + std::to_string(i) + " exceeds L_bound");
    }
  }
  if (u.tail && !tube_membership(M, u.tail->value, tol)) fail(ErrorCode::NotOnManifold, "tail value is off the manifold");
}

SurfaceMap coarsen(const SurfaceMap& u, int level) {
  if (level == 0) return u;
  const int stride = 1 << level;
  SurfaceMap c = u;
  c.params.clear();
  c.coords.clear();
  c.weights.clear();
  c.values.clear();
  std::array<int, 2> n{(u.shape[0] + stride - 1) / stride, u.m == 1 ? 1 : (u.shape[1] + stride - 1) / stride};
  const int s1 = u.m == 1 ? 1 : stride;
  c.shape = n;
  for (int I = 0; I < n[0]; ++I) {
    for (int J = 0; J < n[1]; ++J) {
      const std::size_t k = u.index(I * stride, J * s1);
      double w = 0.0;
      Point centroid = Point::Zero(u.coords[k].size());
      for (int a = 0; a < stride && I * stride + a < u.shape[0]; ++a) {
        for (int b = 0; b < s1 && J * s1 + b < u.shape[1]; ++b) {
          const std::size_t q = u.index(I * stride + a, J * s1 + b);
          w += u.weights[q];
          centroid += u.weights[q] * u.coords[q];
        }
      }
      // Plane meshes are midpoint meshes: the coarse node sits at the center
      // of its merged cell, so window-edge tail terms stay consistent.
      if (is_plane(u.domain) && w > 0) {
        centroid /= w;
        c.params.push_back(centroid.head(u.params[k].size()));
        c.coords.push_back(centroid);
      } else {
        c.params.push_back(u.params[k]);
        c.coords.push_back(u.coords[k]);
      }
      c.weights.push_back(w);
      c.values.push_back(u.values[k]);
    }
  }
  return c;
}

SurfaceMap read_map(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::InvalidInput, "cannot open map file '" + path + "'");
  SurfaceMap u;
  bool have_domain = false;
  std::optional<std::array<double, 4>> window;
  std::optional<std::vector<double>> tail;
  std::optional<std::array<int, 2>> shape;
  std::string line;
  std::vector<std::vector<double>> rows;
  std::vector<std::string> header;
  try {
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      if (line[0] == '#') {
        std::stringstream ss(line.substr(1));
        std::string key;
        ss >> key;
        if (!key.empty() && key.back() == ':') key.pop_back();
        if (key == "domain") {
          std::string d;
          ss >> d;
          u.domain = parse_domain(d);
          have_domain = true;
        } else if (key == "manifold") {
          ss >> u.manifold_ref;
        } else if (key == "L_bound") {
          double L;
          ss >> L;
          u.L_bound = L;
        } else if (key == "shape") {
          std::array<int, 2> s{};
          ss >> s[0] >> s[1];
          shape = s;
        } else if (key == "window") {
          std::vector<double> w;
          double x;
          while (ss >> x) w.push_back(x);
          if (w.size() == 2) window = std::array<double, 4>{w[0], 0.0, w[1], 0.0};
          else if (w.size() == 4) window = std::array<double, 4>{w[0], w[1], w[2], w[3]};
          else fail(ErrorCode::InvalidInput, "window needs 2 or 4 numbers");
        } else if (key == "tail") {
          std::vector<double> t;
          double x;
          while (ss >> x) t.push_back(x);
          tail = t;
        }
        continue;
      }
      if (header.empty() && (std::isalpha(static_cast<unsigned char>(line[0])))) {
        std::stringstream ss(line);
        std::string c;
        while (std::getline(ss, c, ',')) header.push_back(c);
        continue;
      }
      std::stringstream ss(line);
      std::string c;
      std::vector<double> row;
      while (std::getline(ss, c, ',')) row.push_back(std::stod(c));
      rows.push_back(std::move(row));
    }
  } catch (const std::invalid_argument&) {
    fail(ErrorCode::InvalidInput, "non-numeric entry in map file");
  }
  if (!have_domain) fail(ErrorCode::InvalidInput, "map file lacks a domain header");
  int np = 0, nv = 0;
  bool has_w = false;
  for (const auto& h : header) {
    if (h.rfind("p", 0) == 0) ++np;
    else if (h == "w") has_w = true;
    else if (h.rfind("v", 0) == 0) ++nv;
  }
  if (header.empty() || np < 1 || np > 2 || nv < 1 || !has_w) fail(ErrorCode::InvalidInput, "map header needs p*, w, v* columns");
  u.m = np;
  if ((u.domain == DomainKind::sphere_S1 || u.domain == DomainKind::plane_R1_tail) && np != 1) {
    fail(ErrorCode::InvalidInput, "one-dimensional domain needs one parameter column");
  }
  if ((u.domain == DomainKind::sphere_S2 || u.domain == DomainKind::plane_R2_tail) && np != 2) {
    fail(ErrorCode::InvalidInput, "two-dimensional domain needs two parameter columns");
  }
  for (const auto& r : rows) {
    if (static_cast<int>(r.size()) != np + 1 + nv) fail(ErrorCode::InvalidInput, "map row has wrong width");
    Params s(np);
    for (int i = 0; i < np; ++i) s[i] = r[i];
    u.params.push_back(s);
    u.weights.push_back(r[np]);
    Point v(nv);
    for (int i = 0; i < nv; ++i) v[i] = r[np + 1 + i];
    u.values.push_back(v);
  }
  if (u.values.empty()) fail(ErrorCode::InvalidInput, "map file has no nodes");
  u.shape = shape ? *shape : std::array<int, 2>{static_cast<int>(u.values.size()), 1};
  if (static_cast<std::size_t>(u.shape[0]) * u.shape[1] != u.values.size()) fail(ErrorCode::InvalidInput, "shape does not match node count");
  if (u.domain == DomainKind::sphere_S1 || (u.domain == DomainKind::poincare_boundary && u.m == 1)) u.periodic = {true, false};
  if (u.domain == DomainKind::sphere_S2 || (u.domain == DomainKind::poincare_boundary && u.m == 2)) u.periodic = {false, true};
  for (const auto& s : u.params) u.coords.push_back(domain_coords(u, s));
  if (is_plane(u.domain)) {
    if (!window || !tail) fail(ErrorCode::TailNotConstant, "plane-domain map without window/tail marker");
    Tail t;
    t.lo = {(*window)[0], (*window)[1]};
    t.hi = {(*window)[2], (*window)[3]};
    if (u.m == 1) {
      t.lo[1] = t.hi[1] = 0.0;
    }
    t.value = Point(static_cast<Eigen::Index>(tail->size()));
    for (std::size_t i = 0; i < tail->size(); ++i) t.value[static_cast<Eigen::Index>(i)] = (*tail)[i];
    if (t.value.size() != nv) fail(ErrorCode::InvalidInput, "tail value has wrong dimension");
    u.tail = t;
  }
  return u;
}

void write_map(const SurfaceMap& u, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::InvalidInput, "cannot write map file '" + path + "'");
  out << std::setprecision(17);
  out << "# domain: " << domain_name(u.domain) << "\n";
  out << "# mesh: " << u.size() << "\n";
  out << "# shape: " << u.shape[0] << " " << u.shape[1] << "\n";
  if (!u.manifold_ref.empty()) out << "# manifold: " << u.manifold_ref << "\n";
  if (u.L_bound) out << "# L_bound: " << *u.L_bound << "\n";
  if (u.tail) {
    if (u.m == 1) out << "# window: " << u.tail->lo[0] << " " << u.tail->hi[0] << "\n";
    else out << "# window: " << u.tail->lo[0] << " " << u.tail->lo[1] << " " << u.tail->hi[0] << " " << u.tail->hi[1] << "\n";
    out << "# tail:";
    for (Eigen::Index i = 0; i < u.tail->value.size(); ++i) out << " " << u.tail->value[i];
    out << "\n";
  }
  const Eigen::Index nv = u.values.empty() ? 0 : u.values[0].size();
  for (int i = 0; i < u.m; ++i) out << "p" << i << ",";
  out << "w";
  for (Eigen::Index i = 0; i < nv; ++i) out << ",v" << i;
  out << "\n";
  for (std::size_t k = 0; k < u.size(); ++k) {
    for (int i = 0; i < u.m; ++i) out << u.params[k][i] << ",";
    out << u.weights[k];
    for (Eigen::Index i = 0; i < nv; ++i) out << "," << u.values[k][i];
    out << "\n";
  }
}

}  // namespace singext
