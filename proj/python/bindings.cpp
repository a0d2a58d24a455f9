#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "singext/cli.hpp"
#include "singext/conformal.hpp"
#include "singext/diagnostics.hpp"
#include "singext/energy.hpp"
#include "singext/error.hpp"
#include "singext/extension.hpp"
#include "singext/geometry.hpp"
#include "singext/parallel.hpp"
#include "singext/version.hpp"

namespace py = pybind11;
using namespace singext;

namespace {

py::object to_py(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

nlohmann::json from_py(const py::object& o) {
  return nlohmann::json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

using Rows = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

std::vector<Point> rows_to_points(const Rows& a) {
  std::vector<Point> pts;
  pts.reserve(static_cast<std::size_t>(a.rows()));
  for (Eigen::Index i = 0; i < a.rows(); ++i) pts.push_back(a.row(i).transpose());
  return pts;
}

Rows points_to_rows(const std::vector<Point>& pts) {
  Rows a(static_cast<Eigen::Index>(pts.size()), pts.empty() ? 0 : pts.front().size());
  for (std::size_t i = 0; i < pts.size(); ++i) a.row(static_cast<Eigen::Index>(i)) = pts[i].transpose();
  return a;
}

py::dict energy_dict(const EnergyReport& e) {
  py::dict d;
  d["gagliardo"] = e.gagliardo;
  d["truncated"] = e.truncated;
  d["gap_potential"] = e.gap_potential;
  d["delta"] = e.delta;
  d["quadrature_error_estimate"] = e.quadrature_error_estimate;
  d["divergent"] = e.divergent;
  d["levels"] = std::vector<double>(e.levels.begin(), e.levels.end());
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Singular extensions of manifold-valued boundary maps";
  m.attr("__version__") = kVersion;

  static py::exception<Error> py_error(m, "SingextError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = py::reinterpret_borrow<py::object>(py_error.ptr())(e.what());
      exc.attr("code") = error_name(e.code());
      PyErr_SetObject(py_error.ptr(), exc.ptr());
    }
  });

  m.def("set_thread_count", &set_thread_count);

  py::class_<EmbeddedManifold, std::shared_ptr<EmbeddedManifold>>(m, "Manifold")
      .def_property_readonly("kind", [](const EmbeddedManifold& M) { return std::string(kind_name(M.kind())); })
      .def_property_readonly("ambient_dim", &EmbeddedManifold::ambient_dim)
      .def_property_readonly("intrinsic_dim", &EmbeddedManifold::intrinsic_dim)
      .def_property_readonly("reach", &EmbeddedManifold::reach)
      .def("spec", [](const EmbeddedManifold& M) { return to_py(M.spec()); })
      .def("project", [](const EmbeddedManifold& M, const Rows& z) {
        std::vector<Point> out;
        for (const Point& p : rows_to_points(z)) out.push_back(project(M, p));
        return points_to_rows(out);
      })
      .def("geodesic", [](const EmbeddedManifold& M, const Point& p, const Point& q) { return geodesic_distance(M, p, q); });

  m.def("make_manifold", [](const py::object& spec) {
    return std::const_pointer_cast<EmbeddedManifold>(make_manifold(from_py(spec)));
  });
  m.def("load_manifold", [](const std::string& path) { return std::const_pointer_cast<EmbeddedManifold>(load_manifold(path)); });
  m.def("federer_reach", [](const EmbeddedManifold& M, std::size_t n) { return federer_reach(M, n).value; });

  py::class_<SurfaceMap>(m, "SurfaceMap")
      .def_property_readonly("domain", [](const SurfaceMap& u) { return std::string(domain_name(u.domain)); })
      .def_property_readonly("size", &SurfaceMap::size)
      .def_property_readonly("values", [](const SurfaceMap& u) { return points_to_rows(u.values); })
      .def_property_readonly("weights", [](const SurfaceMap& u) { return u.weights; })
      .def_readwrite("L_bound", &SurfaceMap::L_bound);

  m.def("read_map", &read_map);
  m.def("write_map", &write_map);
  m.def(
      "line_map",
      [](double a, double b, const Rows& values, const Point& tail) {
        const std::vector<Point> v = rows_to_points(values);
        const int n = static_cast<int>(v.size());
        return map_on_line(a, b, n, [&](double x) {
          const auto i = std::clamp(static_cast<int>(std::floor((x - a) / (b - a) * n)), 0, n - 1);
          return v[static_cast<std::size_t>(i)];
        }, tail);
      },
      py::arg("a"), py::arg("b"), py::arg("values"), py::arg("tail"),
      "Line map on [a, b] with midpoint nodes carrying the given rows.");
  m.def(
      "circle_map",
      [](const Rows& values) {
        const std::vector<Point> v = rows_to_points(values);
        const int n = static_cast<int>(v.size());
        return map_on_circle(n, [&](double th) {
          const auto i = static_cast<std::size_t>(std::lround(th / (2 * kPi) * n)) % v.size();
          return v[i];
        });
      },
      "Map on S^1 with node k at angle 2 pi k / n.");
  m.def("transport_map", [](const SurfaceMap& u, const std::string& direction, const std::string& policy, double cap) {
    TransportOptions opt;
    opt.policy = policy == "truncate" ? TailPolicy::truncate : TailPolicy::strict;
    opt.cap_radius = cap;
    return transport_map(u, parse_direction(direction), opt);
  }, py::arg("u"), py::arg("direction"), py::arg("policy") = "strict", py::arg("cap_radius") = 0.25);

  m.def("gagliardo_energy", [](const SurfaceMap& u, const EmbeddedManifold& M) {
    const GagliardoResult g = gagliardo_energy(u, M);
    py::dict d;
    d["value"] = g.value;
    d["error_estimate"] = g.error_estimate;
    d["divergent"] = g.divergent;
    return d;
  });
  m.def("energy_report", [](const SurfaceMap& u, const EmbeddedManifold& M, double delta) {
    return energy_dict(energy_report(u, M, delta));
  });

  m.def(
      "assemble",
      [](const SurfaceMap& u, std::shared_ptr<EmbeddedManifold> M, const std::string& mode, double eta, double c1,
         int mesh) {
        ExtensionConfig c;
        c.mode = parse_mode(mode);
        c.eta = eta;
        c.c1 = c1;
        c.slab = default_slab(u, mesh);
        const Assembly a = assemble(u, M, c);
        py::dict d = to_py(a.to_json()).cast<py::dict>();
        const std::size_t nx = a.field.xs.size(), ny = a.field.heights.size();
        py::array_t<double> grad({ny, nx});
        std::copy(a.field.grad.begin(), a.field.grad.end(), grad.mutable_data());
        d["grad"] = grad;
        d["xs"] = a.field.xs;
        d["heights"] = a.field.heights;
        d["invariants_hold"] = a.invariants_hold();
        return d;
      },
      py::arg("u"), py::arg("manifold"), py::arg("mode") = "general", py::arg("eta") = 0.5, py::arg("c1") = 0.01,
      py::arg("mesh") = 1024);

  m.def("transport_points", [](const Rows& pts, const std::string& direction) {
    return points_to_rows(transport_points(rows_to_points(pts), parse_direction(direction)));
  });
  m.def("hyperbolic_disk_area", &hyperbolic_disk_area);

  m.def("growth_fit", [](const py::object& spec, const std::vector<double>& radii) {
    const SyntheticMetric g = SyntheticMetric::from_json(from_py(spec));
    return to_py(growth_fit(g, radii.empty() ? default_radii(g) : radii).to_json());
  }, py::arg("spec"), py::arg("radii") = std::vector<double>{});
  m.def("warped_admissible", [](const py::object& warp, double lo, double hi) {
    return to_py(warped_admissible(WarpFunction::from_json(from_py(warp)), {lo, hi}).to_json());
  });
  m.def("diagnose", [](const py::object& spec, const std::vector<double>& radii) {
    return to_py(diagnose_spec(from_py(spec), radii));
  }, py::arg("spec"), py::arg("radii") = std::vector<double>{});

  m.def("cli", [](const std::vector<std::string>& args) {
    std::vector<const char*> argv{"singext"};
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
    return py::make_tuple(code, out.str(), err.str());
  });
}
