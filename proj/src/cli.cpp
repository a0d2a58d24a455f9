#include "singext/cli.hpp"

#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "singext/diagnostics.hpp"
#include "singext/energy.hpp"
#include "singext/error.hpp"
#include "singext/extension.hpp"
#include "singext/parallel.hpp"
#include "singext/version.hpp"

namespace singext {

namespace fs = std::filesystem;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::InvalidInput, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::json read_json(const std::string& path) {
  try {
    return nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::InvalidInput, "malformed JSON in '" + path + "': " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::InvalidInput, "cannot write '" + path.string() + "'");
  out << text;
}

const char* policy_name(TailPolicy p) { return p == TailPolicy::strict ? "strict" : "truncate"; }

bool power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

struct Inputs {
  SurfaceMap u;
  std::shared_ptr<const EmbeddedManifold> M;
  nlohmann::json hashes = nlohmann::json::object();
};

std::string manifold_path_for(const RunConfig& cfg, const SurfaceMap* u) {
  if (!cfg.manifold_path.empty()) return cfg.manifold_path;
  if (u == nullptr || u->manifold_ref.empty()) fail(ErrorCode::InvalidInput, "no manifold given (--manifold or map header)");
  fs::path p = u->manifold_ref;
  if (p.is_relative()) p = fs::path(cfg.map_path).parent_path() / p;
  return p.string();
}

Inputs load_inputs(const RunConfig& cfg, bool need_map) {
  Inputs in;
  if (need_map) {
    if (cfg.map_path.empty()) fail(ErrorCode::InvalidInput, "--map is required");
    in.u = read_map(cfg.map_path);
    in.hashes["map"] = hex64(fnv1a(read_file(cfg.map_path)));
  }
  const std::string mp = manifold_path_for(cfg, need_map ? &in.u : nullptr);
  in.M = load_manifold(mp);
  in.hashes["manifold"] = hex64(fnv1a(read_file(mp)));
  if (need_map) validate_map(in.u, *in.M);
  return in;
}

nlohmann::json report(const RunConfig& cfg, const nlohmann::json& inputs, nlohmann::json result,
                      std::chrono::steady_clock::time_point start) {
  nlohmann::json config = cfg.to_json();
  config["inputs"] = inputs;
  nlohmann::json r = {{"command", cfg.command},
                      {"config", config},
                      {"config_hash", hex64(fnv1a(config.dump()))},
                      {"versions", module_versions()},
                      {"result", std::move(result)}};
  if (!cfg.deterministic) {
    r["elapsed_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
  return r;
}

void emit(const fs::path& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

nlohmann::json energy_json(const EnergyReport& e) {
  return {{"gagliardo", e.gagliardo},
          {"truncated", e.truncated},
          {"gap_potential", e.gap_potential},
          {"delta", e.delta},
          {"quadrature_error_estimate", e.quadrature_error_estimate},
          {"divergent", e.divergent},
          {"levels", e.levels}};
}

double default_delta(const RunConfig& cfg, const EmbeddedManifold& M) {
  if (cfg.delta) return *cfg.delta;
  const double d = cfg.eta * M.reach() / 4.0;  // eta delta_N / 2 with delta_N = reach / 2
  if (!std::isfinite(d)) fail(ErrorCode::InvalidInput, "target has infinite reach; pass --delta");
  return d;
}

int cmd_energy(const RunConfig& cfg, std::ostream& out, std::chrono::steady_clock::time_point start) {
  const Inputs in = load_inputs(cfg, true);
  const EnergyReport e = energy_report(in.u, *in.M, default_delta(cfg, *in.M));
  emit(fs::path(cfg.out) / "energy.json", report(cfg, in.hashes, energy_json(e), start));
  out << "gagliardo " << e.gagliardo << (e.divergent ? " (divergent)" : "") << "\n";
  return e.divergent ? kExitDivergence : kExitOk;
}

EstimateFit load_fit(const std::string& path) {
  const nlohmann::json j = read_json(path);
  try {
    EstimateFit f;
    f.mode = parse_mode(j.value("mode", std::string("general")));
    f.A = j.at("A").get<double>();
    f.B = j.at("B").get<double>();
    f.reach = j.value("reach", 0.0);
    f.implied_C = j.value("implied_C", 0.0);
    return f;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::InvalidInput, std::string("malformed fit file: ") + e.what());
  }
}

int cmd_extend(const RunConfig& cfg, std::ostream& out, std::ostream& err,
               std::chrono::steady_clock::time_point start) {
  const Inputs in = load_inputs(cfg, true);
  ExtensionConfig ec;
  ec.mode = cfg.mode;
  ec.eta = cfg.eta;
  ec.c1 = cfg.c1;
  ec.K = cfg.K;
  ec.slab = default_slab(in.u, cfg.mesh);
  if (cfg.slab_min) ec.slab.h_min = *cfg.slab_min;
  const Assembly a = assemble(in.u, in.M, ec);

  nlohmann::json hashes = in.hashes;
  const EstimateSample sample = estimate_sample(fs::path(cfg.map_path).stem().string(), a);
  EstimateFit fit;
  std::string calibration;
  if (!cfg.fit_path.empty()) {
    fit = load_fit(cfg.fit_path);
    calibration = "file";
    hashes["fit"] = hex64(fnv1a(read_file(cfg.fit_path)));
  } else {
    try {
      fit = fit_estimate({sample}, cfg.mode, in.M->reach(), 1, cfg.K, in.u.L_bound);
      calibration = "self";
    } catch (const Error& e) {
      if (e.code() != ErrorCode::FitInfeasible) throw;
      fit.mode = cfg.mode;
      fit.reach = in.M->reach();
      calibration = "none";
    }
  }
  nlohmann::json ver = verify_estimate(sample, fit).to_json();
  ver["calibration"] = calibration;

  const fs::path dir = cfg.out;
  const fs::path field = dir / "extension.f64";
  write_extension(a, field.string());
  nlohmann::json side = read_json(field.string() + ".json");
  emit(field.string() + ".json", report(cfg, hashes, side, start));
  emit(dir / "distribution.json", report(cfg, hashes, a.dist.to_json(), start));
  write_text(dir / "distribution.csv", a.dist.to_csv());
  emit(dir / "estimate.json", report(cfg, hashes, ver, start));

  out << "singular_count " << a.dist.singular_count << " weak_norm " << a.dist.weak_norm << "\n";
  if (!a.invariants_hold()) {
    for (const auto& c : a.invariants) {
      if (!c.passed) err << "invariant failed: " << c.name << " (" << c.detail << ")\n";
    }
    return kExitInvariant;
  }
  return kExitOk;
}

int cmd_diagnose(const RunConfig& cfg, std::ostream& out, std::chrono::steady_clock::time_point start) {
  const std::string path = !cfg.spec_path.empty() ? cfg.spec_path : cfg.manifold_path;
  if (path.empty()) fail(ErrorCode::InvalidInput, "--spec or --manifold is required");
  const nlohmann::json spec = read_json(path);
  const nlohmann::json hashes = {{"spec", hex64(fnv1a(read_file(path)))}};
  const nlohmann::json r = diagnose_spec(spec, cfg.radii, fs::path(path).parent_path().string());
  emit(fs::path(cfg.out) / "diagnose.json", report(cfg, hashes, r, start));
  out << "verdict " << r["verdict"]["admits_tubed_embedding_by_criterion"].get<std::string>() << "\n";
  return kExitOk;
}

int cmd_reach(const RunConfig& cfg, std::ostream& out, std::chrono::steady_clock::time_point start) {
  const Inputs in = load_inputs(cfg, false);
  const ReachEstimate est = federer_reach(*in.M, cfg.samples);
  nlohmann::json hist = nlohmann::json::array();
  for (const auto& [n, v] : est.monotone_history) hist.push_back({n, v});
  nlohmann::json r = {{"kind", kind_name(in.M->kind())},
                      {"sampled", est.value},
                      {"sample_count", est.sample_count},
                      {"history", hist},
                      {"exact", est.exact ? nlohmann::json(*est.exact) : nlohmann::json(nullptr)},
                      {"reach_used", std::isfinite(in.M->reach()) ? nlohmann::json(in.M->reach()) : nlohmann::json("inf")}};
  emit(fs::path(cfg.out) / "reach.json", report(cfg, in.hashes, r, start));
  out << "reach " << est.value << "\n";
  return kExitOk;
}

int cmd_transport(const RunConfig& cfg, std::ostream& out, std::chrono::steady_clock::time_point start) {
  if (cfg.map_path.empty()) fail(ErrorCode::InvalidInput, "--map is required");
  const SurfaceMap u = read_map(cfg.map_path);
  TransportOptions opt;
  opt.policy = cfg.policy;
  opt.cap_radius = cfg.cap_radius;
  SurfaceMap v = transport_map(u, cfg.direction, opt);
  v.manifold_ref = u.manifold_ref.empty() ? "" : fs::absolute(manifold_path_for(cfg, &u)).lexically_normal().string();
  const fs::path dst = fs::path(cfg.out) / "transported.csv";
  write_map(v, dst.string());
  const nlohmann::json hashes = {{"map", hex64(fnv1a(read_file(cfg.map_path)))}};
  const nlohmann::json r = {{"direction", direction_name(cfg.direction)},
                            {"policy", policy_name(cfg.policy)},
                            {"source_domain", domain_name(u.domain)},
                            {"target_domain", domain_name(v.domain)},
                            {"nodes_in", u.size()},
                            {"nodes_out", v.size()},
                            {"output", dst.filename().string()}};
  emit(fs::path(cfg.out) / "transport.json", report(cfg, hashes, r, start));
  out << "transported " << u.size() << " -> " << v.size() << " nodes\n";
  return kExitOk;
}

}  // namespace

void RunConfig::validate() const {
  if (!(eta > 0.0 && eta < 1.0)) fail(ErrorCode::InvalidInput, "eta must lie in (0, 1)");
  if (!(c1 > 0.0)) fail(ErrorCode::InvalidInput, "c1 must be positive");
  if (!power_of_two(mesh) || mesh < 16) fail(ErrorCode::InvalidInput, "mesh must be a power of two >= 16");
  if (slab_min && !(*slab_min > 0.0)) fail(ErrorCode::InvalidInput, "slab-min must be positive");
  if (delta && !(*delta > 0.0)) fail(ErrorCode::InvalidInput, "delta must be positive");
  if (K && !(*K >= 1.0)) fail(ErrorCode::InvalidInput, "K must be at least 1");
  if (threads < 0) fail(ErrorCode::InvalidInput, "threads must be nonnegative");
  if (!(cap_radius > 0.0 && cap_radius < kPi)) fail(ErrorCode::InvalidInput, "cap radius must lie in (0, pi)");
}

nlohmann::json RunConfig::to_json() const {
  nlohmann::json j = {{"command", command},
                      {"mode", mode_name(mode)},
                      {"eta", eta},
                      {"c1", c1},
                      {"mesh", mesh},
                      {"deterministic", deterministic}};
  j["slab_min"] = slab_min ? nlohmann::json(*slab_min) : nlohmann::json(nullptr);
  j["delta"] = delta ? nlohmann::json(*delta) : nlohmann::json(nullptr);
  j["K"] = K ? nlohmann::json(*K) : nlohmann::json(nullptr);
  if (command == "transport") {
    j["direction"] = direction_name(direction);
    j["policy"] = policy_name(policy);
    j["cap_radius"] = cap_radius;
  }
  if (command == "reach") j["samples"] = samples;
  if (command == "diagnose") j["radii"] = radii;
  return j;
}

int run_command(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const auto start = std::chrono::steady_clock::now();
  try {
    cfg.validate();
    set_thread_count(cfg.threads > 0 ? cfg.threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency())));
    fs::create_directories(cfg.out);
    if (cfg.command == "energy") return cmd_energy(cfg, out, start);
    if (cfg.command == "extend") return cmd_extend(cfg, out, err, start);
    if (cfg.command == "diagnose") return cmd_diagnose(cfg, out, start);
    if (cfg.command == "reach") return cmd_reach(cfg, out, start);
    if (cfg.command == "transport") return cmd_transport(cfg, out, start);
    fail(ErrorCode::InvalidInput, "unknown command '" + cfg.command + "'");
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.code() == ErrorCode::NonFiniteEnergy ? kExitDivergence : kExitInput;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  }
}

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Singular extensions of manifold-valued boundary maps"};
  app.require_subcommand(1);
  RunConfig cfg;
  std::string mode = "general", direction = "to_half_space", policy = "strict";
  std::optional<double> slab_min, delta, K;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--out", cfg.out, "Output directory");
    sub->add_flag("--deterministic", cfg.deterministic, "Omit timings so reports are byte-identical");
    sub->add_option("--threads", cfg.threads, "Worker threads (0 = all cores)");
  };
  auto numeric = [&](CLI::App* sub) {
    sub->add_option("--mode", mode, "general or bounded");
    sub->add_option("--eta", cfg.eta, "Tube fraction eta in (0, 1)");
    sub->add_option("--c1", cfg.c1, "Constant C1 in the lambda rule");
    sub->add_option("--mesh", cfg.mesh, "Horizontal slab nodes (power of two)");
    sub->add_option("--slab-min", slab_min, "Lowest slab height");
    sub->add_option("--delta", delta, "Truncation threshold for the energy report");
    sub->add_option("--K", K, "Comparability constant for bounded mode");
  };

  CLI::App* energy = app.add_subcommand("energy", "Gagliardo energy, truncated energy and gap potential");
  CLI::App* extend = app.add_subcommand("extend", "Assemble the singular extension and its distribution");
  CLI::App* diagnose = app.add_subcommand("diagnose", "Tubed-embedding verdict for a metric or manifold");
  CLI::App* reach = app.add_subcommand("reach", "Sampled Federer reach of a manifold");
  CLI::App* transport = app.add_subcommand("transport", "Move a boundary map between the line and the circle");
  for (CLI::App* sub : {energy, extend, diagnose, reach, transport}) common(sub);
  for (CLI::App* sub : {energy, extend}) {
    numeric(sub);
    sub->add_option("--map", cfg.map_path, "Boundary map CSV")->required();
    sub->add_option("--manifold", cfg.manifold_path, "Manifold spec JSON (defaults to the map header)");
  }
  extend->add_option("--fit", cfg.fit_path, "Estimate fit JSON {A, B, mode}");
  diagnose->add_option("--spec", cfg.spec_path, "Synthetic metric or manifold spec JSON");
  diagnose->add_option("--manifold", cfg.manifold_path, "Manifold spec JSON");
  diagnose->add_option("--radii", cfg.radii, "Radii for the growth fit")->delimiter(',');
  reach->add_option("--manifold", cfg.manifold_path, "Manifold spec JSON")->required();
  reach->add_option("--samples", cfg.samples, "Sample count");
  transport->add_option("--map", cfg.map_path, "Boundary map CSV")->required();
  transport->add_option("--manifold", cfg.manifold_path, "Manifold spec JSON");
  transport->add_option("--direction", direction, "to_half_space or to_ball");
  transport->add_option("--policy", policy, "strict or truncate");
  transport->add_option("--cap", cfg.cap_radius, "Angular radius of the pole cap");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInput;
  }
  cfg.command = app.get_subcommands().front()->get_name();
  cfg.slab_min = slab_min;
  cfg.delta = delta;
  cfg.K = K;
  try {
    cfg.mode = parse_mode(mode);
    cfg.direction = parse_direction(direction);
    if (policy == "strict") {
      cfg.policy = TailPolicy::strict;
    } else if (policy == "truncate") {
      cfg.policy = TailPolicy::truncate;
    } else {
      fail(ErrorCode::InvalidInput, "unknown policy '" + policy + "'");
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return run_command(cfg, out, err);
}

}  // namespace singext
