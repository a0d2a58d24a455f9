#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "singext/cli.hpp"
#include "singext/types.hpp"

using namespace singext;
namespace fs = std::filesystem;

namespace {

const fs::path kFixtures = SINGEXT_FIXTURES;

struct Run {
  int code = -1;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  std::vector<const char*> argv{"singext"};
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Run r;
  r.code = cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "singext_cli_test" / name;
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::json load(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

std::string fx(const char* name) { return (kFixtures / name).string(); }

}  // namespace

TEST_CASE("energy command") {
  const auto dir = scratch("energy");
  auto r = cli({"energy", "--map", fx("constant_line.csv"), "--out", dir.string()});
  CHECK(r.code == kExitOk);
  auto j = load(dir / "energy.json");
  CHECK(j["result"]["gagliardo"].get<double>() == 0.0);
  CHECK(j.contains("config_hash"));
  CHECK(j["versions"].contains("energy"));

  r = cli({"energy", "--map", fx("identity_circle.csv"), "--out", dir.string()});
  CHECK(r.code == kExitOk);
  CHECK(load(dir / "energy.json")["result"]["gagliardo"].get<double>() ==
        doctest::Approx(8 * kPi * kPi * std::log(2.0)).epsilon(0.005));

  r = cli({"energy", "--map", fx("step_line.csv"), "--out", dir.string()});
  CHECK(r.code == kExitDivergence);
  CHECK(load(dir / "energy.json")["result"]["divergent"].get<bool>());
}

TEST_CASE("extend command") {
  const auto dir = scratch("extend");
  auto r = cli({"extend", "--map", fx("constant_line.csv"), "--out", dir.string(), "--mesh", "256"});
  CHECK(r.code == kExitOk);
  CHECK(load(dir / "distribution.json")["result"]["singular_count"] == 0);
  CHECK(slurp(dir / "distribution.csv") == "t,mu\n0,0\n");
  CHECK(load(dir / "estimate.json")["result"]["holds"].get<bool>());
  CHECK(fs::exists(dir / "extension.f64"));
  CHECK(load(dir / "extension.f64.json")["result"]["format"] == "f64le");

  r = cli({"extend", "--map", fx("loop_line.csv"), "--out", dir.string(), "--mesh", "512"});
  CHECK(r.code == kExitOk);
  CHECK(load(dir / "distribution.json")["result"]["singular_count"].get<int>() >= 1);
  const auto est = load(dir / "estimate.json")["result"];
  CHECK(est["calibration"] == "self");
  CHECK(est["slack"].get<double>() >= 0.0);

  r = cli({"extend", "--map", fx("loop_line.csv"), "--out", dir.string(), "--mode", "bounded"});
  CHECK(r.code == kExitInput);
  CHECK(r.err.find("MissingBound") != std::string::npos);

  r = cli({"extend", "--map", fx("step_line.csv"), "--out", dir.string(), "--mesh", "256"});
  CHECK(r.code == kExitDivergence);
}

TEST_CASE("diagnose command") {
  const auto dir = scratch("diagnose");
  const std::pair<const char*, const char*> cases[] = {
      {"warped_cylinder.json", "yes"}, {"hyperbolic.json", "no"}, {"point_cloud.json", "unknown"}};
  for (const auto& [file, verdict] : cases) {
    CHECK(cli({"diagnose", "--spec", fx(file), "--out", dir.string()}).code == kExitOk);
    const auto j = load(dir / "diagnose.json")["result"];
    CHECK(j["verdict"]["admits_tubed_embedding_by_criterion"] == verdict);
  }
  cli({"diagnose", "--spec", fx("warped_cylinder.json"), "--out", dir.string()});
  CHECK(load(dir / "diagnose.json")["result"]["reach"].get<double>() > 1.5);
  CHECK(cli({"diagnose", "--spec", fx("loop_line.csv"), "--out", dir.string()}).code == kExitInput);
}

TEST_CASE("reach and transport commands") {
  const auto dir = scratch("misc");
  CHECK(cli({"reach", "--manifold", fx("circle.json"), "--samples", "2000", "--out", dir.string()}).code == kExitOk);
  CHECK(load(dir / "reach.json")["result"]["sampled"].get<double>() == doctest::Approx(1.0).epsilon(0.01));

  CHECK(cli({"transport", "--map", fx("capped_circle.csv"), "--out", dir.string()}).code == kExitOk);
  CHECK(load(dir / "transport.json")["result"]["target_domain"] == "plane_R1_tail");
  CHECK(cli({"transport", "--map", fx("identity_circle.csv"), "--out", dir.string()}).code == kExitInput);
  CHECK(cli({"transport", "--map", fx("identity_circle.csv"), "--policy", "truncate", "--out", dir.string()}).code ==
        kExitOk);
}

TEST_CASE("argument validation and exit codes") {
  const auto dir = scratch("args").string();
  CHECK(cli({"extend", "--map", fx("loop_line.csv"), "--mesh", "1000", "--out", dir}).code == kExitInput);
  CHECK(cli({"extend", "--map", fx("loop_line.csv"), "--eta", "1.5", "--out", dir}).code == kExitInput);
  CHECK(cli({"extend", "--map", fx("loop_line.csv"), "--c1", "0", "--out", dir}).code == kExitInput);
  CHECK(cli({"energy", "--map", fx("missing.csv"), "--out", dir}).code == kExitInput);
  CHECK(cli({"frobnicate"}).code == kExitInput);
  CHECK(cli({}).code == kExitInput);
  CHECK(cli({"--help"}).code == kExitOk);
}

TEST_CASE("deterministic runs are byte-identical") {
  const auto a = scratch("det_a"), b = scratch("det_b");
  for (const auto& d : {a, b}) {
    CHECK(cli({"extend", "--map", fx("loop_line.csv"), "--mesh", "256", "--deterministic", "--out", d.string()}).code ==
          kExitOk);
  }
  for (const char* f : {"distribution.json", "distribution.csv", "estimate.json", "extension.f64", "extension.f64.json"}) {
    CHECK_MESSAGE(slurp(a / f) == slurp(b / f), f);
  }
  // Thread count and output path do not enter the config hash.
  const auto c = scratch("det_c");
  cli({"extend", "--map", fx("loop_line.csv"), "--mesh", "256", "--deterministic", "--threads", "3", "--out",
       c.string()});
  CHECK(slurp(a / "distribution.json") == slurp(c / "distribution.json"));
  // Without the flag the timing field appears.
  cli({"energy", "--map", fx("constant_line.csv"), "--out", c.string()});
  CHECK(load(c / "energy.json").contains("elapsed_s"));
}
