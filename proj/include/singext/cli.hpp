#pragma once

#include <iosfwd>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "singext/conformal.hpp"
#include "singext/cubes.hpp"

namespace singext {

// Exit codes of the command-line front end.
enum ExitCode { kExitOk = 0, kExitInput = 1, kExitDivergence = 2, kExitInvariant = 3 };

struct RunConfig {
  std::string command;
  std::string manifold_path;
  std::string map_path;
  std::string spec_path;
  std::string fit_path;
  LambdaMode mode = LambdaMode::general;
  double eta = 0.5;
  double c1 = 0.01;
  int mesh = 1024;
  std::optional<double> slab_min;
  std::optional<double> delta;
  std::optional<double> K;
  std::string out = ".";
  bool deterministic = false;
  int threads = 1;
  TransportDirection direction = TransportDirection::ball_to_half_space;
  TailPolicy policy = TailPolicy::strict;
  double cap_radius = 0.25;
  std::size_t samples = 10000;
  std::vector<double> radii;

  // InvalidInput unless eta in (0, 1), c1 > 0 and mesh a power of two >= 16.
  void validate() const;
  // Everything that affects results; output path and thread count excluded.
  nlohmann::json to_json() const;
};

// Runs one command and writes its artifacts under cfg.out. Returns an ExitCode.
int run_command(const RunConfig& cfg, std::ostream& out, std::ostream& err);

// Parses argv (subcommand first) and runs it.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace singext
