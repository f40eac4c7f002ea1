// uscatter <subcommand> --config <path> [--out <dir>]

#include <string>

#include "CLI11.hpp"
#include "uscatter/uscatter.h"

int main(int argc, char** argv) {
  CLI::App app{"Linear scattering on truncated p-adic lattices"};
  app.require_subcommand(1);
  app.set_version_flag("--version", us_version());

  std::string config;
  std::string out = ".";
  const char* commands[][2] = {
      {"simulate", "Evolve n0 and write trajectory.csv and diagnostics.csv"},
      {"steady", "Solve for the steady pair (N, phi)"},
      {"alpha", "Estimate the Poincare constant alpha"},
      {"decay", "Simulate, fit the decay rate and compare with alpha"},
      {"rescale", "L2 norms of the rescaled problems against e^{L1 t}"},
      {"stability", "L1 distance between two solutions"},
      {"check", "Run the full property suite on the configured instance"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config, "Experiment config file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out, "Output directory");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  return us_run_experiment(app.get_subcommands().front()->get_name().c_str(), config.c_str(), out.c_str());
}
