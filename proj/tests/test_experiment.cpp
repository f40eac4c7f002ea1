#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "fixtures.hpp"
#include "uscatter/error.hpp"
#include "uscatter/experiment.hpp"

using namespace uscatter;
namespace fs = std::filesystem;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::Io;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("uscatter_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const std::string kU4 = USCATTER_TEST_DATA "/u4.cfg";

}  // namespace

TEST_CASE("config parsing") {
  const Config c = Config::parse("# comment\n\ngrid.p = 3\n  run.t_end=2.5  \nrun.seed = 18446744073709551615\n");
  CHECK(c.get_int("grid.p", 0) == 3);
  CHECK(c.get_double("run.t_end", 0.0) == 2.5);
  CHECK(c.get_seed("run.seed", 0) == 18446744073709551615ULL);
  CHECK(c.get("kernel.type", "constant") == "constant");
  CHECK(c.get_int("grid.n", 7) == 7);

  CHECK(code_of([] { Config::parse("grid.q = 1\n"); }) == ErrorCode::ConfigParse);
  CHECK(code_of([] { Config::parse("grid.p = 2\ngrid.p = 3\n"); }) == ErrorCode::ConfigParse);
  CHECK(code_of([] { Config::parse("grid.p\n"); }) == ErrorCode::ConfigParse);
  CHECK(code_of([] { Config::parse("grid.p = two\n").get_int("grid.p", 0); }) == ErrorCode::ConfigParse);
  CHECK(code_of([] { Config::parse("run.t_end = 1e\n").get_double("run.t_end", 0); }) == ErrorCode::ConfigParse);
  CHECK(code_of([] { Config::parse("run.seed = -1\n").get_seed("run.seed", 0); }) == ErrorCode::ConfigParse);
  CHECK(code_of([] { Config::load("/nonexistent/x.cfg"); }) == ErrorCode::Io);
}

TEST_CASE("config hash ignores layout and order") {
  const Config a = Config::parse("grid.p = 2\ngrid.n = 1\n");
  const Config b = Config::parse("# x\ngrid.n=1\n\ngrid.p   =   2\n");
  const Config c = Config::parse("grid.p = 3\ngrid.n = 1\n");
  CHECK(a.hash() == b.hash());
  CHECK(a.hash() != c.hash());
  // FNV-1a 64 of the empty input is the offset basis.
  CHECK(Config::parse("").hash() == 0xcbf29ce484222325ULL);
}

TEST_CASE("relative paths resolve against the config directory") {
  const Config c = Config::load(USCATTER_TEST_DATA "/negative_kernel.cfg");
  CHECK(c.resolve_path("negative_u4.csv") == (fs::path(USCATTER_TEST_DATA) / "negative_u4.csv").string());
  CHECK(c.resolve_path("/abs/path.csv") == "/abs/path.csv");
  CHECK(code_of([&] { Experiment::from_config(c); }) == ErrorCode::NegativeKernelValue);
}

TEST_CASE("experiment from the U4 config") {
  const Experiment e = Experiment::from_config(Config::load(kU4));
  CHECK(e.grid.cell_count() == 4);
  CHECK(e.t_end == 10.0);
  CHECK(e.sample_every == 10);
  CHECK(e.rescale_levels == std::vector<int>{0, 1, 2});
  const LatticeFunction n0 = e.n0();
  CHECK(n0[0] == 2.0);
  CHECK(integrate(e.grid, n0) == 1.0);
  const LatticeFunction v0 = e.v0();
  CHECK(integrate(e.grid, v0) == doctest::Approx(1.0).epsilon(1e-15));
  for (double v : v0.values()) CHECK(v > 0.0);
  // Same seed, same data.
  CHECK(fixtures::max_abs_diff(e.v0(), v0) == 0.0);
  const SteadyPair pair = e.steady_pair();
  for (double v : pair.steady.values()) CHECK(v == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(e.provenance().rfind("# uscatter p=2 n=1 M=1 m=1 k_mode=column_sum", 0) == 0);

  CHECK(code_of([] { Experiment::from_config(Config::load(kU4), 2); }) == ErrorCode::GridTooLarge);
}

TEST_CASE("lattice sources") {
  const Grid g = fixtures::u4_grid();
  const Config c;
  CHECK(fixtures::max_abs_diff(lattice_source("uniform", g, SplitMix64(1), c), LatticeFunction(g, 1.0)) == 0.0);
  CHECK(fixtures::max_abs_diff(lattice_source("constant:2.5", g, SplitMix64(1), c), LatticeFunction(g, 2.5)) == 0.0);
  CHECK(fixtures::max_abs_diff(lattice_source("values:1,2,3,4", g, SplitMix64(1), c),
                               LatticeFunction(g, {1, 2, 3, 4})) == 0.0);
  const LatticeFunction r = lattice_source("random", g, SplitMix64(4), c);
  for (double v : r.values()) {
    CHECK(v >= 0.2);
    CHECK(v <= 1.0);
  }
  CHECK(code_of([&] { lattice_source("values:1,2", g, SplitMix64(1), c); }) == ErrorCode::GridMismatch);
  CHECK(code_of([&] { lattice_source("bogus", g, SplitMix64(1), c); }) == ErrorCode::ConfigParse);
}

TEST_CASE("format_double round trips") {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 4.0, 1e22}) CHECK(std::stod(format_double(v)) == v);
  CHECK(format_double(0.5) == "0.5");
}

TEST_CASE("run_experiment writes outputs") {
  const fs::path dir = scratch("run");
  std::ostringstream out, err;
  CHECK(run_experiment("steady", kU4, dir.string(), out, err) == kExitOk);
  const std::string steady = slurp(dir / "steady.csv");
  CHECK(steady.rfind("# uscatter p=2", 0) == 0);
  CHECK(steady.find("cell,N,phi\n") != std::string::npos);
  const auto row = steady.find("\n0,");
  REQUIRE(row != std::string::npos);
  CHECK(std::stod(steady.substr(row + 3)) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(steady.find(",1\n", row) != std::string::npos);

  CHECK(run_experiment("alpha", kU4, dir.string(), out, err) == kExitOk);
  CHECK(slurp(dir / "alpha.csv").find("alpha,4") != std::string::npos);

  CHECK(run_experiment("simulate", kU4, dir.string(), out, err) == kExitOk);
  const std::string traj = slurp(dir / "trajectory.csv");
  CHECK(traj.find("\n0,2,0,0,0\n") != std::string::npos);
  CHECK(fs::exists(dir / "diagnostics.csv"));

  for (const char* cmd : {"decay", "rescale", "stability"}) {
    std::ostringstream e2;
    CHECK_MESSAGE(run_experiment(cmd, kU4, dir.string(), out, e2) == kExitOk, cmd << ": " << e2.str());
  }

  CHECK(run_experiment("bogus", kU4, dir.string(), out, err) == kExitError);
  std::ostringstream neg;
  CHECK(run_experiment("simulate", USCATTER_TEST_DATA "/negative_kernel.cfg", dir.string(), out, neg) == kExitError);
  CHECK(neg.str().find("NegativeKernelValue") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("check subcommand on U4 passes every row") {
  const fs::path dir = scratch("check");
  std::ostringstream out, err;
  CHECK(run_experiment("check", kU4, dir.string(), out, err) == kExitOk);
  const std::string csv = slurp(dir / "check.csv");
  CHECK(csv.find(",false\n") == std::string::npos);
  CHECK(csv.find("alpha_positive") != std::string::npos);
  CHECK(out.str().find("FAIL") == std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("analytic mode and time-dependent kernels from config") {
  const fs::path dir = scratch("td");
  const fs::path cfg = dir / "td.cfg";
  std::ofstream(cfg) << "grid.p = 3\ngrid.n = 1\ngrid.M = 1\ngrid.m = 1\n"
                        "kernel.type = radial\nkernel.profile = power\nkernel.exponent = 1\nkernel.diagonal = 0\n"
                        "kernel.modulation = exp_decay\nkernel.modulation_rate = 0.5\n"
                        "initial.type = random_positive\nrun.t_end = 2\nrun.seed = 7\n";
  std::ostringstream out, err;
  CHECK_MESSAGE(run_experiment("check", cfg.string(), (dir / "o").string(), out, err) == kExitOk, err.str());
  CHECK(run_experiment("decay", cfg.string(), (dir / "o").string(), out, err) == kExitError);

  const fs::path an = dir / "an.cfg";
  std::ofstream(an) << "grid.p = 2\ngrid.n = 1\ngrid.M = 1\ngrid.m = 1\nkernel.type = constant\n"
                       "generator.k_mode = analytic\n";
  std::ostringstream e2;
  CHECK(run_experiment("steady", an.string(), (dir / "o").string(), out, e2) == kExitError);
  CHECK(e2.str().find("MissingAnalyticK") != std::string::npos);
  fs::remove_all(dir);
}
