#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string out;
  std::string err;
};

Result run(const std::string& args) {
  const fs::path dir = fs::current_path() / "cli_capture";
  fs::create_directories(dir);
  const std::string cmd = std::string("\"") + USCATTER_CLI + "\" " + args + " >" + (dir / "out.txt").string() +
                          " 2>" + (dir / "err.txt").string();
  const int status = std::system(cmd.c_str());
  Result r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  r.out = slurp(dir / "out.txt");
  r.err = slurp(dir / "err.txt");
  return r;
}

const std::string kData = USCATTER_TEST_DATA;

}  // namespace

TEST_CASE("negative kernel table is rejected with exit code 1") {
  const Result r = run("simulate --config " + kData + "/negative_kernel.cfg --out cli_neg");
  CHECK(r.code == 1);
  CHECK(r.err.find("NegativeKernelValue") != std::string::npos);
}

TEST_CASE("steady and decay on U4") {
  const Result s = run("steady --config " + kData + "/u4.cfg --out cli_u4");
  CHECK(s.code == 0);
  CHECK(s.out.find("rho") != std::string::npos);
  CHECK(fs::exists("cli_u4/steady.csv"));
  const Result d = run("decay --config " + kData + "/u4.cfg --out cli_u4");
  CHECK(d.code == 0);
  CHECK(fs::exists("cli_u4/decay.csv"));
}

TEST_CASE("usage errors") {
  CHECK(run("").code == 1);
  CHECK(run("steady").code == 1);
  CHECK(run("steady --config /nonexistent.cfg").code == 1);
  CHECK(run("launch --config " + kData + "/u4.cfg").code == 1);
  CHECK(run("--help").code == 0);

  std::ofstream("cli_bad.cfg") << "grid.p = 2\ngrid.colour = blue\n";
  const Result bad = run("steady --config cli_bad.cfg --out cli_bad");
  CHECK(bad.code == 1);
  CHECK(bad.err.find("ConfigParse") != std::string::npos);
}
