#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "mixim/cli.hpp"
#include "mixim/rng.hpp"

namespace fs = std::filesystem;
using mixim::cli::run;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("mixim_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path write_input(const fs::path& dir, bool holes = true) {
  mixim::RngStream rng(1, 0);
  const auto path = dir / "in.csv";
  std::ofstream f(path);
  f << "x1,x2,y1,y2\n";
  for (int i = 0; i < 60; ++i) {
    const double x1 = rng.normal(), x2 = rng.normal();
    const double y1 = 1.0 + x1 + rng.normal();
    const int y2 = x2 + rng.normal() > 0 ? 1 : 0;
    f << x1 << ',' << x2 << ',';
    if (holes && i % 5 == 0) f << "NA"; else f << y1;
    f << ',';
    if (holes && i % 7 == 3) f << "NA"; else f << y2;
    f << '\n';
  }
  return path;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("usage errors exit with code 1") {
  CHECK(run(std::vector<std::string>{}) == 1);
  CHECK(run({"frobnicate"}) == 1);
  CHECK(run({"impute", "--bogus"}) == 1);
  CHECK(run({"impute", "--input", "/nonexistent.csv", "--response", "y=continuous"}) == 1);
  const auto dir = scratch("usage");
  const auto in = write_input(dir);
  CHECK(run({"--out", (dir / "o").string(), "impute", "--input", in.string(), "--response", "y1=weird"}) == 1);
  CHECK(run({"--out", (dir / "o").string(), "impute", "--input", in.string(), "--response", "nosuch=continuous"}) == 1);
  CHECK(run({"--out", (dir / "o").string(), "impute", "--input", in.string(), "--response", "y1=continuous", "--keep",
             "5", "--m", "10"}) == 1);
  CHECK(run({"check", "--suite", "nosuch"}) == 1);
}

TEST_CASE("unwritable output directory is a runtime error") {
  const auto dir = scratch("io");
  const auto in = write_input(dir);
  std::ofstream(dir / "blocker") << "x";
  CHECK(run({"--out", (dir / "blocker" / "sub").string(), "impute", "--input", in.string(), "--response",
             "y1=continuous", "--response", "y2=binary", "--burn-in", "2", "--keep", "4", "--m", "2"}) == 2);
}

TEST_CASE("impute writes datasets, manifest and diagnostics") {
  const auto dir = scratch("impute");
  const auto in = write_input(dir);
  const auto out = dir / "out";
  REQUIRE(run({"--seed", "3", "--out", out.string(), "impute", "--input", in.string(), "--response", "y1=continuous",
               "--response", "y2=binary", "--G", "3", "--burn-in", "10", "--keep", "20", "--m", "4"}) == 0);
  for (const char* f : {"imputed_001.csv", "imputed_004.csv", "manifest.json", "trace.csv", "diagnostics.json",
                        "final_params.json"}) {
    CHECK(fs::exists(out / f));
  }
  const auto manifest = nlohmann::json::parse(slurp(out / "manifest.json"));
  CHECK(manifest["seed"] == 3);
  CHECK(manifest["files"].size() == 4);
  CHECK(slurp(out / "imputed_002.csv").find("NA") == std::string::npos);
}

TEST_CASE("TOML config supplies options and rejects unknown keys") {
  const auto dir = scratch("config");
  const auto in = write_input(dir);
  {
    std::ofstream f(dir / "good.toml");
    f << "seed = 5\nout = \"" << (dir / "out").string() << "\"\n[impute]\ninput = \"" << in.string()
      << "\"\nresponse = [\"y1=continuous\", \"y2=binary\"]\nG = 2\nburn-in = 5\nkeep = 10\nm = 2\n";
  }
  CHECK(run({"--config", (dir / "good.toml").string(), "impute"}) == 0);
  CHECK(fs::exists(dir / "out" / "imputed_002.csv"));
  {
    std::ofstream f(dir / "bad.toml");
    f << "seed = 5\nmystery = 1\n";
  }
  CHECK(run({"--config", (dir / "bad.toml").string(), "check", "--suite", "prior_recovery"}) == 1);
}

TEST_CASE("ilb on complete data and on data with holes") {
  const auto dir = scratch("ilb");
  const auto full = write_input(dir, false);
  REQUIRE(run({"--out", (dir / "a").string(), "ilb", "--input", full.string(), "--response", "y1=continuous",
               "--response", "y2=binary", "--loss", "quantile:y1:0.5", "--B", "50"}) == 0);
  const auto summary = nlohmann::json::parse(slurp(dir / "a" / "ilb_summary.json"));
  CHECK(summary["source"] == "complete");
  CHECK(summary["B"] == 50);
  const auto holes = dir / "holes.csv";
  fs::copy_file(write_input(scratch("ilb_holes"), true), holes);
  REQUIRE(run({"--out", (dir / "b").string(), "ilb", "--input", holes.string(), "--response", "y1=continuous",
               "--response", "y2=binary", "--loss", "quadreg:y1:x1", "--B", "20", "--burn-in", "10", "--ilb-thin",
               "2", "--G", "2"}) == 0);
  CHECK(slurp(dir / "b" / "ilb_samples.csv").rfind("replicate,theta0,theta1,theta2", 0) == 0);
  CHECK(run({"--out", (dir / "c").string(), "ilb", "--input", holes.string(), "--response", "y1=continuous",
             "--response", "y2=binary", "--loss", "mean:nosuch"}) == 1);
}

TEST_CASE("check exits nonzero when a suite fails") {
  CHECK(run({"check", "--suite", "conjugate", "--quick"}) == 0);
  CHECK(run({"check", "--suite", "geweke", "--inject-fault", "alpha_kappa_sign"}) == 2);
}

TEST_CASE("impute and simulate are byte-identical across runs") {
  setenv("SOURCE_DATE_EPOCH", "1700000000", 1);
  const auto dir = scratch("determinism");
  const auto in = write_input(dir);
  for (const char* tag : {"r1", "r2"}) {
    REQUIRE(run({"--seed", "9", "--out", (dir / tag / "imp").string(), "impute", "--input", in.string(),
                 "--response", "y1=continuous", "--response", "y2=binary", "--burn-in", "5", "--keep", "10", "--m",
                 "3"}) == 0);
    REQUIRE(run({"--seed", "9", "--out", (dir / tag / "sim").string(), "simulate", "--scenario", "2", "--reps", "2",
                 "--population", "1000", "--sample-size", "100", "--burn-in", "5", "--keep", "20", "--B", "20"}) == 0);
  }
  for (const auto& e : fs::recursive_directory_iterator(dir / "r1")) {
    if (!e.is_regular_file()) continue;
    const auto other = dir / "r2" / fs::relative(e.path(), dir / "r1");
    CHECK_MESSAGE(slurp(e.path()) == slurp(other), e.path().string());
  }
  unsetenv("SOURCE_DATE_EPOCH");
}
