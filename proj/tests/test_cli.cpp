#include <doctest.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "fractoid/error.hpp"
#include "fractoid/suites.hpp"

namespace fs = std::filesystem;
using namespace fractoid;
using fractoid::suites::Config;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result fractoid_cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("fractoid_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void write_report(const fs::path& file, const std::string& suite, const std::vector<std::string>& checks) {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& c : checks)
    list.push_back({{"name", c}, {"criterion", 1}, {"value", 0.5}, {"target", 0.0}, {"tolerance", 1.0},
                    {"rule", "value <= tolerance"}, {"pass", true}, {"detail", ""}});
  std::ofstream(file) << nlohmann::json{{"suite", suite}, {"config", {}}, {"pass", true}, {"checks", list}}.dump();
}

}  // namespace

TEST_CASE("config keys, overrides and type errors") {
  Config c(nlohmann::json::parse(R"j({"N": 100, "estimator": {"min_count": 50}, "drift": "ou(1)"})j"));
  CHECK(c.count("N", 1) == 100);
  CHECK(c.count("estimator.min_count", 1) == 50);
  CHECK(c.number("T", 2.5) == 2.5);
  c.apply_override("estimator.min_count=75");
  c.apply_override("times=[0.25,0.5]");
  c.apply_override("chart=sphere2");
  CHECK(c.count("estimator.min_count", 1) == 75);
  CHECK(c.numbers("times", {}) == std::vector<double>{0.25, 0.5});
  CHECK(c.text("chart", "") == "sphere2");
  CHECK_THROWS_AS(c.number("drift", 0.0), ConfigError);
  CHECK_THROWS_AS(c.count("times", 0), ConfigError);
  CHECK_THROWS_AS(c.apply_override("no-equals-sign"), ConfigError);
  CHECK_THROWS_AS(Config(nlohmann::json::array()), ConfigError);
}

TEST_CASE("simulate is deterministic and validates its inputs") {
  const fs::path dir = scratch("simulate");
  const std::vector<std::string> base{"simulate", "--set", "N=50", "--set", "T=0.1", "--set", "drift=ou(0.5)",
                                      "--seed", "9"};
  auto a = base, b = base;
  a.insert(a.end(), {"--out", (dir / "a").string()});
  b.insert(b.end(), {"--out", (dir / "b").string()});
  REQUIRE(fractoid_cli(a).code == 0);
  REQUIRE(fractoid_cli(b).code == 0);
  CHECK(slurp(dir / "a" / "paths.csv") == slurp(dir / "b" / "paths.csv"));
  CHECK(slurp(dir / "a" / "manifest.json") == slurp(dir / "b" / "manifest.json"));
  CHECK(nlohmann::json::parse(slurp(dir / "a" / "manifest.json")).at("seed") == 9);

  const auto sphere3 = fractoid_cli({"simulate", "--set", "chart=sphere3", "--seed", "1", "--out", dir.string()});
  CHECK(sphere3.code == cli::config_error);
  CHECK(sphere3.err.find("'chart'") != std::string::npos);
  CHECK(sphere3.err.find("sphere3") != std::string::npos);

  const auto empty = fractoid_cli({"simulate", "--set", "N=0", "--seed", "1", "--out", dir.string()});
  CHECK(empty.code == cli::config_error);
  CHECK(empty.err.find("parameter error") != std::string::npos);

  CHECK(fractoid_cli({"simulate", "--out", dir.string()}).err.find("'seed'") != std::string::npos);
  CHECK(fractoid_cli({"simulate", "--set", "drift=spiral", "--seed", "1"}).code == cli::config_error);
  CHECK(fractoid_cli({"frobnicate"}).code == cli::config_error);
}

TEST_CASE("simulate on a curved chart and estimate from the files") {
  const fs::path dir = scratch("estimate");
  REQUIRE(fractoid_cli({"simulate", "--set", "chart=sphere2", "--set", "x0=[1.5, 0.0]", "--set", "N=200", "--set",
                        "T=0.05", "--seed", "3", "--out", (dir / "sim").string()})
              .code == 0);
  CHECK(nlohmann::json::parse(slurp(dir / "sim" / "manifest.json")).at("chart") == "sphere2");

  REQUIRE(fractoid_cli({"simulate", "--set", "N=4000", "--set", "T=1", "--seed", "5", "--out", (dir / "w").string()})
              .code == 0);
  const auto est = fractoid_cli({"estimate", "--set", "input=" + (dir / "w" / "paths.csv").string(), "--set",
                                 "estimator.cells=4", "--out", (dir / "est").string()});
  CHECK(est.code == 0);
  CHECK(fs::exists(dir / "est" / "field.csv"));
  CHECK(nlohmann::json::parse(slurp(dir / "est" / "estimate.json")).at("populated").get<int>() > 0);
  CHECK(fractoid_cli({"estimate"}).code == cli::config_error);
}

TEST_CASE("verify writes a report and maps failures to exit codes") {
  const fs::path dir = scratch("verify");
  const auto start = std::chrono::steady_clock::now();
  const auto dirac = fractoid_cli({"verify", "dirac-algebra", "--out", dir.string()});
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  CHECK(dirac.code == 0);
  CHECK(seconds < 1.0);
  CHECK(dirac.out.find("PASS") != std::string::npos);
  const auto j = nlohmann::json::parse(slurp(dir / "dirac-algebra.json"));
  CHECK(j.at("pass") == true);
  CHECK(!j.at("checks").empty());
  CHECK(fs::exists(dir / "dirac-algebra.txt"));

  const auto starved = fractoid_cli({"verify", "nelson-ho", "--set", "N=10", "--out", dir.string()});
  CHECK(starved.code == cli::check_failure);
  CHECK(starved.out.find("insufficient samples") != std::string::npos);

  const auto unknown = fractoid_cli({"verify", "nope"});
  CHECK(unknown.code == cli::config_error);
  for (const auto& name : suites::suite_names()) CHECK(unknown.err.find(name) != std::string::npos);
}

TEST_CASE("verify output is byte-identical across runs and worker counts") {
  const fs::path dir = scratch("determinism");
  const std::vector<std::string> args{"verify", "fractal-dim", "--set", "N=500"};
  auto run_into = [&](const std::string& sub) {
    auto a = args;
    a.insert(a.end(), {"--out", (dir / sub).string()});
    const int code = fractoid_cli(a).code;
    REQUIRE((code == cli::pass || code == cli::check_failure));
    return slurp(dir / sub / "fractal-dim.json");
  };
  const std::string first = run_into("a");
  CHECK(first == run_into("b"));
  const char* saved = std::getenv("FRACTOID_THREADS");
  const std::string previous = saved ? saved : "";
  setenv("FRACTOID_THREADS", "3", 1);
  const std::string threaded = run_into("c");
  setenv("FRACTOID_THREADS", "1", 1);
  const std::string serial = run_into("d");
  if (saved) setenv("FRACTOID_THREADS", previous.c_str(), 1);
  else unsetenv("FRACTOID_THREADS");
  CHECK(first == threaded);
  CHECK(first == serial);
}

TEST_CASE("report merges suite reports") {
  SUBCASE("single report is an identity merge") {
    const fs::path dir = scratch("report_single");
    write_report(dir / "one.json", "alpha", {"b-check", "a-check"});
    const auto merged = suites::merge_reports(dir);
    REQUIRE(merged.rows.size() == 2);
    CHECK(merged.rows[0].check.name == "a-check");
    CHECK(merged.rows[1].check.name == "b-check");
    CHECK(merged.rows[0].check.value == 0.5);
    CHECK(merged.rows[0].source == "one.json");
  }
  SUBCASE("disjoint suites give a sorted row union") {
    const fs::path dir = scratch("report_union");
    write_report(dir / "1.json", "zeta", {"z1"});
    write_report(dir / "2.json", "alpha", {"x", "a"});
    const auto r = fractoid_cli({"report", dir.string()});
    CHECK(r.code == 0);
    std::istringstream csv(slurp(dir / "summary.csv"));
    std::string line;
    std::vector<std::string> lines;
    while (std::getline(csv, line)) lines.push_back(line);
    REQUIRE(lines.size() == 4);
    CHECK(lines[1].rfind("alpha,a,", 0) == 0);
    CHECK(lines[2].rfind("alpha,x,", 0) == 0);
    CHECK(lines[3].rfind("zeta,z1,", 0) == 0);
  }
  SUBCASE("duplicate check names name both sources") {
    const fs::path dir = scratch("report_duplicate");
    write_report(dir / "first.json", "alpha", {"same"});
    write_report(dir / "second.json", "alpha", {"same"});
    const auto r = fractoid_cli({"report", dir.string()});
    CHECK(r.code == cli::config_error);
    CHECK(r.err.find("first.json") != std::string::npos);
    CHECK(r.err.find("second.json") != std::string::npos);
  }
  SUBCASE("empty directory is an error") {
    CHECK(fractoid_cli({"report", scratch("report_empty").string()}).code == cli::config_error);
  }
  SUBCASE("series become plot files") {
    const fs::path dir = scratch("report_plot");
    REQUIRE(fractoid_cli({"verify", "dirac-algebra", "--out", dir.string()}).code == 0);
    REQUIRE(fractoid_cli({"report", dir.string(), "--out", (dir / "merged").string()}).code == 0);
    const auto plot = dir / "merged" / "plot_dirac-algebra_dirac_dalembertian-order_error.csv";
    REQUIRE(fs::exists(plot));
    CHECK(slurp(plot).rfind("x,value,stderr\n", 0) == 0);
  }
}

TEST_CASE("noise and dirac commands") {
  const fs::path dir = scratch("noise");
  const auto noise = fractoid_cli({"noise", "--set", R"(lattice={"horizon":1,"dt":0.25,"half_width":1,"dx":0.5,"spatial_dimension":2})",
                                   "--set", "test_function=bump(0.5, 0.25)", "--seed", "4", "--out", dir.string()});
  CHECK(noise.code == 0);
  CHECK(noise.out.find("W(bump") != std::string::npos);
  CHECK(fs::file_size(dir / "noise.bin") == 4 * 4 * 4 * sizeof(double));

  const auto dirac = fractoid_cli({"dirac", "--set", "momentum=[0.3,-0.2,1.0]", "--set", "mass=2", "--out", dir.string()});
  CHECK(dirac.code == 0);
  CHECK(nlohmann::json::parse(slurp(dir / "gammas.json")).at("clifford_sign") == 1);
  CHECK(fractoid_cli({"dirac", "--set", "convention=weyl", "--out", dir.string()}).code == cli::config_error);
}
