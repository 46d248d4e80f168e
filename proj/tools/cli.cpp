#include "cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <regex>

#include "fractoid/dirac.hpp"
#include "fractoid/error.hpp"
#include "fractoid/geometry.hpp"
#include "fractoid/meanderiv.hpp"
#include "fractoid/nelson.hpp"
#include "fractoid/stochastic.hpp"
#include "fractoid/suites.hpp"
#include "fractoid/whitenoise.hpp"

namespace fractoid::cli {

namespace {

namespace fs = std::filesystem;
using suites::Config;

struct Common {
  std::string config_file;
  std::vector<std::string> overrides;
  std::string out = "out";
  std::optional<std::uint64_t> seed;
};

Config load(const Common& common) {
  Config config = common.config_file.empty() ? Config() : Config::from_file(common.config_file);
  for (const auto& o : common.overrides) config.apply_override(o);
  if (common.seed) config.set("seed", std::to_string(*common.seed));
  return config;
}

std::uint64_t required_seed(const Config& config) {
  if (!config.has("seed")) throw ConfigError("config key 'seed' is required (use --seed or --set seed=S)");
  return config.seed();
}

void write_json(const nlohmann::json& j, const fs::path& file) {
  std::ofstream out(file);
  if (!out) throw ResourceError("cannot write " + file.string());
  out << j.dump(2) << '\n';
}

geometry::MetricChart chart_from(const Config& config) {
  const std::string name = config.text("chart", "euclidean:1");
  try {
    return geometry::make_chart(name);
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("config key 'chart': ") + e.what());
  }
}

/// "zero", "constant(b)", "ou(theta)" (−θx) and "nelson-ho" (harmonic ground-state drift).
struct DriftChoice {
  TimeVectorField field;
  std::string name;
  std::optional<double> epsilon;
};

DriftChoice drift_from(const Config& config, int dimension) {
  const std::string name = config.text("drift", "zero");
  static const std::regex call(R"(^\s*([a-z-]+)\s*(?:\(\s*([-+0-9.eE]+)\s*\))?\s*$)");
  std::smatch m;
  if (std::regex_match(name, m, call)) {
    const std::string head = m[1];
    const bool has_arg = m[2].matched;
    const double arg = has_arg ? std::stod(m[2]) : 0.0;
    if (head == "zero" && !has_arg)
      return {[dimension](double, const Vec&) -> Vec { return Vec::Zero(dimension); }, name, {}};
    if (head == "constant" && has_arg)
      return {[dimension, arg](double, const Vec&) -> Vec { return Vec::Constant(dimension, arg); }, name, {}};
    if (head == "ou" && has_arg) return {[arg](double, const Vec& x) -> Vec { return -arg * x; }, name, {}};
    if (head == "nelson-ho" && !has_arg) {
      const double omega = config.number("omega", 1.0), hbar = config.number("hbar", 1.0),
                   mass = config.number("mass", 1.0);
      const auto psi = nelson::named_wavefunction("ho-ground(" + std::to_string(omega) + ")", hbar, mass);
      auto spec = nelson::drift_from_wavefunction(psi, dimension, hbar, mass).forward_process();
      return {spec.drift, name, spec.diffusion_const};
    }
  }
  throw ConfigError("config key 'drift': unknown drift '" + name + "' (known: zero, constant(b), ou(theta), nelson-ho)");
}

Vec vector_from(const Config& config, std::string_view key, int dimension, double fallback) {
  const auto values = config.numbers(key, std::vector<double>(static_cast<std::size_t>(dimension), fallback));
  if (values.size() == 1) return Vec::Constant(dimension, values[0]);
  if (values.size() != static_cast<std::size_t>(dimension))
    throw ConfigError("config key '" + std::string(key) + "' needs " + std::to_string(dimension) + " entries");
  return Eigen::Map<const Vec>(values.data(), dimension);
}

int simulate(const Config& config, const fs::path& out, std::ostream& log) {
  const auto chart = chart_from(config);
  const int d = chart.dimension();
  const auto drift = drift_from(config, d);
  const std::uint64_t seed = required_seed(config);
  const double epsilon = drift.epsilon.value_or(config.number("epsilon", 1.0));
  const std::size_t n = config.count("N", 1000);
  const double horizon = config.number("T", 1.0), dt = config.number("dt", 0.01);
  const Vec x0 = vector_from(config, "x0", d, 0.0);

  stochastic::PathEnsemble e;
  if (chart.name().rfind("euclidean:", 0) == 0) {
    e = stochastic::simulate_ito({drift.field, epsilon, d, {}, 0, drift.name}, x0, horizon, dt, n, seed);
  } else {
    e = stochastic::simulate_manifold_diffusion(chart, drift.field, x0, horizon, dt, n, seed, epsilon);
    e.drift_name = drift.name;
  }
  fs::create_directories(out);
  const std::string format = config.text("format", "csv");
  if (format == "csv") {
    stochastic::write_csv(e, out / "paths.csv");
  } else if (format == "binary") {
    stochastic::write_binary(e, out / "paths.bin");
  } else {
    throw ConfigError("config key 'format': expected csv or binary, got '" + format + "'");
  }
  stochastic::write_manifest(e, out / "manifest.json");
  log << "simulated " << e.paths() << " paths of " << e.steps() << " steps on " << e.chart_name << " -> "
      << out.string() << '\n';
  return pass;
}

int estimate(const Config& config, const fs::path& out, std::ostream& log) {
  if (!config.has("input")) throw ConfigError("config key 'input' is required (ensemble CSV or .bin file)");
  const fs::path input = config.text("input", "");
  const auto e = input.extension() == ".bin" ? stochastic::read_binary(input) : stochastic::read_csv(input);
  const int d = e.dimension();

  meanderiv::EstimatorConfig c;
  c.grid.windows = meanderiv::windows_at(e, config.numbers("times", {0.5 * e.horizon()}));
  c.grid.lower = vector_from(config, "estimator.lower", d, -2.0);
  c.grid.upper = vector_from(config, "estimator.upper", d, 2.0);
  const auto cells = config.numbers("estimator.cells", std::vector<double>(static_cast<std::size_t>(d), 8.0));
  for (double v : cells) c.grid.cells.push_back(static_cast<int>(v));
  if (c.grid.cells.size() == 1 && d > 1) c.grid.cells.assign(static_cast<std::size_t>(d), c.grid.cells[0]);
  c.min_count = config.count("estimator.min_count", 200);
  c.lag = config.count("estimator.lag", 1);

  const auto field = meanderiv::velocity_fields(meanderiv::estimate_forward(e, c), meanderiv::estimate_backward(e, c));
  fs::create_directories(out);
  meanderiv::write_field_csv(field, out / "field.csv");
  std::size_t populated = 0;
  for (std::size_t b = 0; b < field.size(); ++b) populated += field.populated(b) ? 1 : 0;
  write_json({{"input", input.string()},
              {"estimator", meanderiv::config_manifest(c)},
              {"bins", field.size()},
              {"populated", populated}},
             out / "estimate.json");
  log << populated << " of " << field.size() << " bins populated -> " << (out / "field.csv").string() << '\n';
  if (populated == 0) {
    log << "insufficient samples: no bin reached min_count " << c.min_count << '\n';
    return check_failure;
  }
  return pass;
}

int verify(const std::string& suite, Config config, const fs::path& out, std::ostream& log) {
  if (!config.has("seed")) config.set("seed", "1");
  const auto report = suites::run_suite(suite, config);
  fs::create_directories(out);
  write_json(report.to_json(), out / (report.suite + ".json"));
  const std::string table = report.table();
  std::ofstream(out / (report.suite + ".txt")) << table;
  log << table;
  return report.pass() ? pass : check_failure;
}

int noise(const Config& config, const fs::path& out, std::ostream& log) {
  whitenoise::SpaceTimeLattice lattice;
  if (config.has("lattice")) lattice = whitenoise::lattice_from_json(config.json().at("lattice"));
  const auto sample = whitenoise::sample_white_noise(lattice, required_seed(config), config.count("stream", 0));
  fs::create_directories(out);
  whitenoise::write_sample(sample, out / "noise.bin", out / "noise.json");
  log << "sampled " << sample.values.size() << " cells -> " << (out / "noise.bin").string() << '\n';
  if (config.has("test_function")) {
    const std::string name = config.text("test_function", "");
    const auto w = whitenoise::named_test_function(name, lattice.spatial_dimension);
    const auto discrete = whitenoise::discretize(lattice, w);
    log << std::setprecision(10) << "W(" << name << ") = " << whitenoise::paley_wiener_integral(sample, discrete)
        << ", |w|^2 = " << whitenoise::inner_product(lattice, discrete, discrete) << '\n';
  }
  return pass;
}

int dirac_command(const Config& config, const fs::path& out, std::ostream& log) {
  const auto gammas = dirac::build_gammas(config.text("convention", "dirac-basis"));
  const auto p = config.numbers("momentum", {0.6, 0.0, 0.0});
  if (p.size() != 3) throw ConfigError("config key 'momentum' needs 3 entries");
  const double mass = config.number("mass", 1.0);
  const auto wave = dirac::dirac_plane_wave(Eigen::Vector3d(p[0], p[1], p[2]), mass, gammas);
  const double anticommutator = dirac::anticommutator_defect(gammas);
  const double chirality = dirac::chirality_defect(gammas);
  const double kg = dirac::klein_gordon_residual(wave.p, mass);
  const double residual = dirac::dirac_residual(wave.p, mass, wave.u, gammas);
  const int sign = dirac::clifford_sign(gammas);

  fs::create_directories(out);
  auto j = dirac::gammas_to_json(gammas);
  j["clifford_sign"] = sign;
  write_json(j, out / "gammas.json");
  log << std::setprecision(3) << "convention " << gammas.convention << "\nanticommutator defect " << anticommutator
      << "\nchirality defect " << chirality << "\nclifford sign " << sign << "\nplane wave p = (" << wave.p.transpose()
      << "), null space " << wave.null_space.cols() << "\nklein-gordon residual " << kg << "\ndirac residual "
      << residual << '\n';
  const bool ok = anticommutator <= 1e-15 && chirality <= 1e-15 && kg <= 1e-12 && residual <= 1e-12;
  return ok ? pass : check_failure;
}

int report(const fs::path& directory, const std::optional<fs::path>& out, std::ostream& log) {
  const auto merged = suites::merge_reports(directory);
  const fs::path target = out.value_or(directory);
  suites::write_merged(merged, target);
  bool all = true;
  for (const auto& row : merged.rows) {
    log << std::left << std::setw(22) << row.suite << std::setw(40) << row.check.name
        << (row.check.pass ? "pass" : "FAIL") << '\n';
    all = all && row.check.pass;
  }
  log << merged.rows.size() << " checks -> " << (target / "summary.csv").string() << '\n';
  return all ? pass : check_failure;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"fractoid: numerical lab for stochastic mechanics", "fractoid"};
  app.require_subcommand(1);
  app.fallthrough();
  Common common;
  bool out_given = false;
  app.add_option("--config", common.config_file, "JSON config file");
  app.add_option("--set", common.overrides, "override a config key (key=value, repeatable)")->allow_extra_args(false);
  app.add_option_function<std::string>(
      "--out", [&](const std::string& v) { common.out = v, out_given = true; }, "output directory");
  app.add_option_function<std::uint64_t>(
      "--seed", [&](std::uint64_t s) { common.seed = s; }, "random seed");

  std::string suite;
  std::string directory;
  auto* simulate_cmd = app.add_subcommand("simulate", "simulate a path ensemble");
  auto* estimate_cmd = app.add_subcommand("estimate", "estimate mean derivatives of an ensemble");
  auto* verify_cmd = app.add_subcommand("verify", "run a verification suite");
  verify_cmd->add_option("suite", suite, "suite name")->required();
  auto* noise_cmd = app.add_subcommand("noise", "sample lattice white noise");
  auto* dirac_cmd = app.add_subcommand("dirac", "gamma matrices and plane-wave checks");
  auto* report_cmd = app.add_subcommand("report", "merge suite reports");
  report_cmd->add_option("directory", directory, "directory of suite reports")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return pass;
  } catch (const CLI::ParseError& e) {
    err << e.what() << '\n';
    return config_error;
  }

  try {
    const fs::path out_dir = common.out;
    if (report_cmd->parsed())
      return report(directory, out_given ? std::optional<fs::path>(out_dir) : std::nullopt, out);
    const Config config = load(common);
    if (simulate_cmd->parsed()) return simulate(config, out_dir, out);
    if (estimate_cmd->parsed()) return estimate(config, out_dir, out);
    if (verify_cmd->parsed()) return verify(suite, config, out_dir, out);
    if (noise_cmd->parsed()) return noise(config, out_dir, out);
    if (dirac_cmd->parsed()) return dirac_command(config, out_dir, out);
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << '\n';
    return config_error;
  } catch (const ParameterError& e) {
    err << "parameter error: " << e.what() << '\n';
    return config_error;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return runtime_error;
  }
  return config_error;
}

}  // namespace fractoid::cli
