#pragma once

#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>
#include <string_view>
#include <vector>

namespace fractoid::suites {

/// JSON configuration with dotted-key access ("estimator.min_count").
/// Type mismatches raise ConfigError naming the key.
class Config {
 public:
  Config() : data_(nlohmann::json::object()) {}
  explicit Config(nlohmann::json data);

  static Config from_file(const std::filesystem::path& file);

  bool has(std::string_view key) const;
  double number(std::string_view key, double fallback) const;
  std::size_t count(std::string_view key, std::size_t fallback) const;
  std::uint64_t seed(std::uint64_t fallback = 1) const;
  std::string text(std::string_view key, std::string_view fallback) const;
  std::vector<double> numbers(std::string_view key, const std::vector<double>& fallback) const;

  /// Sets a dotted key; the value is read as JSON when it parses, else as a string.
  void set(std::string_view key, std::string_view value);
  /// Applies "key=value".
  void apply_override(std::string_view assignment);

  const nlohmann::json& json() const noexcept { return data_; }

 private:
  const nlohmann::json* find(std::string_view key) const;
  nlohmann::json data_;
};

/// One (x, value, standard error) column set for plotting.
struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> value;
  std::vector<double> standard_error;
};

struct Check {
  std::string name;
  int criterion = 0;
  double value = 0.0;
  double target = 0.0;
  double tolerance = 0.0;
  /// How value, target and tolerance combine, e.g. "|value - target| <= tolerance".
  std::string rule;
  bool pass = false;
  std::string detail;
  double runtime_seconds = 0.0;
  std::vector<Series> series;
};

struct SuiteReport {
  std::string suite;
  nlohmann::json config;
  std::vector<Check> checks;
  double runtime_seconds = 0.0;

  bool pass() const;
  /// Deterministic: runtimes are left out so repeated runs give identical bytes.
  nlohmann::json to_json() const;
  /// Human-readable table including runtimes.
  std::string table() const;
};

std::vector<std::string> suite_names();

/// Runs a named suite. A check whose computation throws a fractoid::Error fails
/// with the message as its detail; unknown suite names raise ConfigError listing the suites.
SuiteReport run_suite(std::string_view name, const Config& config);

/// Merged rows of several report files: suite, check, criterion, value, target,
/// tolerance, pass, source, sorted by suite then check.
struct MergedReport {
  struct Row {
    std::string suite;
    Check check;
    std::string source;
  };
  std::vector<Row> rows;
};

/// Reads every *.json report in `directory`. Empty directories and a check name
/// repeated across files raise ConfigError (naming both sources).
MergedReport merge_reports(const std::filesystem::path& directory);
/// Writes summary.csv and one plot CSV (x,value,stderr) per series.
void write_merged(const MergedReport& merged, const std::filesystem::path& out);

Check check_from_json(const nlohmann::json& j);

}  // namespace fractoid::suites
