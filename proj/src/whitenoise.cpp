#include "fractoid/whitenoise.hpp"

#include <bit>
#include <cmath>
#include <fstream>

#include "fractoid/error.hpp"
#include "fractoid/expression.hpp"
#include "fractoid/parallel.hpp"
#include "fractoid/rng.hpp"
#include "fractoid/stats.hpp"

namespace fractoid::whitenoise {

namespace {

constexpr std::size_t kFillBlock = 4096;

std::size_t divide(double extent, double step, const char* what) {
  if (!(step > 0.0) || !std::isfinite(step)) throw ParameterError(std::string(what) + " step must be positive");
  if (!(extent > 0.0) || !std::isfinite(extent)) throw ParameterError(std::string(what) + " extent must be positive");
  const double n = extent / step;
  const double r = std::round(n);
  if (r < 1.0 || std::abs(n - r) > 1e-9 * r)
    throw ParameterError(std::string(what) + " extent " + std::to_string(extent) + " is not a multiple of step " +
                         std::to_string(step));
  return static_cast<std::size_t>(r);
}

// Σ_c w[c] z_c over the normals of one stream, in fixed blocks.
double weighted_normal_sum(const NormalStream& rng, const std::vector<double>& w, std::vector<double>& buffer) {
  double sum = 0.0;
  for (std::size_t begin = 0; begin < w.size(); begin += kFillBlock) {
    const std::size_t n = std::min(kFillBlock, w.size() - begin);
    rng.fill(begin, buffer.data(), n);
    for (std::size_t i = 0; i < n; ++i) sum += w[begin + i] * buffer[i];
  }
  return sum;
}

void require_size(const SpaceTimeLattice& lattice, const std::vector<double>& w, const char* what) {
  if (w.size() != lattice.size())
    throw ParameterError(std::string(what) + " has " + std::to_string(w.size()) + " values but the lattice has " +
                         std::to_string(lattice.size()) + " cells");
}

}  // namespace

std::size_t SpaceTimeLattice::time_cells() const { return divide(horizon, dt, "time"); }

std::size_t SpaceTimeLattice::space_cells_per_axis() const { return divide(2.0 * half_width, dx, "space"); }

std::size_t SpaceTimeLattice::size() const {
  std::size_t n = time_cells();
  for (int i = 0; i < spatial_dimension; ++i) n *= space_cells_per_axis();
  return n;
}

double SpaceTimeLattice::cell_volume() const { return dt * std::pow(dx, spatial_dimension); }

Vec SpaceTimeLattice::center(std::size_t cell) const {
  const std::size_t nx = space_cells_per_axis();
  Vec y(1 + spatial_dimension);
  for (int a = spatial_dimension; a >= 1; --a) {
    y[a] = -half_width + (static_cast<double>(cell % nx) + 0.5) * dx;
    cell /= nx;
  }
  y[0] = (static_cast<double>(cell) + 0.5) * dt;
  return y;
}

void SpaceTimeLattice::validate() const {
  if (spatial_dimension < 0) throw ParameterError("spatial dimension must be non-negative");
  const double cells = static_cast<double>(time_cells()) * std::pow(static_cast<double>(space_cells_per_axis()),
                                                                     spatial_dimension);
  if (cells > static_cast<double>(max_cells))
    throw ResourceError("lattice has " + std::to_string(cells) + " cells, above the cap of " +
                        std::to_string(max_cells));
}

nlohmann::json to_json(const SpaceTimeLattice& l) {
  return {{"horizon", l.horizon},   {"dt", l.dt}, {"half_width", l.half_width},
          {"dx", l.dx},             {"spatial_dimension", l.spatial_dimension},
          {"max_cells", l.max_cells}};
}

SpaceTimeLattice lattice_from_json(const nlohmann::json& j) {
  SpaceTimeLattice l;
  try {
    l.horizon = j.value("horizon", l.horizon);
    l.dt = j.value("dt", l.dt);
    l.half_width = j.value("half_width", l.half_width);
    l.dx = j.value("dx", l.dx);
    l.spatial_dimension = j.value("spatial_dimension", l.spatial_dimension);
    l.max_cells = j.value("max_cells", l.max_cells);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("lattice: ") + e.what());
  }
  return l;
}

WhiteNoiseSample sample_white_noise(const SpaceTimeLattice& lattice, std::uint64_t seed, std::uint64_t stream) {
  lattice.validate();
  WhiteNoiseSample s{lattice, seed, stream, std::vector<double>(lattice.size())};
  const double scale = 1.0 / std::sqrt(lattice.cell_volume());
  const NormalStream rng(seed, stream);
  parallel_chunks(s.values.size(), 1 << 16, [&](std::size_t, std::size_t begin, std::size_t end) {
    rng.fill(begin, s.values.data() + begin, end - begin);
    for (std::size_t c = begin; c < end; ++c) s.values[c] *= scale;
  });
  return s;
}

std::vector<double> discretize(const SpaceTimeLattice& lattice, const TestFunction& w) {
  lattice.validate();
  std::vector<double> out(lattice.size());
  parallel_chunks(out.size(), 1 << 14, [&](std::size_t, std::size_t begin, std::size_t end) {
    for (std::size_t c = begin; c < end; ++c) {
      out[c] = w(lattice.center(c));
      if (!std::isfinite(out[c])) throw ParameterError("test function is not finite at cell " + std::to_string(c));
    }
  });
  return out;
}

double paley_wiener_integral(const WhiteNoiseSample& sample, const std::vector<double>& w) {
  require_size(sample.lattice, w, "test function");
  const auto total = parallel_reduce<double>(
      w.size(), [] { return 0.0; },
      [&](double& acc, std::size_t begin, std::size_t end) {
        for (std::size_t c = begin; c < end; ++c) acc += w[c] * sample.values[c];
      },
      [](double& a, double b) { a += b; }, 1 << 14);
  return total * sample.lattice.cell_volume();
}

double paley_wiener_integral(const WhiteNoiseSample& sample, const TestFunction& w) {
  return paley_wiener_integral(sample, discretize(sample.lattice, w));
}

double inner_product(const SpaceTimeLattice& lattice, const std::vector<double>& w, const std::vector<double>& v) {
  require_size(lattice, w, "first function");
  require_size(lattice, v, "second function");
  double sum = 0.0;
  for (std::size_t c = 0; c < w.size(); ++c) sum += w[c] * v[c];
  return sum * lattice.cell_volume();
}

CovarianceCheck covariance_check(const SpaceTimeLattice& lattice, const std::vector<double>& w,
                                 const std::vector<double>& v, std::size_t n_samples, std::uint64_t seed) {
  lattice.validate();
  require_size(lattice, w, "first function");
  require_size(lattice, v, "second function");
  if (n_samples < 100) throw ParameterError("covariance check needs at least 100 samples");
  // W_w = Σ w Θ vol = √vol Σ w z.
  const double root = std::sqrt(lattice.cell_volume());
  std::vector<double> a(n_samples), b(n_samples);
  parallel_chunks(n_samples, 16, [&](std::size_t, std::size_t begin, std::size_t end) {
    std::vector<double> buffer(kFillBlock);
    for (std::size_t s = begin; s < end; ++s) {
      const NormalStream rng(seed, s);
      a[s] = root * weighted_normal_sum(rng, w, buffer);
      b[s] = root * weighted_normal_sum(rng, v, buffer);
    }
  });
  const double ma = stats::mean(a), mb = stats::mean(b);
  stats::RunningStats products;
  for (std::size_t s = 0; s < n_samples; ++s) products.add((a[s] - ma) * (b[s] - mb));
  const double n = static_cast<double>(n_samples);
  CovarianceCheck out;
  out.samples = n_samples;
  out.covariance = {products.mean() * n / (n - 1.0), products.standard_error()};
  out.expected = inner_product(lattice, w, v);
  const double diff = out.covariance.value - out.expected;
  out.z = out.covariance.standard_error > 0.0 ? diff / out.covariance.standard_error
                                              : (diff == 0.0 ? 0.0 : std::copysign(INFINITY, diff));
  return out;
}

CovarianceCheck covariance_check(const SpaceTimeLattice& lattice, const TestFunction& w, const TestFunction& v,
                                 std::size_t n_samples, std::uint64_t seed) {
  return covariance_check(lattice, discretize(lattice, w), discretize(lattice, v), n_samples, seed);
}

double signature_inner_product(const std::vector<double>& v, const std::vector<double>& w, std::size_t z_star) {
  if (v.size() != w.size())
    throw ParameterError("signature inner product of lengths " + std::to_string(v.size()) + " and " +
                         std::to_string(w.size()));
  if (z_star > v.size()) throw ParameterError("z* exceeds the vector length");
  const std::size_t split = v.size() - z_star;
  double sum = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) sum += (i < split ? 1.0 : -1.0) * v[i] * w[i];
  return sum;
}

TestFunction named_test_function(std::string_view name, int spatial_dimension) {
  const RegistryCall call = parse_registry_call(name);
  const auto n = static_cast<std::size_t>(1 + spatial_dimension);
  const auto& args = call.args;
  if (call.name == "bump") {
    if (args.size() != 2 && args.size() != n + 1)
      throw ConfigError("bump takes (center, width) or " + std::to_string(n) + " centres and a width");
    const double width = args.back();
    if (!(width > 0.0)) throw ConfigError("bump width must be positive");
    Vec c(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) c[static_cast<Eigen::Index>(i)] = args.size() == 2 ? args[0] : args[i];
    return [c, width](const Vec& y) { return std::exp(-(y - c).squaredNorm() / (2.0 * width * width)); };
  }
  if (call.name == "indicator") {
    if (args.size() != 2 && args.size() != 2 * n)
      throw ConfigError("indicator takes (lo, hi) or " + std::to_string(n) + " (lo, hi) pairs");
    Vec lo(static_cast<Eigen::Index>(n)), hi(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t k = args.size() == 2 ? 0 : 2 * i;
      lo[static_cast<Eigen::Index>(i)] = args[k];
      hi[static_cast<Eigen::Index>(i)] = args[k + 1];
      if (!(args[k] < args[k + 1])) throw ConfigError("indicator box needs lo < hi on every axis");
    }
    return [lo, hi](const Vec& y) {
      return ((y.array() >= lo.array()) && (y.array() <= hi.array())).all() ? 1.0 : 0.0;
    };
  }
  throw ConfigError("unknown test function '" + call.name + "' (known: bump, indicator)");
}

std::vector<std::string> registered_test_functions() { return {"bump(center,width)", "indicator(lo,hi)"}; }

void write_sample(const WhiteNoiseSample& sample, const std::filesystem::path& data,
                  const std::filesystem::path& manifest) {
  static_assert(std::endian::native == std::endian::little, "sample files are little-endian");
  std::ofstream out(data, std::ios::binary);
  if (!out) throw ResourceError("cannot write " + data.string());
  out.write(reinterpret_cast<const char*>(sample.values.data()),
            static_cast<std::streamsize>(sample.values.size() * sizeof(double)));
  if (!out) throw ResourceError("write failed for " + data.string());
  std::ofstream m(manifest);
  if (!m) throw ResourceError("cannot write " + manifest.string());
  m << nlohmann::json{{"lattice", to_json(sample.lattice)},
                      {"seed", sample.seed},
                      {"stream", sample.stream},
                      {"cells", sample.values.size()}}
           .dump(2)
    << '\n';
}

WhiteNoiseSample read_sample(const std::filesystem::path& data, const std::filesystem::path& manifest) {
  std::ifstream m(manifest);
  if (!m) throw ConfigError("cannot open " + manifest.string());
  nlohmann::json j;
  try {
    m >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(manifest.string() + ": " + e.what());
  }
  if (!j.contains("lattice")) throw ConfigError(manifest.string() + ": missing key 'lattice'");
  WhiteNoiseSample s;
  s.lattice = lattice_from_json(j.at("lattice"));
  s.lattice.validate();
  s.seed = j.value("seed", std::uint64_t{0});
  s.stream = j.value("stream", std::uint64_t{0});
  s.values.resize(s.lattice.size());
  std::ifstream in(data, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + data.string());
  in.read(reinterpret_cast<char*>(s.values.data()), static_cast<std::streamsize>(s.values.size() * sizeof(double)));
  if (!in) throw ConfigError(data.string() + ": truncated data");
  if (in.peek() != std::char_traits<char>::eof()) throw ConfigError(data.string() + ": trailing data");
  return s;
}

}  // namespace fractoid::whitenoise
