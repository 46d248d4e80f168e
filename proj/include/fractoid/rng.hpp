#pragma once

#include <array>
#include <cstddef>
#include <cstdint>

namespace fractoid {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11). Output is a
/// pure function of (key, counter).
class Philox4x32 {
 public:
  using Block = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Block generate(Block counter, Key key) noexcept;
};

/// Standard normal variates addressed by (seed, stream, index).
///
/// Normal number `n` of a stream comes from Philox block n/2: the block's four
/// words form two 53-bit uniforms which Box-Muller turns into a pair.
class NormalStream {
 public:
  NormalStream(std::uint64_t seed, std::uint64_t stream) noexcept;

  double operator()(std::uint64_t index) const noexcept;

  /// Writes normals first_index .. first_index+count-1 into out; equal to
  /// calling operator() per index, but each Philox block is computed once.
  void fill(std::uint64_t first_index, double* out, std::size_t count) const noexcept;

  /// Uniform in the open interval (0, 1), independent of the normal draws.
  double uniform(std::uint64_t index) const noexcept;

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream() const noexcept { return stream_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
};

/// Index offsets partitioning one stream between independent purposes.
namespace rng_offset {
inline constexpr std::uint64_t increments = 0;
inline constexpr std::uint64_t initial_conditions = std::uint64_t{1} << 60;
inline constexpr std::uint64_t uniforms = std::uint64_t{1} << 61;
}  // namespace rng_offset

}  // namespace fractoid
