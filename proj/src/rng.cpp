#include "fractoid/rng.hpp"

#include <cmath>
#include <numbers>

namespace fractoid {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t product = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(product >> 32);
  lo = static_cast<std::uint32_t>(product);
}

// 53-bit uniform strictly inside (0, 1).
inline double to_open_unit(std::uint32_t a, std::uint32_t b) {
  const std::uint64_t bits = (static_cast<std::uint64_t>(a >> 5) << 26) | (b >> 6);
  return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

Philox4x32::Block block_for(std::uint64_t seed, std::uint64_t stream, std::uint64_t block) {
  const Philox4x32::Block counter{static_cast<std::uint32_t>(block),
                                  static_cast<std::uint32_t>(block >> 32),
                                  static_cast<std::uint32_t>(stream),
                                  static_cast<std::uint32_t>(stream >> 32)};
  const Philox4x32::Key key{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  return Philox4x32::generate(counter, key);
}

}  // namespace

Philox4x32::Block Philox4x32::generate(Block ctr, Key key) noexcept {
  for (int round = 0; round < 10; ++round) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kMul0, ctr[0], hi0, lo0);
    mulhilo(kMul1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kWeyl0;
    key[1] += kWeyl1;
  }
  return ctr;
}

NormalStream::NormalStream(std::uint64_t seed, std::uint64_t stream) noexcept
    : seed_(seed), stream_(stream) {}

double NormalStream::operator()(std::uint64_t index) const noexcept {
  const auto words = block_for(seed_, stream_, index >> 1);
  const double u1 = to_open_unit(words[0], words[1]);
  const double u2 = to_open_unit(words[2], words[3]);
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  return (index & 1u) ? radius * std::sin(angle) : radius * std::cos(angle);
}

void NormalStream::fill(std::uint64_t first_index, double* out, std::size_t count) const noexcept {
  std::size_t written = 0;
  std::uint64_t index = first_index;
  while (written < count) {
    const auto words = block_for(seed_, stream_, index >> 1);
    const double u1 = to_open_unit(words[0], words[1]);
    const double u2 = to_open_unit(words[2], words[3]);
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    if ((index & 1u) == 0) {
      out[written++] = radius * std::cos(angle);
      ++index;
      if (written == count) break;
    }
    out[written++] = radius * std::sin(angle);
    ++index;
  }
}

double NormalStream::uniform(std::uint64_t index) const noexcept {
  const auto words = block_for(seed_, stream_, rng_offset::uniforms + index);
  return to_open_unit(words[0], words[1]);
}

}  // namespace fractoid
