#include "fractoid/parallel.hpp"

#include <charconv>
#include <cstdlib>
#include <string_view>

namespace fractoid {

std::size_t worker_count() {
  const std::size_t hardware = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("FRACTOID_THREADS")) {
    const std::string_view text(env);
    std::size_t requested = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), requested);
    if (ec == std::errc{} && ptr == text.data() + text.size() && requested > 0) return requested;
  }
  return hardware;
}

}  // namespace fractoid
