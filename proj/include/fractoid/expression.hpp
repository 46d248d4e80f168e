#pragma once

#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fractoid {

/// Minimal arithmetic expression over coordinate symbols x0..x{n-1}.
///
/// Grammar: numbers, `pi`, symbols, unary minus, + - * / ^ (right
/// associative), parentheses, and the functions sin cos sinh cosh exp log.
/// Malformed input raises ConfigError with the offending position.
class Expression {
 public:
  Expression(std::string_view source, int dimension);

  double operator()(std::span<const double> coordinates) const;
  const std::string& source() const noexcept { return source_; }

  struct Node;

 private:
  std::string source_;
  std::shared_ptr<const Node> root_;
};

/// A registry entry written as `name(arg, ...)`; each argument is a constant
/// expression. A bare `name` has no arguments.
struct RegistryCall {
  std::string name;
  std::vector<double> args;
};

/// Parses `name(a, b, ...)`. Malformed input raises ConfigError.
RegistryCall parse_registry_call(std::string_view text);

}  // namespace fractoid
