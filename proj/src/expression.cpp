#include "fractoid/expression.hpp"

#include <cctype>
#include <cmath>
#include <numbers>
#include <variant>
#include <vector>

#include "fractoid/error.hpp"

namespace fractoid {

struct Expression::Node {
  enum class Kind { constant, symbol, negate, add, sub, mul, div, pow, call } kind;
  double value = 0.0;
  int symbol = 0;
  double (*function)(double) = nullptr;
  std::shared_ptr<const Node> lhs, rhs;

  double eval(std::span<const double> x) const {
    switch (kind) {
      case Kind::constant: return value;
      case Kind::symbol: return x[static_cast<std::size_t>(symbol)];
      case Kind::negate: return -lhs->eval(x);
      case Kind::add: return lhs->eval(x) + rhs->eval(x);
      case Kind::sub: return lhs->eval(x) - rhs->eval(x);
      case Kind::mul: return lhs->eval(x) * rhs->eval(x);
      case Kind::div: return lhs->eval(x) / rhs->eval(x);
      case Kind::pow: return std::pow(lhs->eval(x), rhs->eval(x));
      case Kind::call: return function(lhs->eval(x));
    }
    return 0.0;
  }
};

namespace {

using NodePtr = std::shared_ptr<const Expression::Node>;
using Kind = Expression::Node::Kind;

NodePtr make(Kind kind, NodePtr lhs = nullptr, NodePtr rhs = nullptr) {
  auto n = std::make_shared<Expression::Node>();
  n->kind = kind;
  n->lhs = std::move(lhs);
  n->rhs = std::move(rhs);
  return n;
}

class Parser {
 public:
  Parser(std::string_view text, int dimension) : text_(text), dimension_(dimension) {}

  NodePtr parse() {
    auto node = sum();
    skip_space();
    if (pos_ != text_.size()) fail("unexpected character");
    return node;
  }

 private:
  std::string_view text_;
  int dimension_;
  std::size_t pos_ = 0;

  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError("expression '" + std::string(text_) + "': " + what + " at position " +
                      std::to_string(pos_));
  }

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  NodePtr sum() {
    auto node = product();
    for (;;) {
      if (accept('+')) node = make(Kind::add, node, product());
      else if (accept('-')) node = make(Kind::sub, node, product());
      else return node;
    }
  }

  NodePtr product() {
    auto node = unary();
    for (;;) {
      if (accept('*')) node = make(Kind::mul, node, unary());
      else if (accept('/')) node = make(Kind::div, node, unary());
      else return node;
    }
  }

  NodePtr unary() {
    if (accept('-')) return make(Kind::negate, unary());
    if (accept('+')) return unary();
    return power();
  }

  NodePtr power() {
    auto base = primary();
    if (accept('^')) return make(Kind::pow, base, unary());
    return base;
  }

  NodePtr primary() {
    skip_space();
    if (pos_ >= text_.size()) fail("unexpected end of input");
    if (accept('(')) {
      auto node = sum();
      if (!accept(')')) fail("expected ')'");
      return node;
    }
    const char c = text_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c))) return word();
    fail(std::string("unexpected '") + c + "'");
  }

  NodePtr number() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.'))
      ++pos_;
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      ++pos_;
      if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) ++pos_;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }
    const std::string literal(text_.substr(start, pos_ - start));
    std::size_t used = 0;
    double value = 0.0;
    try {
      value = std::stod(literal, &used);
    } catch (const std::exception&) {
      fail("bad number '" + literal + "'");
    }
    if (used != literal.size()) fail("bad number '" + literal + "'");
    auto n = std::make_shared<Expression::Node>();
    n->kind = Kind::constant;
    n->value = value;
    return n;
  }

  NodePtr word() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() && std::isalnum(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    const std::string name(text_.substr(start, pos_ - start));
    if (name == "pi") {
      auto n = std::make_shared<Expression::Node>();
      n->kind = Kind::constant;
      n->value = std::numbers::pi;
      return n;
    }
    if (name.size() > 1 && name[0] == 'x' &&
        name.find_first_not_of("0123456789", 1) == std::string::npos) {
      const int index = std::stoi(name.substr(1));
      if (index >= dimension_) fail("symbol " + name + " exceeds dimension " + std::to_string(dimension_));
      auto n = std::make_shared<Expression::Node>();
      n->kind = Kind::symbol;
      n->symbol = index;
      return n;
    }
    double (*fn)(double) = nullptr;
    if (name == "sin") fn = [](double v) { return std::sin(v); };
    else if (name == "cos") fn = [](double v) { return std::cos(v); };
    else if (name == "sinh") fn = [](double v) { return std::sinh(v); };
    else if (name == "cosh") fn = [](double v) { return std::cosh(v); };
    else if (name == "exp") fn = [](double v) { return std::exp(v); };
    else if (name == "log") fn = [](double v) { return std::log(v); };
    else fail("unknown identifier '" + name + "'");
    if (!accept('(')) fail("expected '(' after " + name);
    auto arg = sum();
    if (!accept(')')) fail("expected ')'");
    auto n = std::make_shared<Expression::Node>();
    n->kind = Kind::call;
    n->function = fn;
    n->lhs = std::move(arg);
    return n;
  }
};

}  // namespace

Expression::Expression(std::string_view source, int dimension)
    : source_(source), root_(Parser(source, dimension).parse()) {}

double Expression::operator()(std::span<const double> coordinates) const { return root_->eval(coordinates); }

RegistryCall parse_registry_call(std::string_view text) {
  const auto trim = [](std::string_view v) {
    while (!v.empty() && std::isspace(static_cast<unsigned char>(v.front()))) v.remove_prefix(1);
    while (!v.empty() && std::isspace(static_cast<unsigned char>(v.back()))) v.remove_suffix(1);
    return v;
  };
  text = trim(text);
  RegistryCall call;
  const auto open = text.find('(');
  if (open == std::string_view::npos) {
    if (text.empty() || text.find(')') != std::string_view::npos)
      throw ConfigError("malformed registry name '" + std::string(text) + "'");
    call.name = std::string(text);
    return call;
  }
  if (text.back() != ')' || open == 0) throw ConfigError("malformed registry call '" + std::string(text) + "'");
  call.name = std::string(trim(text.substr(0, open)));
  std::string_view inner = trim(text.substr(open + 1, text.size() - open - 2));
  if (inner.empty()) return call;
  int depth = 0;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= inner.size(); ++i) {
    if (i < inner.size() && inner[i] == '(') ++depth;
    if (i < inner.size() && inner[i] == ')') --depth;
    if (i == inner.size() || (inner[i] == ',' && depth == 0)) {
      const auto arg = trim(inner.substr(start, i - start));
      if (arg.empty()) throw ConfigError("empty argument in '" + std::string(text) + "'");
      call.args.push_back(Expression(arg, 0)({}));
      start = i + 1;
    }
  }
  return call;
}

}  // namespace fractoid
