#ifndef COMPART_EXPR_HPP
#define COMPART_EXPR_HPP

#include "compart/common.hpp"

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

/// Scalar arithmetic expressions used for flow, input and output rates.
///
/// Grammar (see docs/expressions.md):
///   expr    = term { ("+" | "-") term } ;
///   term    = unary { ("*" | "/") unary } ;
///   unary   = "-" unary | power ;
///   power   = primary [ "^" unary ] ;
///   primary = number | identifier | identifier "(" expr { "," expr } ")" | "(" expr ")" ;
namespace compart::expr {

enum class Func { Sin, Cos, Exp, Sqrt, Abs, Min, Max };
enum class BinOp { Add, Sub, Mul, Div, Pow };

struct Node;
using NodePtr = std::shared_ptr<const Node>;

struct Constant {
  double value;
};
struct Time {};
/// State reference, 0-based (x1 is index 0).
struct State {
  std::size_t index;
};
struct Param {
  std::size_t index;
  std::string name;
};
struct Negate {
  NodePtr operand;
};
struct Binary {
  BinOp op;
  NodePtr lhs;
  NodePtr rhs;
};
struct Call {
  Func func;
  std::vector<NodePtr> args;
};

struct Node {
  std::variant<Constant, Time, State, Param, Negate, Binary, Call> value;
};

/// What identifiers may resolve to.
struct Symbols {
  std::size_t state_count = 0;
  std::vector<std::string> params;
};

/// Evaluation environment. `params` is indexed like Symbols::params.
struct Env {
  double t = 0.0;
  std::span<const double> x;
  std::span<const double> params;
};

class ParseError : public ValidationError {
 public:
  ParseError(const std::string& message, std::size_t position);
  /// 0-based character offset into the source.
  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

class EvalError : public NumericalError {
 public:
  EvalError(const std::string& message, double t, std::string subexpression);
  double t() const noexcept { return t_; }
  const std::string& subexpression() const noexcept { return subexpression_; }

 private:
  double t_;
  std::string subexpression_;
};

/// Immutable parsed expression. Copies share the tree.
class Expression {
 public:
  Expression();  // the constant 0
  explicit Expression(NodePtr root);

  double evaluate(const Env& env) const;
  std::string to_string() const;
  const NodePtr& root() const noexcept { return root_; }
  /// True when the tree references neither t nor any state.
  bool is_constant() const;

  friend bool operator==(const Expression& a, const Expression& b);

 private:
  NodePtr root_;
};

Expression parse(std::string_view source, const Symbols& symbols);

bool equal(const Node& a, const Node& b);
std::string to_string(const Node& node);
std::string_view func_name(Func f);
std::size_t func_arity(Func f);

NodePtr constant(double v);
NodePtr time();
NodePtr state(std::size_t index);
NodePtr param(std::size_t index, std::string name);
NodePtr negate(NodePtr operand);
NodePtr binary(BinOp op, NodePtr lhs, NodePtr rhs);
NodePtr call(Func f, std::vector<NodePtr> args);

}  // namespace compart::expr

#endif
