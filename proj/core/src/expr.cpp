#include "compart/expr.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <optional>
#include <sstream>

namespace compart::expr {

ParseError::ParseError(const std::string& message, std::size_t position)
    : ValidationError("expr", message + " at position " + std::to_string(position)),
      position_(position) {}

EvalError::EvalError(const std::string& message, double t, std::string subexpression)
    : NumericalError("expr", [&] {
        std::ostringstream os;
        os << message << " in '" << subexpression << "' at t=" << t;
        return os.str();
      }()),
      t_(t),
      subexpression_(std::move(subexpression)) {}

namespace {

struct FuncInfo {
  Func func;
  std::string_view name;
  std::size_t arity;
};

constexpr std::array<FuncInfo, 7> kFuncs{{
    {Func::Sin, "sin", 1},
    {Func::Cos, "cos", 1},
    {Func::Exp, "exp", 1},
    {Func::Sqrt, "sqrt", 1},
    {Func::Abs, "abs", 1},
    {Func::Min, "min", 2},
    {Func::Max, "max", 2},
}};

std::optional<Func> lookup_func(std::string_view name) {
  for (const auto& f : kFuncs)
    if (f.name == name) return f.func;
  return std::nullopt;
}

enum class Tok { Number, Ident, Plus, Minus, Star, Slash, Caret, LParen, RParen, Comma, End };

struct Token {
  Tok kind;
  std::size_t pos;
  std::string_view text;
  double number = 0.0;
};

bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }

std::vector<Token> tokenize(std::string_view s) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < s.size()) {
    char c = s[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    std::size_t start = i;
    if (is_digit(c) || (c == '.' && i + 1 < s.size() && is_digit(s[i + 1]))) {
      while (i < s.size() && is_digit(s[i])) ++i;
      if (i < s.size() && s[i] == '.') {
        ++i;
        while (i < s.size() && is_digit(s[i])) ++i;
      }
      if (i < s.size() && (s[i] == 'e' || s[i] == 'E')) {
        std::size_t j = i + 1;
        if (j < s.size() && (s[j] == '+' || s[j] == '-')) ++j;
        if (j < s.size() && is_digit(s[j])) {
          i = j;
          while (i < s.size() && is_digit(s[i])) ++i;
        } else {
          throw ParseError("malformed exponent in numeric literal", i);
        }
      }
      Token t{Tok::Number, start, s.substr(start, i - start)};
      auto r = std::from_chars(t.text.data(), t.text.data() + t.text.size(), t.number);
      if (r.ec != std::errc() || r.ptr != t.text.data() + t.text.size())
        throw ParseError("invalid numeric literal '" + std::string(t.text) + "'", start);
      out.push_back(t);
      continue;
    }
    if (is_ident_start(c)) {
      while (i < s.size() && is_ident_char(s[i])) ++i;
      out.push_back({Tok::Ident, start, s.substr(start, i - start)});
      continue;
    }
    Tok k;
    switch (c) {
      case '+': k = Tok::Plus; break;
      case '-': k = Tok::Minus; break;
      case '*': k = Tok::Star; break;
      case '/': k = Tok::Slash; break;
      case '^': k = Tok::Caret; break;
      case '(': k = Tok::LParen; break;
      case ')': k = Tok::RParen; break;
      case ',': k = Tok::Comma; break;
      default: throw ParseError(std::string("unexpected character '") + c + "'", i);
    }
    out.push_back({k, i, s.substr(i, 1)});
    ++i;
  }
  out.push_back({Tok::End, s.size(), {}});
  return out;
}

class Parser {
 public:
  Parser(std::string_view src, const Symbols& sym) : toks_(tokenize(src)), sym_(sym) {}

  NodePtr parse_all() {
    if (toks_.size() == 1) throw ParseError("empty expression", 0);
    NodePtr n = parse_expr();
    if (peek().kind != Tok::End) throw ParseError("unexpected '" + std::string(peek().text) + "'", peek().pos);
    return n;
  }

 private:
  const Token& peek() const { return toks_[pos_]; }
  const Token& next() { return toks_[pos_++]; }
  bool accept(Tok k) {
    if (peek().kind != k) return false;
    ++pos_;
    return true;
  }
  void expect(Tok k, const char* what) {
    if (!accept(k)) {
      const Token& t = peek();
      std::string got = t.kind == Tok::End ? "end of input" : "'" + std::string(t.text) + "'";
      throw ParseError(std::string("expected ") + what + ", got " + got, t.pos);
    }
  }

  NodePtr parse_expr() {
    NodePtr lhs = parse_term();
    for (;;) {
      if (accept(Tok::Plus)) {
        lhs = binary(BinOp::Add, lhs, parse_term());
      } else if (accept(Tok::Minus)) {
        lhs = binary(BinOp::Sub, lhs, parse_term());
      } else {
        return lhs;
      }
    }
  }

  NodePtr parse_term() {
    NodePtr lhs = parse_unary();
    for (;;) {
      if (accept(Tok::Star)) {
        lhs = binary(BinOp::Mul, lhs, parse_unary());
      } else if (accept(Tok::Slash)) {
        lhs = binary(BinOp::Div, lhs, parse_unary());
      } else {
        return lhs;
      }
    }
  }

  NodePtr parse_unary() {
    if (accept(Tok::Minus)) return negate(parse_unary());
    return parse_power();
  }

  NodePtr parse_power() {
    NodePtr base = parse_primary();
    if (accept(Tok::Caret)) return binary(BinOp::Pow, base, parse_unary());
    return base;
  }

  NodePtr parse_primary() {
    const Token& t = next();
    switch (t.kind) {
      case Tok::Number:
        return constant(t.number);
      case Tok::LParen: {
        NodePtr inner = parse_expr();
        expect(Tok::RParen, "')'");
        return inner;
      }
      case Tok::Ident:
        return parse_identifier(t);
      case Tok::End:
        throw ParseError("unexpected end of input", t.pos);
      default:
        throw ParseError("unexpected '" + std::string(t.text) + "'", t.pos);
    }
  }

  NodePtr parse_identifier(const Token& t) {
    if (auto f = lookup_func(t.text)) {
      if (peek().kind != Tok::LParen)
        throw ParseError("function '" + std::string(t.text) + "' must be called", t.pos);
      ++pos_;
      std::vector<NodePtr> args;
      if (peek().kind != Tok::RParen) {
        args.push_back(parse_expr());
        while (accept(Tok::Comma)) args.push_back(parse_expr());
      }
      expect(Tok::RParen, "')'");
      if (args.size() != func_arity(*f))
        throw ParseError("function '" + std::string(t.text) + "' takes " + std::to_string(func_arity(*f)) +
                             " argument(s), got " + std::to_string(args.size()),
                         t.pos);
      return call(*f, std::move(args));
    }
    if (peek().kind == Tok::LParen) throw ParseError("unknown function '" + std::string(t.text) + "'", t.pos);
    if (t.text == "t") return time();
    for (std::size_t i = 0; i < sym_.params.size(); ++i)
      if (sym_.params[i] == t.text) return param(i, sym_.params[i]);
    if (t.text.size() > 1 && t.text[0] == 'x' &&
        std::all_of(t.text.begin() + 1, t.text.end(), [](char c) { return is_digit(c); })) {
      std::size_t idx = 0;
      auto r = std::from_chars(t.text.data() + 1, t.text.data() + t.text.size(), idx);
      if (r.ec == std::errc() && idx >= 1 && idx <= sym_.state_count && t.text[1] != '0') return state(idx - 1);
    }
    throw ParseError("unknown identifier '" + std::string(t.text) + "'", t.pos);
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  const Symbols& sym_;
};

double eval(const Node& n, const Env& env);

struct Evaluator {
  const Env& env;
  const Node& self;

  double operator()(const Constant& c) const { return c.value; }
  double operator()(const Time&) const { return env.t; }
  double operator()(const State& s) const { return env.x[s.index]; }
  double operator()(const Param& p) const { return env.params[p.index]; }
  double operator()(const Negate& n) const { return -eval(*n.operand, env); }
  double operator()(const Binary& b) const {
    double l = eval(*b.lhs, env);
    double r = eval(*b.rhs, env);
    switch (b.op) {
      case BinOp::Add: return l + r;
      case BinOp::Sub: return l - r;
      case BinOp::Mul: return l * r;
      case BinOp::Div:
        if (r == 0.0) throw EvalError("division by zero", env.t, to_string(self));
        return l / r;
      case BinOp::Pow: {
        double v = std::pow(l, r);
        if (std::isnan(v) && !std::isnan(l) && !std::isnan(r))
          throw EvalError("domain error (negative base with non-integer exponent)", env.t, to_string(self));
        return v;
      }
    }
    return 0.0;
  }
  double operator()(const Call& c) const {
    double a = eval(*c.args[0], env);
    switch (c.func) {
      case Func::Sin: return std::sin(a);
      case Func::Cos: return std::cos(a);
      case Func::Exp: return std::exp(a);
      case Func::Sqrt:
        if (a < 0.0) throw EvalError("domain error (sqrt of negative)", env.t, to_string(self));
        return std::sqrt(a);
      case Func::Abs: return std::abs(a);
      case Func::Min: return std::min(a, eval(*c.args[1], env));
      case Func::Max: return std::max(a, eval(*c.args[1], env));
    }
    return 0.0;
  }
};

double eval(const Node& n, const Env& env) { return std::visit(Evaluator{env, n}, n.value); }

// Printing precedence levels. A child is parenthesized when its level is
// below what its position requires.
enum Level { kAdd = 1, kMul = 2, kUnary = 3, kPow = 4, kAtom = 5 };

int level_of(const Node& n) {
  if (const auto* b = std::get_if<Binary>(&n.value)) {
    switch (b->op) {
      case BinOp::Add:
      case BinOp::Sub: return kAdd;
      case BinOp::Mul:
      case BinOp::Div: return kMul;
      case BinOp::Pow: return kPow;
    }
  }
  if (std::holds_alternative<Negate>(n.value)) return kUnary;
  return kAtom;
}

std::string format_number(double v) {
  std::array<char, 64> buf{};
  auto r = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), r.ptr);
}

void print(const Node& n, int required, std::string& out);

void print_child(const Node& n, int required, std::string& out) {
  bool wrap = level_of(n) < required;
  if (wrap) out += '(';
  print(n, wrap ? kAdd : required, out);
  if (wrap) out += ')';
}

void print(const Node& n, int /*required*/, std::string& out) {
  std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Constant>) {
          if (v.value < 0.0 || std::signbit(v.value)) {
            // Only reachable from hand-built trees; keep it re-parseable.
            out += "(0-" + format_number(-v.value) + ")";
          } else {
            out += format_number(v.value);
          }
        } else if constexpr (std::is_same_v<T, Time>) {
          out += 't';
        } else if constexpr (std::is_same_v<T, State>) {
          out += 'x' + std::to_string(v.index + 1);
        } else if constexpr (std::is_same_v<T, Param>) {
          out += v.name;
        } else if constexpr (std::is_same_v<T, Negate>) {
          out += '-';
          print_child(*v.operand, kUnary, out);
        } else if constexpr (std::is_same_v<T, Binary>) {
          switch (v.op) {
            case BinOp::Add:
            case BinOp::Sub:
              print_child(*v.lhs, kAdd, out);
              out += v.op == BinOp::Add ? " + " : " - ";
              print_child(*v.rhs, kMul, out);
              break;
            case BinOp::Mul:
            case BinOp::Div:
              print_child(*v.lhs, kMul, out);
              out += v.op == BinOp::Mul ? "*" : "/";
              print_child(*v.rhs, kUnary, out);
              break;
            case BinOp::Pow:
              print_child(*v.lhs, kAtom, out);
              out += '^';
              print_child(*v.rhs, kUnary, out);
              break;
          }
        } else if constexpr (std::is_same_v<T, Call>) {
          out += func_name(v.func);
          out += '(';
          for (std::size_t i = 0; i < v.args.size(); ++i) {
            if (i) out += ", ";
            print(*v.args[i], kAdd, out);
          }
          out += ')';
        }
      },
      n.value);
}

bool references_variables(const Node& n) {
  return std::visit(
      [](const auto& v) -> bool {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Time> || std::is_same_v<T, State>) {
          return true;
        } else if constexpr (std::is_same_v<T, Negate>) {
          return references_variables(*v.operand);
        } else if constexpr (std::is_same_v<T, Binary>) {
          return references_variables(*v.lhs) || references_variables(*v.rhs);
        } else if constexpr (std::is_same_v<T, Call>) {
          return std::any_of(v.args.begin(), v.args.end(), [](const NodePtr& a) { return references_variables(*a); });
        } else {
          return false;
        }
      },
      n.value);
}

}  // namespace

std::string_view func_name(Func f) {
  for (const auto& i : kFuncs)
    if (i.func == f) return i.name;
  return "?";
}

std::size_t func_arity(Func f) {
  for (const auto& i : kFuncs)
    if (i.func == f) return i.arity;
  return 0;
}

NodePtr constant(double v) { return std::make_shared<const Node>(Node{Constant{v}}); }
NodePtr time() { return std::make_shared<const Node>(Node{Time{}}); }
NodePtr state(std::size_t index) { return std::make_shared<const Node>(Node{State{index}}); }
NodePtr param(std::size_t index, std::string name) {
  return std::make_shared<const Node>(Node{Param{index, std::move(name)}});
}
NodePtr negate(NodePtr operand) { return std::make_shared<const Node>(Node{Negate{std::move(operand)}}); }
NodePtr binary(BinOp op, NodePtr lhs, NodePtr rhs) {
  return std::make_shared<const Node>(Node{Binary{op, std::move(lhs), std::move(rhs)}});
}
NodePtr call(Func f, std::vector<NodePtr> args) {
  return std::make_shared<const Node>(Node{Call{f, std::move(args)}});
}

bool equal(const Node& a, const Node& b) {
  if (a.value.index() != b.value.index()) return false;
  return std::visit(
      [&](const auto& va) -> bool {
        using T = std::decay_t<decltype(va)>;
        const T& vb = std::get<T>(b.value);
        if constexpr (std::is_same_v<T, Constant>) {
          return va.value == vb.value;
        } else if constexpr (std::is_same_v<T, Time>) {
          return true;
        } else if constexpr (std::is_same_v<T, State>) {
          return va.index == vb.index;
        } else if constexpr (std::is_same_v<T, Param>) {
          return va.index == vb.index && va.name == vb.name;
        } else if constexpr (std::is_same_v<T, Negate>) {
          return equal(*va.operand, *vb.operand);
        } else if constexpr (std::is_same_v<T, Binary>) {
          return va.op == vb.op && equal(*va.lhs, *vb.lhs) && equal(*va.rhs, *vb.rhs);
        } else {
          if (va.func != vb.func || va.args.size() != vb.args.size()) return false;
          for (std::size_t i = 0; i < va.args.size(); ++i)
            if (!equal(*va.args[i], *vb.args[i])) return false;
          return true;
        }
      },
      a.value);
}

std::string to_string(const Node& node) {
  std::string out;
  print(node, kAdd, out);
  return out;
}

Expression::Expression() : root_(constant(0.0)) {}
Expression::Expression(NodePtr root) : root_(std::move(root)) {}

double Expression::evaluate(const Env& env) const { return eval(*root_, env); }
std::string Expression::to_string() const { return expr::to_string(*root_); }
bool Expression::is_constant() const { return !references_variables(*root_); }

bool operator==(const Expression& a, const Expression& b) { return equal(*a.root_, *b.root_); }

Expression parse(std::string_view source, const Symbols& symbols) {
  return Expression(Parser(source, symbols).parse_all());
}

}  // namespace compart::expr
