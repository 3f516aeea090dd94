#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace msldp::expr {

/// Syntax error raised by parse(). The message is formatted "line:col: message".
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t offset, int line, int column, const std::string& message,
             std::vector<std::string> expected);

  std::size_t offset() const { return offset_; }
  int line() const { return line_; }
  int column() const { return column_; }
  const std::vector<std::string>& expected() const { return expected_; }

 private:
  std::size_t offset_;
  int line_;
  int column_;
  std::vector<std::string> expected_;
};

/// Unbound identifier or a domain violation (log of a non-positive value, ...).
class EvalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Kind { Number, Identifier, Negate, Add, Subtract, Multiply, Divide, Power, Call, Derivative };

enum class Function { Sin, Cos, Tan, Exp, Log, Sqrt, Abs, Sign };

struct Node;
using NodePtr = std::shared_ptr<const Node>;

struct Node {
  Kind kind = Kind::Number;
  double value = 0.0;      // Number
  std::string name;        // Identifier, or the variable of a Derivative
  Function function = Function::Sin;
  NodePtr lhs;             // unary operand, call argument, derivative body
  NodePtr rhs;
};

using Bindings = std::map<std::string, double, std::less<>>;

class Expression;
using Substitutions = std::map<std::string, Expression, std::less<>>;

/// Immutable expression tree. Copies share structure.
class Expression {
 public:
  Expression();
  explicit Expression(NodePtr root);

  static Expression number(double value);
  static Expression identifier(std::string name);

  const Node& root() const { return *root_; }
  const NodePtr& node() const { return root_; }

  double eval(const Bindings& bindings) const;

  /// Exact symbolic derivative; simplified only by constant folding and 0/1 elimination.
  Expression differentiate(std::string_view var) const;

  /// Replaces `diff(f, v)` nodes by their symbolic derivative, innermost first.
  Expression expand_derivatives() const;

  Expression substitute(const Substitutions& replacements) const;

  /// Free identifiers, excluding the built-in constant `pi`.
  std::set<std::string> identifiers() const;

  bool depends_on(std::string_view name) const;
  bool is_number() const { return root_->kind == Kind::Number; }
  bool is_number(double v) const { return is_number() && root_->value == v; }

  std::string to_string() const;

 private:
  NodePtr root_;
};

Expression parse(std::string_view source);

std::string_view function_name(Function f);

/// Flat stack-machine form of an expression for hot loops. Variables are
/// resolved to positional slots; `constants` are folded at compile time.
class Compiled {
 public:
  Compiled() = default;
  Compiled(const Expression& e, std::span<const std::string> slots, const Bindings& constants = {});

  double operator()(std::span<const double> slots) const;

  bool is_constant() const { return constant_; }
  double constant_value() const { return constant_value_; }

 private:
  enum class Op : unsigned char {
    Const, Slot, Neg, Add, Sub, Mul, Div, Pow, PowInt, Sin, Cos, Tan, Exp, Log, Sqrt, Abs, Sign
  };
  struct Instr {
    Op op;
    int index;
    double value;
  };

  void emit(const Node& n, const Bindings& constants, std::span<const std::string> slots, int& depth);

  std::vector<Instr> code_;
  int max_depth_ = 0;
  bool constant_ = true;
  double constant_value_ = 0.0;
};

}  // namespace msldp::expr
