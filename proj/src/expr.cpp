#include "msldp/expr.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <numbers>
#include <sstream>

namespace msldp::expr {

namespace {

constexpr double kPi = std::numbers::pi;

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += (i + 1 == items.size()) ? " or " : ", ";
    out += items[i];
  }
  return out;
}

NodePtr make_node(Kind k, NodePtr lhs = nullptr, NodePtr rhs = nullptr) {
  auto n = std::make_shared<Node>();
  n->kind = k;
  n->lhs = std::move(lhs);
  n->rhs = std::move(rhs);
  return n;
}

NodePtr make_number(double v) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::Number;
  n->value = v;
  return n;
}

NodePtr make_identifier(std::string name) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::Identifier;
  n->name = std::move(name);
  return n;
}

NodePtr make_call(Function f, NodePtr arg) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::Call;
  n->function = f;
  n->lhs = std::move(arg);
  return n;
}

bool is_num(const NodePtr& n) { return n->kind == Kind::Number; }
bool is_num(const NodePtr& n, double v) { return is_num(n) && n->value == v; }

double apply_function(Function f, double a) {
  switch (f) {
    case Function::Sin: return std::sin(a);
    case Function::Cos: return std::cos(a);
    case Function::Tan: return std::tan(a);
    case Function::Exp: return std::exp(a);
    case Function::Log:
      if (!(a > 0.0)) {
        std::ostringstream os;
        os.precision(17);
        os << "log of non-positive value " << a;
        throw EvalError(os.str());
      }
      return std::log(a);
    case Function::Sqrt:
      if (a < 0.0) {
        std::ostringstream os;
        os.precision(17);
        os << "sqrt of negative value " << a;
        throw EvalError(os.str());
      }
      return std::sqrt(a);
    case Function::Abs: return std::fabs(a);
    case Function::Sign: return (a > 0.0) - (a < 0.0);
  }
  return 0.0;
}

double checked_divide(double a, double b) {
  if (b == 0.0) {
    std::ostringstream os;
    os.precision(17);
    os << "division by zero (numerator " << a << ")";
    throw EvalError(os.str());
  }
  return a / b;
}

// shared by tree and compiled evaluation so both agree bit for bit
double int_pow(double base, int k) {
  const bool invert = k < 0;
  if (invert) k = -k;
  double r = 1.0;
  double p = base;
  while (k) {
    if (k & 1) r *= p;
    p *= p;
    k >>= 1;
  }
  return invert ? 1.0 / r : r;
}

double checked_pow(double a, double b) {
  if (a < 0.0 && b != std::floor(b)) {
    std::ostringstream os;
    os.precision(17);
    os << "negative base " << a << " raised to non-integer power " << b;
    throw EvalError(os.str());
  }
  if (a == 0.0 && b < 0.0) throw EvalError("zero raised to a negative power");
  if (b == std::floor(b) && std::fabs(b) <= 16) return int_pow(a, static_cast<int>(b));
  return std::pow(a, b);
}

// Smart constructors: constant folding and 0/1 elimination only.
NodePtr s_neg(const NodePtr& a) {
  if (is_num(a)) return make_number(-a->value);
  if (a->kind == Kind::Negate) return a->lhs;
  // push the sign into the leading factor: -(2*pi*s) prints as -2*pi*s
  if (a->kind == Kind::Multiply || a->kind == Kind::Divide) return make_node(a->kind, s_neg(a->lhs), a->rhs);
  return make_node(Kind::Negate, a);
}

NodePtr s_add(const NodePtr& a, const NodePtr& b) {
  if (is_num(a) && is_num(b)) return make_number(a->value + b->value);
  if (is_num(a, 0.0)) return b;
  if (is_num(b, 0.0)) return a;
  if (b->kind == Kind::Negate) return make_node(Kind::Subtract, a, b->lhs);
  return make_node(Kind::Add, a, b);
}

NodePtr s_sub(const NodePtr& a, const NodePtr& b) {
  if (is_num(a) && is_num(b)) return make_number(a->value - b->value);
  if (is_num(b, 0.0)) return a;
  if (is_num(a, 0.0)) return s_neg(b);
  return make_node(Kind::Subtract, a, b);
}

NodePtr s_mul(const NodePtr& a, const NodePtr& b) {
  if (is_num(a) && is_num(b)) return make_number(a->value * b->value);
  if (is_num(a, 0.0) || is_num(b, 0.0)) return make_number(0.0);
  if (is_num(a, 1.0)) return b;
  if (is_num(b, 1.0)) return a;
  if (is_num(a, -1.0)) return s_neg(b);
  if (is_num(b, -1.0)) return s_neg(a);
  // keep numeric factors in front so that derivatives print as 2*pi*sin(..)
  if (is_num(b) && !is_num(a)) return s_mul(b, a);
  if (a->kind == Kind::Negate) return s_neg(s_mul(a->lhs, b));
  if (b->kind == Kind::Negate) return s_neg(s_mul(a, b->lhs));
  return make_node(Kind::Multiply, a, b);
}

NodePtr s_div(const NodePtr& a, const NodePtr& b) {
  if (is_num(a) && is_num(b) && b->value != 0.0) return make_number(a->value / b->value);
  if (is_num(a, 0.0)) return make_number(0.0);
  if (is_num(b, 1.0)) return a;
  return make_node(Kind::Divide, a, b);
}

NodePtr s_pow(const NodePtr& a, const NodePtr& b) {
  if (is_num(a) && is_num(b)) {
    const double v = std::pow(a->value, b->value);
    if (std::isfinite(v)) return make_number(v);
  }
  if (is_num(b, 0.0)) return make_number(1.0);
  if (is_num(b, 1.0)) return a;
  return make_node(Kind::Power, a, b);
}

NodePtr s_call(Function f, const NodePtr& a) {
  if (is_num(a) && f != Function::Log && f != Function::Sqrt) return make_number(apply_function(f, a->value));
  return make_call(f, a);
}

// ---------------------------------------------------------------- parser

struct FunctionEntry {
  std::string_view name;
  Function f;
};
constexpr std::array<FunctionEntry, 8> kFunctions{{{"sin", Function::Sin},
                                                   {"cos", Function::Cos},
                                                   {"tan", Function::Tan},
                                                   {"exp", Function::Exp},
                                                   {"log", Function::Log},
                                                   {"sqrt", Function::Sqrt},
                                                   {"abs", Function::Abs},
                                                   {"sign", Function::Sign}}};

class Parser {
 public:
  explicit Parser(std::string_view src) : src_(src) {}

  NodePtr parse_all() {
    skip_ws();
    NodePtr e = parse_expr();
    skip_ws();
    if (pos_ != src_.size()) fail("unexpected '" + std::string(1, src_[pos_]) + "'", {"operator", "end of input"});
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& what, std::vector<std::string> expected) const {
    int line = 1;
    int col = 1;
    for (std::size_t i = 0; i < pos_ && i < src_.size(); ++i) {
      if (src_[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    std::string msg = what;
    if (!expected.empty()) msg += "; expected " + join(expected);
    throw ParseError(pos_, line, col, msg, std::move(expected));
  }

  void skip_ws() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }

  bool peek(char c) {
    skip_ws();
    return pos_ < src_.size() && src_[pos_] == c;
  }

  NodePtr parse_expr() {
    NodePtr lhs = parse_term();
    while (true) {
      if (peek('+')) {
        ++pos_;
        lhs = make_node(Kind::Add, lhs, parse_term());
      } else if (peek('-')) {
        ++pos_;
        lhs = make_node(Kind::Subtract, lhs, parse_term());
      } else {
        return lhs;
      }
    }
  }

  NodePtr parse_term() {
    NodePtr lhs = parse_unary();
    while (true) {
      if (peek('*')) {
        ++pos_;
        lhs = make_node(Kind::Multiply, lhs, parse_unary());
      } else if (peek('/')) {
        ++pos_;
        lhs = make_node(Kind::Divide, lhs, parse_unary());
      } else {
        return lhs;
      }
    }
  }

  NodePtr parse_unary() {
    if (peek('-')) {
      ++pos_;
      return make_node(Kind::Negate, parse_unary());
    }
    return parse_power();
  }

  NodePtr parse_power() {
    NodePtr base = parse_primary();
    if (peek('^')) {
      ++pos_;
      return make_node(Kind::Power, base, parse_unary());
    }
    return base;
  }

  NodePtr parse_primary() {
    skip_ws();
    if (pos_ >= src_.size()) fail("unexpected end of input", {"number", "identifier", "'('", "'-'"});
    const char ch = src_[pos_];
    if (ch == '(') {
      ++pos_;
      NodePtr e = parse_expr();
      if (!peek(')')) fail("missing ')'", {"')'"});
      ++pos_;
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(ch)) || ch == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(ch)) || ch == '_') return parse_identifier();
    fail("unexpected '" + std::string(1, ch) + "'", {"number", "identifier", "'('", "'-'"});
  }

  NodePtr parse_number() {
    const std::size_t start = pos_;
    auto digits = [&] {
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    };
    digits();
    if (pos_ < src_.size() && src_[pos_] == '.') {
      ++pos_;
      digits();
    }
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      std::size_t save = pos_;
      ++pos_;
      if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
      if (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
        digits();
      } else {
        pos_ = save;
      }
    }
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(src_.data() + start, src_.data() + pos_, v);
    if (ec != std::errc() || ptr != src_.data() + pos_) {
      pos_ = start;
      fail("malformed number", {"number"});
    }
    if (pos_ < src_.size() && (std::isalpha(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) {
      fail("implicit multiplication is not supported", {"operator"});
    }
    return make_number(v);
  }

  NodePtr parse_identifier() {
    const std::size_t start = pos_;
    while (pos_ < src_.size() &&
           (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) {
      ++pos_;
    }
    std::string name(src_.substr(start, pos_ - start));
    if (!peek('(')) return make_identifier(std::move(name));
    ++pos_;
    if (name == "diff") {
      NodePtr body = parse_expr();
      if (!peek(',')) fail("diff expects two arguments", {"','"});
      ++pos_;
      skip_ws();
      const std::size_t vstart = pos_;
      while (pos_ < src_.size() &&
             (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) {
        ++pos_;
      }
      if (vstart == pos_ || std::isdigit(static_cast<unsigned char>(src_[vstart]))) {
        fail("diff expects a variable name", {"identifier"});
      }
      auto n = std::make_shared<Node>();
      n->kind = Kind::Derivative;
      n->name = std::string(src_.substr(vstart, pos_ - vstart));
      n->lhs = body;
      if (!peek(')')) fail("missing ')'", {"')'"});
      ++pos_;
      return n;
    }
    for (const auto& entry : kFunctions) {
      if (entry.name == name) {
        NodePtr arg = parse_expr();
        if (!peek(')')) fail("missing ')'", {"')'"});
        ++pos_;
        return make_call(entry.f, arg);
      }
    }
    pos_ = start;
    fail("unknown function '" + name + "'", {"sin", "cos", "tan", "exp", "log", "sqrt", "abs", "sign", "diff"});
  }

  std::string_view src_;
  std::size_t pos_ = 0;
};

// ---------------------------------------------------------------- printing

int precedence(const Node& n) {
  switch (n.kind) {
    case Kind::Add:
    case Kind::Subtract: return 1;
    case Kind::Multiply:
    case Kind::Divide: return 2;
    case Kind::Negate: return 3;
    case Kind::Power: return 4;
    case Kind::Number: return n.value < 0.0 ? 3 : 5;
    default: return 5;
  }
}

std::string format_number(double v) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  (void)ec;
  return std::string(buf.data(), ptr);
}

void print(const Node& n, std::string& out);

void print_child(const Node& child, bool parens, std::string& out) {
  if (parens) out += '(';
  print(child, out);
  if (parens) out += ')';
}

void print(const Node& n, std::string& out) {
  switch (n.kind) {
    case Kind::Number: out += format_number(n.value); return;
    case Kind::Identifier: out += n.name; return;
    case Kind::Negate:
      out += '-';
      print_child(*n.lhs, precedence(*n.lhs) < 3, out);
      return;
    case Kind::Call:
      out += function_name(n.function);
      out += '(';
      print(*n.lhs, out);
      out += ')';
      return;
    case Kind::Derivative:
      out += "diff(";
      print(*n.lhs, out);
      out += ", ";
      out += n.name;
      out += ')';
      return;
    case Kind::Power:
      print_child(*n.lhs, precedence(*n.lhs) <= 4, out);
      out += '^';
      print_child(*n.rhs, precedence(*n.rhs) < 3, out);
      return;
    default: break;
  }
  const int p = precedence(n);
  const char op = n.kind == Kind::Add ? '+' : n.kind == Kind::Subtract ? '-' : n.kind == Kind::Multiply ? '*' : '/';
  print_child(*n.lhs, precedence(*n.lhs) < p, out);
  out += op;
  print_child(*n.rhs, precedence(*n.rhs) <= p, out);
}

// ---------------------------------------------------------------- evaluation

double eval_node(const Node& n, const Bindings& b) {
  switch (n.kind) {
    case Kind::Number: return n.value;
    case Kind::Identifier: {
      auto it = b.find(n.name);
      if (it != b.end()) return it->second;
      if (n.name == "pi") return kPi;
      throw EvalError("unbound identifier '" + n.name + "'");
    }
    case Kind::Negate: return -eval_node(*n.lhs, b);
    case Kind::Add: return eval_node(*n.lhs, b) + eval_node(*n.rhs, b);
    case Kind::Subtract: return eval_node(*n.lhs, b) - eval_node(*n.rhs, b);
    case Kind::Multiply: return eval_node(*n.lhs, b) * eval_node(*n.rhs, b);
    case Kind::Divide: return checked_divide(eval_node(*n.lhs, b), eval_node(*n.rhs, b));
    case Kind::Power: return checked_pow(eval_node(*n.lhs, b), eval_node(*n.rhs, b));
    case Kind::Call: return apply_function(n.function, eval_node(*n.lhs, b));
    case Kind::Derivative: throw EvalError("internal: unexpanded derivative");
  }
  return 0.0;
}

NodePtr derive(const NodePtr& n, std::string_view var);

NodePtr expand(const NodePtr& n) {
  switch (n->kind) {
    case Kind::Number:
    case Kind::Identifier: return n;
    case Kind::Derivative: return derive(expand(n->lhs), n->name);
    default: break;
  }
  auto copy = std::make_shared<Node>(*n);
  if (n->lhs) copy->lhs = expand(n->lhs);
  if (n->rhs) copy->rhs = expand(n->rhs);
  return copy;
}

NodePtr derive(const NodePtr& n, std::string_view var) {
  const NodePtr& u = n->lhs;
  const NodePtr& v = n->rhs;
  switch (n->kind) {
    case Kind::Number: return make_number(0.0);
    case Kind::Identifier: return make_number(n->name == var ? 1.0 : 0.0);
    case Kind::Negate: return s_neg(derive(u, var));
    case Kind::Add: return s_add(derive(u, var), derive(v, var));
    case Kind::Subtract: return s_sub(derive(u, var), derive(v, var));
    case Kind::Multiply: return s_add(s_mul(derive(u, var), v), s_mul(u, derive(v, var)));
    case Kind::Divide: {
      NodePtr du = derive(u, var);
      NodePtr dv = derive(v, var);
      if (is_num(dv, 0.0)) return s_div(du, v);
      return s_div(s_sub(s_mul(du, v), s_mul(u, dv)), s_pow(v, make_number(2.0)));
    }
    case Kind::Power: {
      NodePtr du = derive(u, var);
      NodePtr dv = derive(v, var);
      if (is_num(dv, 0.0)) {
        NodePtr exponent = is_num(v) ? make_number(v->value - 1.0) : s_sub(v, make_number(1.0));
        return s_mul(s_mul(v, s_pow(u, exponent)), du);
      }
      // u^v (v' log u + v u'/u)
      NodePtr inner = s_add(s_mul(dv, make_call(Function::Log, u)), s_div(s_mul(v, du), u));
      return s_mul(n, inner);
    }
    case Kind::Call: {
      NodePtr du = derive(u, var);
      if (is_num(du, 0.0)) return make_number(0.0);
      NodePtr outer;
      switch (n->function) {
        case Function::Sin: outer = s_call(Function::Cos, u); break;
        case Function::Cos: return s_neg(s_mul(du, s_call(Function::Sin, u)));
        case Function::Tan: return s_div(du, s_pow(s_call(Function::Cos, u), make_number(2.0)));
        case Function::Exp: outer = n; break;
        case Function::Log: return s_div(du, u);
        case Function::Sqrt: return s_div(du, s_mul(make_number(2.0), n));
        case Function::Abs: outer = s_call(Function::Sign, u); break;
        case Function::Sign: return make_number(0.0);
      }
      return s_mul(du, outer);
    }
    case Kind::Derivative: return derive(expand(n), var);
  }
  return make_number(0.0);
}

NodePtr substitute_node(const NodePtr& n, const Substitutions& subs) {
  if (n->kind == Kind::Identifier) {
    auto it = subs.find(n->name);
    return it != subs.end() ? it->second.node() : n;
  }
  if (n->kind == Kind::Number) return n;
  auto copy = std::make_shared<Node>(*n);
  if (n->kind == Kind::Derivative) {
    // renaming the differentiation variable keeps diff(f, y) consistent with its body
    auto it = subs.find(n->name);
    if (it != subs.end() && it->second.root().kind == Kind::Identifier) copy->name = it->second.root().name;
  }
  if (n->lhs) copy->lhs = substitute_node(n->lhs, subs);
  if (n->rhs) copy->rhs = substitute_node(n->rhs, subs);
  return copy;
}

void collect(const Node& n, std::set<std::string>& out) {
  if (n.kind == Kind::Identifier && n.name != "pi") out.insert(n.name);
  if (n.lhs) collect(*n.lhs, out);
  if (n.rhs) collect(*n.rhs, out);
}

}  // namespace

ParseError::ParseError(std::size_t offset, int line, int column, const std::string& message,
                       std::vector<std::string> expected)
    : std::runtime_error(std::to_string(line) + ":" + std::to_string(column) + ": " + message),
      offset_(offset),
      line_(line),
      column_(column),
      expected_(std::move(expected)) {}

std::string_view function_name(Function f) {
  for (const auto& e : kFunctions) {
    if (e.f == f) return e.name;
  }
  return "?";
}

Expression::Expression() : root_(make_number(0.0)) {}
Expression::Expression(NodePtr root) : root_(std::move(root)) {}

Expression Expression::number(double value) { return Expression(make_number(value)); }
Expression Expression::identifier(std::string name) { return Expression(make_identifier(std::move(name))); }

double Expression::eval(const Bindings& bindings) const {
  return eval_node(*expand(root_), bindings);
}

Expression Expression::differentiate(std::string_view var) const { return Expression(derive(expand(root_), var)); }

Expression Expression::expand_derivatives() const { return Expression(expand(root_)); }

Expression Expression::substitute(const Substitutions& replacements) const {
  return Expression(substitute_node(root_, replacements));
}

std::set<std::string> Expression::identifiers() const {
  std::set<std::string> out;
  collect(*root_, out);
  return out;
}

bool Expression::depends_on(std::string_view name) const {
  const auto ids = expand_derivatives().identifiers();
  return ids.count(std::string(name)) > 0;
}

std::string Expression::to_string() const {
  std::string out;
  print(*root_, out);
  return out;
}

Expression parse(std::string_view source) { return Expression(Parser(source).parse_all()); }

// ---------------------------------------------------------------- compiled form

Compiled::Compiled(const Expression& e, std::span<const std::string> slots, const Bindings& constants) {
  const Expression expanded = e.expand_derivatives();
  int depth = 0;
  emit(expanded.root(), constants, slots, depth);
  if (max_depth_ > 64) throw EvalError("expression too deeply nested for compiled evaluation");
  constant_ = true;
  for (const auto& ins : code_) {
    if (ins.op == Op::Slot) constant_ = false;
  }
  if (constant_) {
    constant_value_ = (*this)(std::span<const double>{});
    code_ = {Instr{Op::Const, 0, constant_value_}};
    max_depth_ = 1;
  }
}

void Compiled::emit(const Node& n, const Bindings& constants, std::span<const std::string> slots, int& depth) {
  auto push = [&](Instr ins) {
    code_.push_back(ins);
    ++depth;
    max_depth_ = std::max(max_depth_, depth);
  };
  switch (n.kind) {
    case Kind::Number: push({Op::Const, 0, n.value}); return;
    case Kind::Identifier: {
      for (std::size_t i = 0; i < slots.size(); ++i) {
        if (slots[i] == n.name) {
          push({Op::Slot, static_cast<int>(i), 0.0});
          return;
        }
      }
      if (auto it = constants.find(n.name); it != constants.end()) {
        push({Op::Const, 0, it->second});
        return;
      }
      if (n.name == "pi") {
        push({Op::Const, 0, kPi});
        return;
      }
      throw EvalError("unbound identifier '" + n.name + "'");
    }
    case Kind::Negate:
      emit(*n.lhs, constants, slots, depth);
      code_.push_back({Op::Neg, 0, 0.0});
      return;
    case Kind::Call: {
      emit(*n.lhs, constants, slots, depth);
      static constexpr std::array<Op, 8> map{Op::Sin, Op::Cos, Op::Tan, Op::Exp,
                                             Op::Log, Op::Sqrt, Op::Abs, Op::Sign};
      code_.push_back({map[static_cast<int>(n.function)], 0, 0.0});
      return;
    }
    case Kind::Power:
      if (n.rhs->kind == Kind::Number && n.rhs->value == std::floor(n.rhs->value) &&
          std::fabs(n.rhs->value) <= 16) {
        emit(*n.lhs, constants, slots, depth);
        code_.push_back({Op::PowInt, static_cast<int>(n.rhs->value), 0.0});
        return;
      }
      break;
    case Kind::Derivative: throw EvalError("internal: unexpanded derivative");
    default: break;
  }
  emit(*n.lhs, constants, slots, depth);
  emit(*n.rhs, constants, slots, depth);
  Op op = Op::Add;
  switch (n.kind) {
    case Kind::Add: op = Op::Add; break;
    case Kind::Subtract: op = Op::Sub; break;
    case Kind::Multiply: op = Op::Mul; break;
    case Kind::Divide: op = Op::Div; break;
    case Kind::Power: op = Op::Pow; break;
    default: break;
  }
  code_.push_back({op, 0, 0.0});
  --depth;
}

double Compiled::operator()(std::span<const double> slots) const {
  std::array<double, 64> stack;
  int top = -1;
  for (const Instr& ins : code_) {
    switch (ins.op) {
      case Op::Const: stack[++top] = ins.value; break;
      case Op::Slot: stack[++top] = slots[ins.index]; break;
      case Op::Neg: stack[top] = -stack[top]; break;
      case Op::Add: stack[top - 1] += stack[top]; --top; break;
      case Op::Sub: stack[top - 1] -= stack[top]; --top; break;
      case Op::Mul: stack[top - 1] *= stack[top]; --top; break;
      case Op::Div: stack[top - 1] = checked_divide(stack[top - 1], stack[top]); --top; break;
      case Op::Pow: stack[top - 1] = checked_pow(stack[top - 1], stack[top]); --top; break;
      case Op::PowInt:
        if (stack[top] == 0.0 && ins.index < 0) throw EvalError("zero raised to a negative power");
        stack[top] = int_pow(stack[top], ins.index);
        break;
      case Op::Sin: stack[top] = std::sin(stack[top]); break;
      case Op::Cos: stack[top] = std::cos(stack[top]); break;
      case Op::Tan: stack[top] = std::tan(stack[top]); break;
      case Op::Exp: stack[top] = std::exp(stack[top]); break;
      case Op::Log: stack[top] = apply_function(Function::Log, stack[top]); break;
      case Op::Sqrt: stack[top] = apply_function(Function::Sqrt, stack[top]); break;
      case Op::Abs: stack[top] = std::fabs(stack[top]); break;
      case Op::Sign: stack[top] = (stack[top] > 0.0) - (stack[top] < 0.0); break;
    }
  }
  return stack[0];
}

}  // namespace msldp::expr
