#include "stefan/expr.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <numbers>
#include <set>

#include <fmt/format.h>

namespace stefan::expr {

namespace {

struct FuncEntry {
  std::string_view name;
  Func func;
  std::size_t arity;
};

constexpr std::array<FuncEntry, 9> kFunctions{{
    {"sin", Func::Sin, 1},
    {"cos", Func::Cos, 1},
    {"exp", Func::Exp, 1},
    {"log", Func::Log, 1},
    {"sqrt", Func::Sqrt, 1},
    {"abs", Func::Abs, 1},
    {"tanh", Func::Tanh, 1},
    {"min", Func::Min, 2},
    {"max", Func::Max, 2},
}};

const FuncEntry* find_function(std::string_view name) {
  for (const auto& f : kFunctions)
    if (f.name == name) return &f;
  return nullptr;
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ", ";
    out += items[i];
  }
  return out;
}

class Parser {
 public:
  Parser(std::string_view text, std::span<const std::string> params) : src_(text), params_(params) {}

  Node parse_all() {
    Node n = parse_sum();
    skip_ws();
    if (pos_ != src_.size()) fail({"operator", "end of input"});
    return n;
  }

 private:
  void skip_ws() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }

  char peek() {
    skip_ws();
    return pos_ < src_.size() ? src_[pos_] : '\0';
  }

  [[noreturn]] void fail(std::vector<std::string> expected) {
    skip_ws();
    std::string found = pos_ < src_.size() ? std::string(1, src_[pos_]) : std::string("end of input");
    throw ParseError(pos_, std::move(expected), found);
  }

  void expect(char c) {
    if (peek() != c) fail({std::string("'") + c + "'"});
    ++pos_;
  }

  static Node binary(NodeKind kind, Node lhs, Node rhs, std::size_t offset) {
    Node n;
    n.kind = kind;
    n.offset = offset;
    n.children.push_back(std::move(lhs));
    n.children.push_back(std::move(rhs));
    return n;
  }

  Node parse_sum() {
    Node lhs = parse_product();
    for (;;) {
      char c = peek();
      if (c != '+' && c != '-') return lhs;
      std::size_t at = pos_++;
      Node rhs = parse_product();
      lhs = binary(c == '+' ? NodeKind::Add : NodeKind::Sub, std::move(lhs), std::move(rhs), at);
    }
  }

  Node parse_product() {
    Node lhs = parse_unary();
    for (;;) {
      char c = peek();
      if (c != '*' && c != '/') return lhs;
      std::size_t at = pos_++;
      Node rhs = parse_unary();
      lhs = binary(c == '*' ? NodeKind::Mul : NodeKind::Div, std::move(lhs), std::move(rhs), at);
    }
  }

  Node parse_unary() {
    if (peek() == '-') {
      Node n;
      n.kind = NodeKind::Neg;
      n.offset = pos_++;
      n.children.push_back(parse_unary());
      return n;
    }
    return parse_power();
  }

  Node parse_power() {
    Node base = parse_primary();
    if (peek() == '^') {
      std::size_t at = pos_++;
      Node exponent = parse_unary();
      return binary(NodeKind::Pow, std::move(base), std::move(exponent), at);
    }
    return base;
  }

  Node parse_number() {
    std::size_t start = pos_;
    while (pos_ < src_.size() && (std::isdigit(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '.'))
      ++pos_;
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      std::size_t save = pos_++;
      if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
      if (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
        while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
      } else {
        pos_ = save;  // "2e" followed by something else: treat e as a separate token
      }
    }
    Node n;
    n.kind = NodeKind::Number;
    n.offset = start;
    auto [ptr, ec] = std::from_chars(src_.data() + start, src_.data() + pos_, n.value);
    if (ec != std::errc() || ptr != src_.data() + pos_) {
      pos_ = start;
      fail({"number"});
    }
    return n;
  }

  Node parse_primary() {
    char c = peek();
    if (c == '(') {
      ++pos_;
      Node inner = parse_sum();
      expect(')');
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t start = pos_;
      while (pos_ < src_.size() &&
             (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
        ++pos_;
      std::string_view ident = src_.substr(start, pos_ - start);
      if (peek() == '(') {
        const FuncEntry* f = find_function(ident);
        if (!f) throw UnknownIdentifierError(std::string(ident), start);
        ++pos_;
        Node n;
        n.kind = NodeKind::Call;
        n.func = f->func;
        n.offset = start;
        n.children.push_back(parse_sum());
        for (std::size_t k = 1; k < f->arity; ++k) {
          expect(',');
          n.children.push_back(parse_sum());
        }
        expect(')');
        return n;
      }
      Node n;
      n.offset = start;
      if (ident == "t") {
        n.kind = NodeKind::VarT;
      } else if (ident == "r") {
        n.kind = NodeKind::VarR;
      } else if (ident == "pi") {
        n.value = std::numbers::pi;
      } else if (ident == "e") {
        n.value = std::numbers::e;
      } else if (std::find(params_.begin(), params_.end(), ident) != params_.end()) {
        n.kind = NodeKind::Param;
        n.name = std::string(ident);
      } else {
        throw UnknownIdentifierError(std::string(ident), start);
      }
      return n;
    }
    fail({"number", "identifier", "'('", "'-'"});
  }

  std::string_view src_;
  std::span<const std::string> params_;
  std::size_t pos_ = 0;
};

void collect(const Node& n, std::set<std::string>& params, bool& uses_t, bool& uses_r) {
  if (n.kind == NodeKind::Param) params.insert(n.name);
  if (n.kind == NodeKind::VarT) uses_t = true;
  if (n.kind == NodeKind::VarR) uses_r = true;
  for (const auto& c : n.children) collect(c, params, uses_t, uses_r);
}

char op_char(NodeKind k) {
  switch (k) {
    case NodeKind::Add: return '+';
    case NodeKind::Sub: return '-';
    case NodeKind::Mul: return '*';
    case NodeKind::Div: return '/';
    case NodeKind::Pow: return '^';
    default: return '?';
  }
}

double checked(double v, const char* op, double arg, std::size_t offset) {
  if (!std::isfinite(v)) throw DomainError(op, arg, offset);
  return v;
}

}  // namespace

bool Node::operator==(const Node& o) const {
  if (kind != o.kind) return false;
  switch (kind) {
    case NodeKind::Number:
      if (!(value == o.value)) return false;
      break;
    case NodeKind::Param:
      if (name != o.name) return false;
      break;
    case NodeKind::Call:
      if (func != o.func) return false;
      break;
    default:
      break;
  }
  return children == o.children;
}

std::string_view func_name(Func f) {
  for (const auto& e : kFunctions)
    if (e.func == f) return e.name;
  return "?";
}

std::size_t func_arity(Func f) {
  for (const auto& e : kFunctions)
    if (e.func == f) return e.arity;
  return 0;
}

ParseError::ParseError(std::size_t offset, std::vector<std::string> expected, const std::string& found)
    : Error(ErrorCode::SyntaxError,
            fmt::format("at offset {}: expected {}, found {}", offset, join(expected), found)),
      offset_(offset),
      expected_(std::move(expected)) {}

UnknownIdentifierError::UnknownIdentifierError(std::string name, std::size_t offset)
    : Error(ErrorCode::UnknownIdentifier, fmt::format("'{}' at offset {}", name, offset)),
      name_(std::move(name)),
      offset_(offset) {}

DomainError::DomainError(std::string op, double value, std::size_t offset)
    : Error(ErrorCode::EvalDomainError, fmt::format("{} of {} at offset {}", op, value, offset)),
      op_(std::move(op)),
      value_(value),
      offset_(offset) {}

Ast::Ast(Node root) : root_(std::move(root)) {
  std::set<std::string> names;
  collect(root_, names, uses_t_, uses_r_);
  params_.assign(names.begin(), names.end());
}

Ast parse(std::string_view text, std::span<const std::string> declared_params) {
  if (text.size() > kMaxSourceBytes)
    throw Error(ErrorCode::InvalidArgument, "expression exceeds 64 KiB");
  if (text.find_first_not_of(" \t\r\n") == std::string_view::npos)
    throw ParseError(0, {"expression"}, "end of input");
  return Ast(Parser(text, declared_params).parse_all());
}

std::string print(const Node& n) {
  switch (n.kind) {
    case NodeKind::Number: return fmt::format("{:.17g}", n.value);
    case NodeKind::VarT: return "t";
    case NodeKind::VarR: return "r";
    case NodeKind::Param: return n.name;
    case NodeKind::Neg: return "(-" + print(n.children[0]) + ")";
    case NodeKind::Call: {
      std::string s(func_name(n.func));
      s += '(';
      for (std::size_t i = 0; i < n.children.size(); ++i) {
        if (i) s += ", ";
        s += print(n.children[i]);
      }
      return s + ')';
    }
    default:
      return "(" + print(n.children[0]) + " " + op_char(n.kind) + " " + print(n.children[1]) + ")";
  }
}

std::string print(const Ast& ast) { return print(ast.root()); }

double apply_unary(Func f, double x, std::size_t offset) {
  switch (f) {
    case Func::Sin: return checked(std::sin(x), "sin", x, offset);
    case Func::Cos: return checked(std::cos(x), "cos", x, offset);
    case Func::Exp: return checked(std::exp(x), "exp", x, offset);
    case Func::Log:
      if (!(x > 0.0)) throw DomainError("log", x, offset);
      return std::log(x);
    case Func::Sqrt:
      if (!(x >= 0.0)) throw DomainError("sqrt", x, offset);
      return std::sqrt(x);
    case Func::Abs: return std::fabs(x);
    case Func::Tanh: return std::tanh(x);
    default: break;
  }
  throw Error(ErrorCode::Internal, "bad unary function");
}

double apply_call2(Func f, double a, double b, std::size_t) {
  if (f == Func::Min) return std::min(a, b);
  if (f == Func::Max) return std::max(a, b);
  throw Error(ErrorCode::Internal, "bad binary function");
}

double apply_binary(NodeKind op, double a, double b, std::size_t offset) {
  switch (op) {
    case NodeKind::Add: return checked(a + b, "+", a, offset);
    case NodeKind::Sub: return checked(a - b, "-", a, offset);
    case NodeKind::Mul: return checked(a * b, "*", a, offset);
    case NodeKind::Div:
      if (b == 0.0) throw DomainError("division by zero", a, offset);
      return checked(a / b, "/", a, offset);
    case NodeKind::Pow: return checked(std::pow(a, b), "^", a, offset);
    default: break;
  }
  throw Error(ErrorCode::Internal, "bad binary operator");
}

Compiled::Compiled(const Ast& ast, const ParamMap& params) {
  emit(ast.root(), params, 1);
}

void Compiled::emit(const Node& n, const ParamMap& params, std::size_t depth) {
  max_depth_ = std::max(max_depth_, depth);
  switch (n.kind) {
    case NodeKind::Number:
      code_.push_back({Op::Push, Func::Sin, n.value, n.offset});
      return;
    case NodeKind::VarT:
      code_.push_back({Op::T, Func::Sin, 0.0, n.offset});
      return;
    case NodeKind::VarR:
      code_.push_back({Op::R, Func::Sin, 0.0, n.offset});
      return;
    case NodeKind::Param: {
      auto it = params.find(n.name);
      if (it == params.end()) throw Error(ErrorCode::UnboundParameter, n.name);
      code_.push_back({Op::Push, Func::Sin, it->second, n.offset});
      return;
    }
    case NodeKind::Neg:
      emit(n.children[0], params, depth);
      code_.push_back({Op::Neg, Func::Sin, 0.0, n.offset});
      return;
    case NodeKind::Call:
      emit(n.children[0], params, depth);
      if (n.children.size() == 2) {
        emit(n.children[1], params, depth + 1);
        code_.push_back({Op::Call2, n.func, 0.0, n.offset});
      } else {
        code_.push_back({Op::Call1, n.func, 0.0, n.offset});
      }
      return;
    default: {
      emit(n.children[0], params, depth);
      emit(n.children[1], params, depth + 1);
      Op op = n.kind == NodeKind::Add   ? Op::Add
              : n.kind == NodeKind::Sub ? Op::Sub
              : n.kind == NodeKind::Mul ? Op::Mul
              : n.kind == NodeKind::Div ? Op::Div
                                        : Op::Pow;
      code_.push_back({op, Func::Sin, 0.0, n.offset});
    }
  }
}

double Compiled::operator()(double t, double r) const {
  constexpr std::size_t kInline = 32;
  std::array<double, kInline> small{};
  std::vector<double> large;
  double* stack = small.data();
  if (max_depth_ > kInline) {
    large.resize(max_depth_);
    stack = large.data();
  }
  std::size_t sp = 0;
  for (const Instr& in : code_) {
    switch (in.op) {
      case Op::Push: stack[sp++] = in.value; break;
      case Op::T: stack[sp++] = t; break;
      case Op::R: stack[sp++] = r; break;
      case Op::Neg: stack[sp - 1] = -stack[sp - 1]; break;
      case Op::Call1: stack[sp - 1] = apply_unary(in.func, stack[sp - 1], in.offset); break;
      case Op::Call2:
        --sp;
        stack[sp - 1] = apply_call2(in.func, stack[sp - 1], stack[sp], in.offset);
        break;
      default: {
        --sp;
        NodeKind k = in.op == Op::Add   ? NodeKind::Add
                     : in.op == Op::Sub ? NodeKind::Sub
                     : in.op == Op::Mul ? NodeKind::Mul
                     : in.op == Op::Div ? NodeKind::Div
                                        : NodeKind::Pow;
        stack[sp - 1] = apply_binary(k, stack[sp - 1], stack[sp], in.offset);
      }
    }
  }
  return stack[0];
}

double eval(const Ast& ast, double t, double r, const ParamMap& params) {
  return Compiled(ast, params)(t, r);
}

}  // namespace stefan::expr
