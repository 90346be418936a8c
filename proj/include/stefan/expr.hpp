#pragma once

// Expression mini-language for coefficients and initial profiles.
//
// Grammar (lowest to highest precedence):
//   sum     := product (('+' | '-') product)*
//   product := unary (('*' | '/') unary)*
//   unary   := '-' unary | power
//   power   := primary ('^' unary)?          right-associative
//   primary := number | name | name '(' args ')' | '(' sum ')'
//
// Variables are t and r; pi and e are constants folded at parse time.

#include <cstddef>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "stefan/error.hpp"

namespace stefan::expr {

enum class NodeKind { Number, VarT, VarR, Param, Neg, Add, Sub, Mul, Div, Pow, Call };

enum class Func { Sin, Cos, Exp, Log, Sqrt, Abs, Tanh, Min, Max };

struct Node {
  NodeKind kind = NodeKind::Number;
  double value = 0.0;          // Number
  std::string name;            // Param
  Func func = Func::Sin;       // Call
  std::vector<Node> children;  // operands / call arguments
  std::size_t offset = 0;      // byte offset in the source text

  bool operator==(const Node& other) const;
};

std::string_view func_name(Func f);
std::size_t func_arity(Func f);

using ParamMap = std::map<std::string, double, std::less<>>;

class ParseError : public Error {
 public:
  ParseError(std::size_t offset, std::vector<std::string> expected, const std::string& found);
  std::size_t offset() const noexcept { return offset_; }
  const std::vector<std::string>& expected() const noexcept { return expected_; }

 private:
  std::size_t offset_;
  std::vector<std::string> expected_;
};

class UnknownIdentifierError : public Error {
 public:
  UnknownIdentifierError(std::string name, std::size_t offset);
  const std::string& name() const noexcept { return name_; }
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::string name_;
  std::size_t offset_;
};

class DomainError : public Error {
 public:
  DomainError(std::string op, double value, std::size_t offset);
  const std::string& op() const noexcept { return op_; }
  double value() const noexcept { return value_; }
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::string op_;
  double value_;
  std::size_t offset_;
};

/// Parsed expression tree. Immutable after construction.
class Ast {
 public:
  Ast() = default;
  explicit Ast(Node root);

  const Node& root() const noexcept { return root_; }
  /// Distinct parameter names referenced, sorted.
  const std::vector<std::string>& parameters() const noexcept { return params_; }
  bool depends_on_t() const noexcept { return uses_t_; }
  bool depends_on_r() const noexcept { return uses_r_; }

 private:
  Node root_;
  std::vector<std::string> params_;
  bool uses_t_ = false;
  bool uses_r_ = false;
};

inline constexpr std::size_t kMaxSourceBytes = 64 * 1024;

/// Parses `text`. Identifiers other than t, r, pi, e and the builtin
/// functions must appear in `declared_params`.
Ast parse(std::string_view text, std::span<const std::string> declared_params = {});

/// Fully parenthesised rendering that reparses to a structurally equal tree.
std::string print(const Ast& ast);
std::string print(const Node& node);

/// Apply the checked floating-point semantics of one operator. Shared by the
/// compiled evaluator so both paths fail on the same inputs.
double apply_unary(Func f, double x, std::size_t offset);
double apply_binary(NodeKind op, double a, double b, std::size_t offset);
double apply_call2(Func f, double a, double b, std::size_t offset);

/// Postfix program with parameters bound to values. Evaluation is pure.
class Compiled {
 public:
  Compiled() = default;
  Compiled(const Ast& ast, const ParamMap& params);

  double operator()(double t, double r) const;
  bool empty() const noexcept { return code_.empty(); }

 private:
  enum class Op : unsigned char { Push, T, R, Neg, Add, Sub, Mul, Div, Pow, Call1, Call2 };
  struct Instr {
    Op op;
    Func func;
    double value;
    std::size_t offset;
  };
  void emit(const Node& node, const ParamMap& params, std::size_t depth);

  std::vector<Instr> code_;
  std::size_t max_depth_ = 0;
};

/// Convenience: compile and evaluate once.
double eval(const Ast& ast, double t, double r, const ParamMap& params = {});

}  // namespace stefan::expr
