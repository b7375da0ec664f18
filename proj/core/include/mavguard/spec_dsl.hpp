// Declarative protocol-refinement language: parameter declarations, rules
// with guarded branches over message payloads and mirrored vehicle state,
// and bounded-iteration sessions for the mission subprotocol.
//
// Surface syntax (line oriented, '#' comments):
//   define NAME NUM
//   param NAME default NUM [min NUM] [max NUM]
//   rule NAME: on MSG(field=literal, field->binder, ...)
//     when EXPR:
//       require EXPR
//     ...
//   iter NAME: on MSG(count->N) expect MSG(field->binder, ...)
//     require EXPR
//
// A rule with no `when` headers has a single always-true branch. Branches
// are tried in declaration order; the first true guard wins.
#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "mavguard/mavlink.hpp"

namespace mavguard {
struct VehicleState;
}

namespace mavguard::dsl {

struct Diagnostic {
  int line = 0;
  int col = 0;
  std::string message;
};

std::string format_diagnostics(const std::vector<Diagnostic>& diags);

enum class ExprKind : std::uint8_t {
  Number,
  String,
  Bool,
  MsgField,   // msg.FIELD
  StateRef,   // state.NAME (declared param or built-in)
  ModeConst,  // mode.NAME
  IterIndex,  // iter.index
  IterCount,  // iter.count
  Ident,      // pattern binder or define
  Unary,
  Binary,
};

enum class BinOp : std::uint8_t { Add, Sub, Mul, Div, Lt, Le, Gt, Ge, Eq, Ne, And, Or };
enum class UnOp : std::uint8_t { Neg, Not };

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Expr {
  ExprKind kind = ExprKind::Number;
  double number = 0.0;
  bool boolean = false;
  std::string text;  // identifier / field name / string literal
  BinOp bin = BinOp::Add;
  UnOp un = UnOp::Neg;
  ExprPtr lhs;
  ExprPtr rhs;
  int line = 0;
  int col = 0;
};

struct StateDecl {
  std::string name;
  double default_value = 0.0;
  std::optional<double> min;
  std::optional<double> max;
  int line = 0;
};

struct MsgPattern {
  std::string message;
  mav::MsgId msg_id = mav::MsgId::Heartbeat;
  struct FieldEq {
    std::string field;
    ExprPtr literal;  // Number, String or Bool node
  };
  struct FieldBind {
    std::string field;
    std::string binder;
  };
  std::vector<FieldEq> equals;
  std::vector<FieldBind> binds;
  int line = 0;
};

struct Branch {
  ExprPtr guard;  // null = always true
  std::vector<ExprPtr> requirements;
};

struct Rule {
  std::string name;
  MsgPattern trigger;
  std::vector<Branch> branches;
  int line = 0;
};

struct IterationDecl {
  std::string name;
  MsgPattern open_pattern;   // exactly one binder: the expected count N
  MsgPattern item_pattern;
  std::vector<ExprPtr> item_requirements;
  int line = 0;
};

struct ProtocolSpec {
  std::vector<StateDecl> state_decls;
  std::map<std::string, double> defines;
  std::vector<Rule> rules;
  std::vector<IterationDecl> iterations;

  const StateDecl* find_state_decl(std::string_view name) const;
};

struct ParseResult {
  std::optional<ProtocolSpec> spec;  // set when no error diagnostics
  std::vector<Diagnostic> diagnostics;
  bool ok() const { return spec.has_value() && diagnostics.empty(); }
};

// Parses and statically validates. `define_overrides` substitute or add
// named constants (CLI --define bindings) before validation.
ParseResult parse_spec(std::string_view text,
                       const std::map<std::string, double>& define_overrides = {});

std::vector<Diagnostic> validate_spec(const ProtocolSpec& spec);

// Canonical text form; parse(print_spec(s)) is structurally identical to s.
std::string print_spec(const ProtocolSpec& spec);
std::string print_expr(const Expr& e);

// ---- evaluation ----

using Value = std::variant<double, bool, std::string>;

enum class EvalErrorKind : std::uint8_t { DivisionByZero, TypeMismatch, Unbound };

struct EvalError {
  EvalErrorKind kind = EvalErrorKind::Unbound;
  std::string message;
};

struct EvalOutcome {
  std::variant<Value, EvalError> v;
  bool ok() const { return std::holds_alternative<Value>(v); }
  const Value& value() const { return std::get<Value>(v); }
  const EvalError& error() const { return std::get<EvalError>(v); }
  static EvalOutcome of(Value val) { return EvalOutcome{std::move(val)}; }
  static EvalOutcome fail(EvalErrorKind k, std::string msg) {
    return EvalOutcome{EvalError{k, std::move(msg)}};
  }
};

struct IterBindings {
  double index = 0;  // items accepted so far in the open session
  double count = 0;  // expected count N
};

struct EvalContext {
  const mav::MavMessage* msg = nullptr;
  const VehicleState* state = nullptr;
  const std::map<std::string, Value>* binders = nullptr;
  const std::map<std::string, double>* defines = nullptr;
  const IterBindings* iter = nullptr;
};

// Strict evaluation; `and`/`or` short-circuit; all arithmetic in 64-bit
// floats; division by zero and type mismatches are errors, not crashes.
EvalOutcome eval_expr(const Expr& e, const EvalContext& ctx);

std::string value_to_string(const Value& v);

}  // namespace mavguard::dsl
