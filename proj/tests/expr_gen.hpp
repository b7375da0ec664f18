// Randomized expression-tree generator for evaluator equivalence tests.
// Mostly well-typed trees, with a slice of deliberately ill-typed ones so
// error outcomes are exercised too.
#pragma once

#include <memory>
#include <random>

#include "mavguard/spec_dsl.hpp"

namespace exprgen {

using mavguard::dsl::BinOp;
using mavguard::dsl::Expr;
using mavguard::dsl::ExprKind;
using mavguard::dsl::ExprPtr;
using mavguard::dsl::UnOp;

enum class Want { Num, Str, Bool, Any };

inline ExprPtr make(Expr e) { return std::make_shared<const Expr>(std::move(e)); }

inline ExprPtr leaf(std::mt19937_64& rng, Want want) {
  Expr e;
  if (want == Want::Any) want = static_cast<Want>(rng() % 3);
  switch (want) {
    case Want::Num: {
      switch (rng() % 8) {
        case 0: {
          e.kind = ExprKind::Number;
          // zero shows up often enough to drive division-by-zero paths
          std::uniform_real_distribution<double> d(-1e6, 1e6);
          e.number = (rng() % 6 == 0) ? 0.0 : d(rng);
          break;
        }
        case 1:
          e.kind = ExprKind::StateRef;
          e.text = (rng() % 2) ? "MC_PITCH_P" : "MC_PITCHRATE_MAX";
          break;
        case 2:
          e.kind = ExprKind::StateRef;
          e.text = (rng() % 3 == 0) ? "flight_mode"
                                    : (rng() % 2 ? "altitude_m" : "climb_rate_mps");
          break;
        case 3:
          e.kind = ExprKind::MsgField;
          e.text = "param_value";
          break;
        case 4:
          e.kind = ExprKind::Ident;
          e.text = (rng() % 2) ? "n" : "m1";
          break;
        case 5:
          e.kind = ExprKind::ModeConst;
          e.text = (rng() % 2) ? "FLIP" : "ACRO";
          break;
        case 6:
          e.kind = rng() % 2 ? ExprKind::IterIndex : ExprKind::IterCount;
          break;
        default: {
          e.kind = ExprKind::Number;
          e.number = static_cast<double>(static_cast<int>(rng() % 100)) - 50;
          break;
        }
      }
      break;
    }
    case Want::Str:
      switch (rng() % 3) {
        case 0:
          e.kind = ExprKind::String;
          e.text = (rng() % 2) ? "MC_PITCH_P" : "abc";
          break;
        case 1:
          e.kind = ExprKind::MsgField;
          e.text = "param_id";
          break;
        default:
          e.kind = ExprKind::Ident;
          e.text = "s";
          break;
      }
      break;
    case Want::Bool:
      switch (rng() % 3) {
        case 0:
          e.kind = ExprKind::Bool;
          e.boolean = rng() % 2 == 0;
          break;
        case 1:
          e.kind = ExprKind::StateRef;
          e.text = "armed";
          break;
        default:
          e.kind = ExprKind::Ident;
          e.text = "flag";
          break;
      }
      break;
    default:
      break;
  }
  return make(std::move(e));
}

// ill_typed: ignore the type discipline entirely for this subtree
inline ExprPtr gen(std::mt19937_64& rng, int depth, Want want, bool ill_typed = false) {
  if (want == Want::Any) want = static_cast<Want>(rng() % 3);
  if (depth <= 0 || rng() % 4 == 0) return leaf(rng, ill_typed ? Want::Any : want);

  Expr e;
  const Want child = ill_typed ? Want::Any : Want::Num;
  switch (want) {
    case Want::Num: {
      if (rng() % 5 == 0) {
        e.kind = ExprKind::Unary;
        e.un = UnOp::Neg;
        e.lhs = gen(rng, depth - 1, ill_typed ? Want::Any : Want::Num, ill_typed);
        break;
      }
      e.kind = ExprKind::Binary;
      constexpr BinOp arith[] = {BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div};
      e.bin = arith[rng() % 4];
      e.lhs = gen(rng, depth - 1, child, ill_typed);
      e.rhs = gen(rng, depth - 1, child, ill_typed);
      break;
    }
    case Want::Bool: {
      switch (rng() % 4) {
        case 0: {
          e.kind = ExprKind::Binary;
          constexpr BinOp cmp[] = {BinOp::Lt, BinOp::Le, BinOp::Gt, BinOp::Ge};
          e.bin = cmp[rng() % 4];
          e.lhs = gen(rng, depth - 1, child, ill_typed);
          e.rhs = gen(rng, depth - 1, child, ill_typed);
          break;
        }
        case 1: {
          e.kind = ExprKind::Binary;
          e.bin = rng() % 2 ? BinOp::Eq : BinOp::Ne;
          const Want t = ill_typed ? Want::Any : static_cast<Want>(rng() % 3);
          e.lhs = gen(rng, depth - 1, t, ill_typed);
          e.rhs = gen(rng, depth - 1, ill_typed ? Want::Any : t, ill_typed);
          break;
        }
        case 2: {
          e.kind = ExprKind::Binary;
          e.bin = rng() % 2 ? BinOp::And : BinOp::Or;
          e.lhs = gen(rng, depth - 1, ill_typed ? Want::Any : Want::Bool, ill_typed);
          e.rhs = gen(rng, depth - 1, ill_typed ? Want::Any : Want::Bool, ill_typed);
          break;
        }
        default:
          e.kind = ExprKind::Unary;
          e.un = UnOp::Not;
          e.lhs = gen(rng, depth - 1, ill_typed ? Want::Any : Want::Bool, ill_typed);
          break;
      }
      break;
    }
    case Want::Str:
      return leaf(rng, Want::Str);
    default:
      break;
  }
  return make(std::move(e));
}

}  // namespace exprgen
