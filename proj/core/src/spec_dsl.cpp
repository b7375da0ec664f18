#include "mavguard/spec_dsl.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <set>
#include <sstream>

#include "mavguard/vehicle_state.hpp"

namespace mavguard::dsl {

namespace {

// shortest decimal form that parses back to the same double
std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (v == std::rint(v) && std::fabs(v) < 1e15) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%lld", static_cast<long long>(v));
    return buf;
  }
  char buf[40];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

bool is_builtin_state(std::string_view name) {
  return name == "armed" || name == "flight_mode" || name == "altitude_m" ||
         name == "climb_rate_mps";
}

// ---- lexer ----

struct Token {
  enum Kind { Ident, Number, Str, Punct, End } kind = End;
  std::string text;
  double num = 0;
  int col = 0;
};

class Lexer {
 public:
  Lexer(std::string_view s, int line, std::vector<Diagnostic>& diags)
      : s_(s), line_(line), diags_(diags) {
    advance();
  }

  const Token& peek() const { return tok_; }

  Token take() {
    Token t = tok_;
    advance();
    return t;
  }

  bool accept_punct(std::string_view p) {
    if (tok_.kind == Token::Punct && tok_.text == p) {
      advance();
      return true;
    }
    return false;
  }

  bool accept_ident(std::string_view word) {
    if (tok_.kind == Token::Ident && tok_.text == word) {
      advance();
      return true;
    }
    return false;
  }

  bool at_end() const { return tok_.kind == Token::End; }
  int col() const { return tok_.col; }

  void error(const std::string& msg) {
    diags_.push_back({line_, tok_.col, msg});
    had_error_ = true;
  }
  bool had_error() const { return had_error_; }

 private:
  std::string_view s_;
  std::size_t i_ = 0;
  int line_;
  std::vector<Diagnostic>& diags_;
  Token tok_;
  bool had_error_ = false;

  void advance() {
    while (i_ < s_.size() && (s_[i_] == ' ' || s_[i_] == '\t')) ++i_;
    tok_ = Token{};
    tok_.col = static_cast<int>(i_) + 1;
    if (i_ >= s_.size() || s_[i_] == '#') {
      tok_.kind = Token::End;
      return;
    }
    char c = s_[i_];
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t start = i_;
      while (i_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[i_])) ||
                                s_[i_] == '_'))
        ++i_;
      tok_.kind = Token::Ident;
      tok_.text = std::string(s_.substr(start, i_ - start));
      return;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) ||
        (c == '.' && i_ + 1 < s_.size() &&
         std::isdigit(static_cast<unsigned char>(s_[i_ + 1])))) {
      const char* begin = s_.data() + i_;
      char* end = nullptr;
      tok_.num = std::strtod(begin, &end);
      i_ += static_cast<std::size_t>(end - begin);
      tok_.kind = Token::Number;
      return;
    }
    if (c == '"') {
      ++i_;
      std::string out;
      while (i_ < s_.size() && s_[i_] != '"') {
        if (s_[i_] == '\\' && i_ + 1 < s_.size()) ++i_;
        out += s_[i_++];
      }
      if (i_ >= s_.size()) {
        diags_.push_back({line_, tok_.col, "unterminated string literal"});
        had_error_ = true;
      } else {
        ++i_;
      }
      tok_.kind = Token::Str;
      tok_.text = std::move(out);
      return;
    }
    // multi-char punctuation first
    static const char* two[] = {"->", "<=", ">=", "==", "!="};
    for (const char* p : two) {
      if (s_.substr(i_, 2) == p) {
        tok_.kind = Token::Punct;
        tok_.text = p;
        i_ += 2;
        return;
      }
    }
    tok_.kind = Token::Punct;
    tok_.text = std::string(1, c);
    ++i_;
  }
};

// ---- expression parser ----

ExprPtr make_expr(Expr e) { return std::make_shared<const Expr>(std::move(e)); }

class ExprParser {
 public:
  ExprParser(Lexer& lex, int line) : lex_(lex), line_(line) {}

  ExprPtr parse() { return parse_or(); }

 private:
  Lexer& lex_;
  int line_;

  Expr base() {
    Expr e;
    e.line = line_;
    e.col = lex_.col();
    return e;
  }

  ExprPtr parse_or() {
    ExprPtr lhs = parse_and();
    while (lhs && lex_.peek().kind == Token::Ident && lex_.peek().text == "or") {
      lex_.take();
      Expr e = base();
      e.kind = ExprKind::Binary;
      e.bin = BinOp::Or;
      e.lhs = lhs;
      e.rhs = parse_and();
      if (!e.rhs) return nullptr;
      lhs = make_expr(std::move(e));
    }
    return lhs;
  }

  ExprPtr parse_and() {
    ExprPtr lhs = parse_not();
    while (lhs && lex_.peek().kind == Token::Ident && lex_.peek().text == "and") {
      lex_.take();
      Expr e = base();
      e.kind = ExprKind::Binary;
      e.bin = BinOp::And;
      e.lhs = lhs;
      e.rhs = parse_not();
      if (!e.rhs) return nullptr;
      lhs = make_expr(std::move(e));
    }
    return lhs;
  }

  ExprPtr parse_not() {
    if (lex_.peek().kind == Token::Ident && lex_.peek().text == "not") {
      Expr e = base();
      lex_.take();
      e.kind = ExprKind::Unary;
      e.un = UnOp::Not;
      e.lhs = parse_not();
      if (!e.lhs) return nullptr;
      return make_expr(std::move(e));
    }
    return parse_cmp();
  }

  ExprPtr parse_cmp() {
    ExprPtr lhs = parse_add();
    if (!lhs) return nullptr;
    const Token& t = lex_.peek();
    if (t.kind == Token::Punct &&
        (t.text == "<" || t.text == "<=" || t.text == ">" || t.text == ">=" ||
         t.text == "=" || t.text == "==" || t.text == "!=")) {
      std::string op = lex_.take().text;
      Expr e = base();
      e.kind = ExprKind::Binary;
      e.bin = op == "<"    ? BinOp::Lt
              : op == "<=" ? BinOp::Le
              : op == ">"  ? BinOp::Gt
              : op == ">=" ? BinOp::Ge
              : op == "!=" ? BinOp::Ne
                           : BinOp::Eq;
      e.lhs = lhs;
      e.rhs = parse_add();
      if (!e.rhs) return nullptr;
      return make_expr(std::move(e));
    }
    return lhs;
  }

  ExprPtr parse_add() {
    ExprPtr lhs = parse_mul();
    while (lhs && lex_.peek().kind == Token::Punct &&
           (lex_.peek().text == "+" || lex_.peek().text == "-")) {
      std::string op = lex_.take().text;
      Expr e = base();
      e.kind = ExprKind::Binary;
      e.bin = op == "+" ? BinOp::Add : BinOp::Sub;
      e.lhs = lhs;
      e.rhs = parse_mul();
      if (!e.rhs) return nullptr;
      lhs = make_expr(std::move(e));
    }
    return lhs;
  }

  ExprPtr parse_mul() {
    ExprPtr lhs = parse_unary();
    while (lhs && lex_.peek().kind == Token::Punct &&
           (lex_.peek().text == "*" || lex_.peek().text == "/")) {
      std::string op = lex_.take().text;
      Expr e = base();
      e.kind = ExprKind::Binary;
      e.bin = op == "*" ? BinOp::Mul : BinOp::Div;
      e.lhs = lhs;
      e.rhs = parse_unary();
      if (!e.rhs) return nullptr;
      lhs = make_expr(std::move(e));
    }
    return lhs;
  }

  ExprPtr parse_unary() {
    if (lex_.peek().kind == Token::Punct && lex_.peek().text == "-") {
      Expr e = base();
      lex_.take();
      e.kind = ExprKind::Unary;
      e.un = UnOp::Neg;
      e.lhs = parse_unary();
      if (!e.lhs) return nullptr;
      return make_expr(std::move(e));
    }
    return parse_primary();
  }

  ExprPtr parse_primary() {
    Token t = lex_.peek();
    if (t.kind == Token::Number) {
      lex_.take();
      Expr e = base();
      e.col = t.col;
      e.kind = ExprKind::Number;
      e.number = t.num;
      return make_expr(std::move(e));
    }
    if (t.kind == Token::Str) {
      lex_.take();
      Expr e = base();
      e.col = t.col;
      e.kind = ExprKind::String;
      e.text = t.text;
      return make_expr(std::move(e));
    }
    if (t.kind == Token::Punct && t.text == "(") {
      lex_.take();
      ExprPtr inner = parse_or();
      if (!inner) return nullptr;
      if (!lex_.accept_punct(")")) {
        lex_.error("expected ')'");
        return nullptr;
      }
      return inner;
    }
    if (t.kind == Token::Ident) {
      lex_.take();
      Expr e = base();
      e.col = t.col;
      if (t.text == "true" || t.text == "false") {
        e.kind = ExprKind::Bool;
        e.boolean = (t.text == "true");
        return make_expr(std::move(e));
      }
      if (lex_.accept_punct(".")) {
        Token f = lex_.take();
        if (f.kind != Token::Ident) {
          lex_.error("expected name after '.'");
          return nullptr;
        }
        if (t.text == "msg") {
          e.kind = ExprKind::MsgField;
        } else if (t.text == "state") {
          e.kind = ExprKind::StateRef;
        } else if (t.text == "mode") {
          e.kind = ExprKind::ModeConst;
        } else if (t.text == "iter") {
          if (f.text == "index") {
            e.kind = ExprKind::IterIndex;
            return make_expr(std::move(e));
          }
          if (f.text == "count") {
            e.kind = ExprKind::IterCount;
            return make_expr(std::move(e));
          }
          lex_.error("iter has only .index and .count");
          return nullptr;
        } else {
          lex_.error("unknown qualifier '" + t.text + "' (msg/state/iter/mode)");
          return nullptr;
        }
        e.text = f.text;
        return make_expr(std::move(e));
      }
      e.kind = ExprKind::Ident;
      e.text = t.text;
      return make_expr(std::move(e));
    }
    lex_.error(t.kind == Token::End ? "unexpected end of line"
                                    : "unexpected token '" + t.text + "'");
    return nullptr;
  }
};

// ---- line structure ----

struct Line {
  int no = 0;
  int indent = 0;
  std::string text;
};

std::vector<Line> split_lines(std::string_view src) {
  std::vector<Line> out;
  int no = 0;
  std::size_t pos = 0;
  while (pos <= src.size()) {
    std::size_t nl = src.find('\n', pos);
    std::string_view raw =
        src.substr(pos, nl == std::string_view::npos ? src.size() - pos : nl - pos);
    ++no;
    int indent = 0;
    std::size_t i = 0;
    while (i < raw.size() && (raw[i] == ' ' || raw[i] == '\t')) {
      indent += raw[i] == '\t' ? 8 : 1;
      ++i;
    }
    std::string_view body = raw.substr(i);
    // strip comment-only and blank lines here; inline comments die in the lexer
    if (!body.empty() && body[0] != '#' && body[0] != '\r') {
      std::string text(body);
      while (!text.empty() && (text.back() == '\r' || text.back() == ' ')) text.pop_back();
      out.push_back({no, indent, std::move(text)});
    }
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  return out;
}

bool is_reserved(std::string_view w) {
  static const std::set<std::string_view> words = {
      "param", "define", "rule", "iter", "on",    "when",  "require",
      "expect", "default", "min",  "max",  "and",   "or",    "not",
      "true",  "false",  "msg",  "state", "mode"};
  return words.count(w) != 0;
}

// NAME(field=literal, field->binder, ...) with optional parens
bool parse_pattern(Lexer& lex, int line, MsgPattern& out) {
  Token name = lex.take();
  if (name.kind != Token::Ident) {
    lex.error("expected message name");
    return false;
  }
  out.message = name.text;
  out.line = line;
  if (!lex.accept_punct("(")) return true;  // bare message name
  if (lex.accept_punct(")")) return true;
  while (true) {
    Token field = lex.take();
    if (field.kind != Token::Ident) {
      lex.error("expected field name in pattern");
      return false;
    }
    if (lex.accept_punct("->")) {
      Token binder = lex.take();
      if (binder.kind != Token::Ident || is_reserved(binder.text)) {
        lex.error("expected binder name after '->'");
        return false;
      }
      out.binds.push_back({field.text, binder.text});
    } else if (lex.accept_punct("=")) {
      Expr lit;
      lit.line = line;
      lit.col = lex.col();
      Token v = lex.peek();
      bool neg = false;
      if (v.kind == Token::Punct && v.text == "-") {
        lex.take();
        neg = true;
        v = lex.peek();
      }
      if (v.kind == Token::Number) {
        lex.take();
        lit.kind = ExprKind::Number;
        lit.number = neg ? -v.num : v.num;
      } else if (v.kind == Token::Str && !neg) {
        lex.take();
        lit.kind = ExprKind::String;
        lit.text = v.text;
      } else {
        lex.error("expected number or string literal after '='");
        return false;
      }
      out.equals.push_back({field.text, make_expr(std::move(lit))});
    } else {
      lex.error("expected '=' or '->' after field name");
      return false;
    }
    if (lex.accept_punct(",")) continue;
    if (lex.accept_punct(")")) return true;
    lex.error("expected ',' or ')' in pattern");
    return false;
  }
}

}  // namespace

const StateDecl* ProtocolSpec::find_state_decl(std::string_view name) const {
  for (const auto& d : state_decls) {
    if (d.name == name) return &d;
  }
  return nullptr;
}

std::string format_diagnostics(const std::vector<Diagnostic>& diags) {
  std::ostringstream os;
  for (const auto& d : diags) {
    os << "line " << d.line << ":" << d.col << ": " << d.message << "\n";
  }
  return os.str();
}

ParseResult parse_spec(std::string_view text,
                       const std::map<std::string, double>& define_overrides) {
  ParseResult result;
  ProtocolSpec spec;
  std::vector<Diagnostic>& diags = result.diagnostics;

  std::vector<Line> lines = split_lines(text);

  Rule* open_rule = nullptr;
  IterationDecl* open_iter = nullptr;
  int block_indent = 0;
  bool rule_saw_when = false;
  bool rule_saw_bare_require = false;

  auto close_block = [&]() {
    if (open_rule != nullptr && open_rule->branches.empty()) {
      open_rule->branches.push_back(Branch{});  // trigger-only rule accepts
    }
    open_rule = nullptr;
    open_iter = nullptr;
    rule_saw_when = false;
    rule_saw_bare_require = false;
  };

  for (const Line& line : lines) {
    Lexer lex(line.text, line.no, diags);

    if (line.indent == 0) close_block();

    if (line.indent > 0 && (open_rule != nullptr || open_iter != nullptr)) {
      if (line.indent <= block_indent) {
        // tolerated: order decides ownership, not exact depth
      }
      if (lex.accept_ident("when")) {
        if (open_iter != nullptr) {
          diags.push_back({line.no, 1, "'when' is not allowed in iter blocks"});
          continue;
        }
        if (rule_saw_bare_require) {
          diags.push_back({line.no, 1,
                           "rule mixes bare 'require' lines with 'when' branches"});
          continue;
        }
        rule_saw_when = true;
        ExprParser ep(lex, line.no);
        ExprPtr guard = ep.parse();
        if (!guard) continue;
        if (!lex.accept_punct(":"))
          diags.push_back({line.no, lex.col(), "expected ':' after when guard"});
        Branch b;
        b.guard = guard;
        open_rule->branches.push_back(std::move(b));
        continue;
      }
      if (lex.accept_ident("require")) {
        ExprParser ep(lex, line.no);
        ExprPtr req = ep.parse();
        if (!req) continue;
        if (!lex.at_end())
          diags.push_back({line.no, lex.col(), "trailing tokens after expression"});
        if (open_iter != nullptr) {
          open_iter->item_requirements.push_back(std::move(req));
        } else if (rule_saw_when) {
          open_rule->branches.back().requirements.push_back(std::move(req));
        } else {
          rule_saw_bare_require = true;
          if (open_rule->branches.empty()) open_rule->branches.push_back(Branch{});
          open_rule->branches.back().requirements.push_back(std::move(req));
        }
        continue;
      }
      diags.push_back({line.no, 1, "expected 'when' or 'require' in block"});
      continue;
    }

    if (line.indent > 0) {
      diags.push_back({line.no, 1, "unexpected indented line outside a block"});
      continue;
    }

    if (lex.accept_ident("param")) {
      StateDecl d;
      d.line = line.no;
      Token name = lex.take();
      if (name.kind != Token::Ident) {
        diags.push_back({line.no, name.col, "expected parameter name"});
        continue;
      }
      d.name = name.text;
      if (!lex.accept_ident("default")) {
        diags.push_back({line.no, lex.col(), "expected 'default'"});
        continue;
      }
      auto read_num = [&](double& out) {
        bool neg = lex.accept_punct("-");
        Token v = lex.take();
        if (v.kind != Token::Number) {
          diags.push_back({line.no, v.col, "expected number"});
          return false;
        }
        out = neg ? -v.num : v.num;
        return true;
      };
      if (!read_num(d.default_value)) continue;
      while (!lex.at_end()) {
        if (lex.accept_ident("min")) {
          double v;
          if (!read_num(v)) break;
          d.min = v;
        } else if (lex.accept_ident("max")) {
          double v;
          if (!read_num(v)) break;
          d.max = v;
        } else {
          diags.push_back({line.no, lex.col(), "expected 'min' or 'max'"});
          break;
        }
      }
      spec.state_decls.push_back(std::move(d));
      continue;
    }

    if (lex.accept_ident("define")) {
      Token name = lex.take();
      if (name.kind != Token::Ident) {
        diags.push_back({line.no, name.col, "expected define name"});
        continue;
      }
      bool neg = lex.accept_punct("-");
      Token v = lex.take();
      if (v.kind != Token::Number) {
        diags.push_back({line.no, v.col, "expected number in define"});
        continue;
      }
      if (spec.defines.count(name.text) != 0)
        diags.push_back({line.no, name.col, "duplicate define '" + name.text + "'"});
      spec.defines[name.text] = neg ? -v.num : v.num;
      continue;
    }

    if (lex.accept_ident("rule")) {
      Rule r;
      r.line = line.no;
      Token name = lex.take();
      if (name.kind != Token::Ident) {
        diags.push_back({line.no, name.col, "expected rule name"});
        continue;
      }
      r.name = name.text;
      if (!lex.accept_punct(":")) {
        diags.push_back({line.no, lex.col(), "expected ':' after rule name"});
        continue;
      }
      if (!lex.accept_ident("on")) {
        diags.push_back({line.no, lex.col(), "expected 'on'"});
        continue;
      }
      if (!parse_pattern(lex, line.no, r.trigger)) continue;
      spec.rules.push_back(std::move(r));
      open_rule = &spec.rules.back();
      block_indent = line.indent;
      continue;
    }

    if (lex.accept_ident("iter")) {
      IterationDecl it;
      it.line = line.no;
      Token name = lex.take();
      if (name.kind != Token::Ident) {
        diags.push_back({line.no, name.col, "expected iter name"});
        continue;
      }
      it.name = name.text;
      if (!lex.accept_punct(":")) {
        diags.push_back({line.no, lex.col(), "expected ':' after iter name"});
        continue;
      }
      if (!lex.accept_ident("on")) {
        diags.push_back({line.no, lex.col(), "expected 'on'"});
        continue;
      }
      if (!parse_pattern(lex, line.no, it.open_pattern)) continue;
      if (!lex.accept_ident("expect")) {
        diags.push_back({line.no, lex.col(), "expected 'expect'"});
        continue;
      }
      if (!parse_pattern(lex, line.no, it.item_pattern)) continue;
      spec.iterations.push_back(std::move(it));
      open_iter = &spec.iterations.back();
      block_indent = line.indent;
      continue;
    }

    diags.push_back({line.no, 1, "expected param/define/rule/iter"});
  }
  close_block();

  for (const auto& [k, v] : define_overrides) spec.defines[k] = v;

  bool syntax_ok = diags.empty();
  if (syntax_ok) {
    auto more = validate_spec(spec);
    diags.insert(diags.end(), more.begin(), more.end());
  }
  if (diags.empty()) {
    // validation passed, so every pattern message resolves
    auto resolve = [](MsgPattern& pat) {
      pat.msg_id = mav::message_info(pat.message)->id;
    };
    for (auto& r : spec.rules) resolve(r.trigger);
    for (auto& it : spec.iterations) {
      resolve(it.open_pattern);
      resolve(it.item_pattern);
    }
    result.spec = std::move(spec);
  }
  return result;
}

// ---- validation ----

namespace {

enum class TypeT : std::uint8_t { Num, Str, Bool, Err };

struct ValidationScope {
  const ProtocolSpec* spec = nullptr;
  const mav::MessageInfo* trigger = nullptr;  // msg.FIELD target
  std::map<std::string, TypeT> binders;
  bool in_iter = false;
};

TypeT field_type(const mav::FieldInfo& f) {
  return f.kind == mav::FieldKind::CharArray ? TypeT::Str : TypeT::Num;
}

TypeT infer(const Expr& e, const ValidationScope& sc, std::vector<Diagnostic>& diags) {
  auto fail = [&](const std::string& msg) {
    diags.push_back({e.line, e.col, msg});
    return TypeT::Err;
  };
  switch (e.kind) {
    case ExprKind::Number:
      return TypeT::Num;
    case ExprKind::String:
      return TypeT::Str;
    case ExprKind::Bool:
      return TypeT::Bool;
    case ExprKind::MsgField: {
      if (sc.trigger == nullptr) return fail("msg reference outside a rule");
      const auto* f = mav::field_info(*sc.trigger, e.text);
      if (f == nullptr)
        return fail("message " + std::string(sc.trigger->name) + " has no field '" +
                    e.text + "'");
      return field_type(*f);
    }
    case ExprKind::StateRef: {
      if (e.text == "armed") return TypeT::Bool;
      if (is_builtin_state(e.text)) return TypeT::Num;
      if (sc.spec->find_state_decl(e.text) == nullptr)
        return fail("unresolved state reference '" + e.text + "'");
      return TypeT::Num;
    }
    case ExprKind::ModeConst: {
      if (!flight_mode_number(e.text)) return fail("unknown flight mode '" + e.text + "'");
      return TypeT::Num;
    }
    case ExprKind::IterIndex:
    case ExprKind::IterCount:
      if (!sc.in_iter) return fail("iter reference outside an iter block");
      return TypeT::Num;
    case ExprKind::Ident: {
      auto it = sc.binders.find(e.text);
      if (it != sc.binders.end()) return it->second;
      if (sc.spec->defines.count(e.text) != 0) return TypeT::Num;
      return fail("unresolved identifier '" + e.text + "'");
    }
    case ExprKind::Unary: {
      TypeT t = infer(*e.lhs, sc, diags);
      if (t == TypeT::Err) return TypeT::Err;
      if (e.un == UnOp::Neg) {
        if (t != TypeT::Num) return fail("negation needs a number");
        return TypeT::Num;
      }
      if (t != TypeT::Bool) return fail("'not' needs a boolean");
      return TypeT::Bool;
    }
    case ExprKind::Binary: {
      TypeT l = infer(*e.lhs, sc, diags);
      TypeT r = infer(*e.rhs, sc, diags);
      if (l == TypeT::Err || r == TypeT::Err) return TypeT::Err;
      switch (e.bin) {
        case BinOp::Add:
        case BinOp::Sub:
        case BinOp::Mul:
        case BinOp::Div:
          if (l != TypeT::Num || r != TypeT::Num)
            return fail("arithmetic needs numbers");
          return TypeT::Num;
        case BinOp::Lt:
        case BinOp::Le:
        case BinOp::Gt:
        case BinOp::Ge:
          if (l != TypeT::Num || r != TypeT::Num)
            return fail("ordered comparison needs numbers");
          return TypeT::Bool;
        case BinOp::Eq:
        case BinOp::Ne:
          if (l != r) return fail("equality compares values of one type");
          return TypeT::Bool;
        case BinOp::And:
        case BinOp::Or:
          if (l != TypeT::Bool || r != TypeT::Bool)
            return fail("'and'/'or' need booleans");
          return TypeT::Bool;
      }
      return TypeT::Err;
    }
  }
  return TypeT::Err;
}

// resolves the pattern's message and checks fields; fills binder types
bool check_pattern(MsgPattern& pat, const ProtocolSpec& spec,
                   std::map<std::string, TypeT>& binders,
                   std::vector<Diagnostic>& diags) {
  const auto* info = mav::message_info(pat.message);
  if (info == nullptr) {
    diags.push_back({pat.line, 1, "unknown message '" + pat.message + "'"});
    return false;
  }
  pat.msg_id = info->id;
  bool ok = true;
  for (const auto& eq : pat.equals) {
    const auto* f = mav::field_info(*info, eq.field);
    if (f == nullptr) {
      diags.push_back({pat.line, 1,
                       "message " + pat.message + " has no field '" + eq.field + "'"});
      ok = false;
      continue;
    }
    TypeT ft = field_type(*f);
    TypeT lt = eq.literal->kind == ExprKind::String ? TypeT::Str : TypeT::Num;
    if (ft != lt) {
      diags.push_back({pat.line, 1,
                       "literal type does not match field '" + eq.field + "'"});
      ok = false;
    }
  }
  for (const auto& b : pat.binds) {
    const auto* f = mav::field_info(*info, b.field);
    if (f == nullptr) {
      diags.push_back({pat.line, 1,
                       "message " + pat.message + " has no field '" + b.field + "'"});
      ok = false;
      continue;
    }
    if (binders.count(b.binder) != 0) {
      diags.push_back({pat.line, 1, "duplicate binder '" + b.binder + "'"});
      ok = false;
    }
    binders[b.binder] = field_type(*f);
  }
  return ok;
}

}  // namespace

std::vector<Diagnostic> validate_spec(const ProtocolSpec& spec_in) {
  std::vector<Diagnostic> diags;
  // check_pattern resolves msg_ids as it validates; expression trees are
  // shared, so this copy is shallow and the caller's spec stays untouched
  ProtocolSpec spec = spec_in;

  std::set<std::string> param_names;
  for (const auto& d : spec.state_decls) {
    if (!param_names.insert(d.name).second)
      diags.push_back({d.line, 1, "duplicate param '" + d.name + "'"});
    if (d.min && d.max && *d.min > *d.max)
      diags.push_back({d.line, 1, "param '" + d.name + "': min exceeds max"});
    if (d.min && d.default_value < *d.min)
      diags.push_back({d.line, 1, "param '" + d.name + "': default below min"});
    if (d.max && d.default_value > *d.max)
      diags.push_back({d.line, 1, "param '" + d.name + "': default above max"});
  }

  std::set<std::string> rule_names;
  for (auto& r : spec.rules) {
    if (!rule_names.insert(r.name).second)
      diags.push_back({r.line, 1, "duplicate rule name '" + r.name + "'"});
    ValidationScope sc;
    sc.spec = &spec;
    std::map<std::string, TypeT> binders;
    if (!check_pattern(r.trigger, spec, binders, diags)) continue;
    sc.trigger = mav::message_info(r.trigger.msg_id);
    sc.binders = std::move(binders);
    for (const auto& br : r.branches) {
      if (br.guard) {
        TypeT t = infer(*br.guard, sc, diags);
        if (t != TypeT::Bool && t != TypeT::Err)
          diags.push_back({br.guard->line, br.guard->col, "guard must be boolean"});
      }
      for (const auto& req : br.requirements) {
        TypeT t = infer(*req, sc, diags);
        if (t != TypeT::Bool && t != TypeT::Err)
          diags.push_back({req->line, req->col, "require expression must be boolean"});
      }
    }
  }

  std::set<mav::MsgId> iter_openers;
  for (auto& it : spec.iterations) {
    ValidationScope sc;
    sc.spec = &spec;
    sc.in_iter = true;
    std::map<std::string, TypeT> binders;
    bool open_ok = check_pattern(it.open_pattern, spec, binders, diags);
    if (open_ok && !iter_openers.insert(it.open_pattern.msg_id).second)
      diags.push_back({it.line, 1,
                       "only one iter per initiating message type is allowed"});
    if (open_ok) {
      if (it.open_pattern.binds.size() != 1) {
        diags.push_back({it.line, 1,
                         "iter open pattern must bind exactly the count field"});
      } else {
        const auto* info = mav::message_info(it.open_pattern.msg_id);
        const auto* f = mav::field_info(*info, it.open_pattern.binds[0].field);
        if (f != nullptr && f->kind != mav::FieldKind::U16)
          diags.push_back({it.line, 1,
                           "iter count must bind a 16-bit unsigned field, '" +
                               it.open_pattern.binds[0].field + "' is not"});
      }
    }
    bool item_ok = check_pattern(it.item_pattern, spec, binders, diags);
    if (item_ok) {
      if (it.item_pattern.binds.empty()) {
        diags.push_back({it.line, 1,
                         "iter item pattern must bind the item sequence field"});
      } else {
        const auto* info = mav::message_info(it.item_pattern.msg_id);
        const auto* f = mav::field_info(*info, it.item_pattern.binds[0].field);
        if (f != nullptr && f->kind != mav::FieldKind::U16)
          diags.push_back({it.line, 1,
                           "iter item sequence must bind a 16-bit unsigned field"});
      }
      sc.trigger = mav::message_info(it.item_pattern.msg_id);
    }
    sc.binders = std::move(binders);
    for (const auto& req : it.item_requirements) {
      TypeT t = infer(*req, sc, diags);
      if (t != TypeT::Bool && t != TypeT::Err)
        diags.push_back({req->line, req->col, "require expression must be boolean"});
    }
  }
  return diags;
}

// ---- printing ----

namespace {

int precedence(const Expr& e) {
  if (e.kind == ExprKind::Binary) {
    switch (e.bin) {
      case BinOp::Or:
        return 1;
      case BinOp::And:
        return 2;
      case BinOp::Lt:
      case BinOp::Le:
      case BinOp::Gt:
      case BinOp::Ge:
      case BinOp::Eq:
      case BinOp::Ne:
        return 4;
      case BinOp::Add:
      case BinOp::Sub:
        return 5;
      case BinOp::Mul:
      case BinOp::Div:
        return 6;
    }
  }
  if (e.kind == ExprKind::Unary) return e.un == UnOp::Not ? 3 : 7;
  return 8;
}

std::string_view op_text(BinOp op) {
  switch (op) {
    case BinOp::Add:
      return "+";
    case BinOp::Sub:
      return "-";
    case BinOp::Mul:
      return "*";
    case BinOp::Div:
      return "/";
    case BinOp::Lt:
      return "<";
    case BinOp::Le:
      return "<=";
    case BinOp::Gt:
      return ">";
    case BinOp::Ge:
      return ">=";
    case BinOp::Eq:
      return "=";
    case BinOp::Ne:
      return "!=";
    case BinOp::And:
      return "and";
    case BinOp::Or:
      return "or";
  }
  return "?";
}

void print_expr_rec(const Expr& e, int parent_prec, std::string& out) {
  int prec = precedence(e);
  bool parens = prec < parent_prec;
  if (parens) out += "(";
  switch (e.kind) {
    case ExprKind::Number:
      out += format_double(e.number);
      break;
    case ExprKind::String:
      out += '"';
      for (char c : e.text) {
        if (c == '"' || c == '\\') out += '\\';
        out += c;
      }
      out += '"';
      break;
    case ExprKind::Bool:
      out += e.boolean ? "true" : "false";
      break;
    case ExprKind::MsgField:
      out += "msg." + e.text;
      break;
    case ExprKind::StateRef:
      out += "state." + e.text;
      break;
    case ExprKind::ModeConst:
      out += "mode." + e.text;
      break;
    case ExprKind::IterIndex:
      out += "iter.index";
      break;
    case ExprKind::IterCount:
      out += "iter.count";
      break;
    case ExprKind::Ident:
      out += e.text;
      break;
    case ExprKind::Unary:
      out += e.un == UnOp::Neg ? "-" : "not ";
      print_expr_rec(*e.lhs, prec + 1, out);
      break;
    case ExprKind::Binary: {
      print_expr_rec(*e.lhs, prec, out);
      out += " ";
      out += op_text(e.bin);
      out += " ";
      print_expr_rec(*e.rhs, prec + 1, out);
      break;
    }
  }
  if (parens) out += ")";
}

std::string print_pattern(const MsgPattern& pat) {
  std::string out = pat.message;
  if (pat.equals.empty() && pat.binds.empty()) return out;
  out += "(";
  bool first = true;
  for (const auto& eq : pat.equals) {
    if (!first) out += ", ";
    first = false;
    out += eq.field + "=" + print_expr(*eq.literal);
  }
  for (const auto& b : pat.binds) {
    if (!first) out += ", ";
    first = false;
    out += b.field + "->" + b.binder;
  }
  out += ")";
  return out;
}

}  // namespace

std::string print_expr(const Expr& e) {
  std::string out;
  print_expr_rec(e, 0, out);
  return out;
}

std::string print_spec(const ProtocolSpec& spec) {
  std::ostringstream os;
  for (const auto& [name, value] : spec.defines)
    os << "define " << name << " " << format_double(value) << "\n";
  for (const auto& d : spec.state_decls) {
    os << "param " << d.name << " default " << format_double(d.default_value);
    if (d.min) os << " min " << format_double(*d.min);
    if (d.max) os << " max " << format_double(*d.max);
    os << "\n";
  }
  for (const auto& r : spec.rules) {
    os << "rule " << r.name << ": on " << print_pattern(r.trigger) << "\n";
    const bool implicit_branch =
        r.branches.size() == 1 && r.branches[0].guard == nullptr;
    for (const auto& br : r.branches) {
      if (!implicit_branch) {
        os << "  when " << (br.guard ? print_expr(*br.guard) : "true") << ":\n";
      }
      for (const auto& req : br.requirements) {
        os << (implicit_branch ? "  " : "    ") << "require " << print_expr(*req)
           << "\n";
      }
    }
  }
  for (const auto& it : spec.iterations) {
    os << "iter " << it.name << ": on " << print_pattern(it.open_pattern)
       << " expect " << print_pattern(it.item_pattern) << "\n";
    for (const auto& req : it.item_requirements)
      os << "  require " << print_expr(*req) << "\n";
  }
  return os.str();
}

// ---- evaluation ----

std::string value_to_string(const Value& v) {
  if (const auto* d = std::get_if<double>(&v)) return format_double(*d);
  if (const auto* b = std::get_if<bool>(&v)) return *b ? "true" : "false";
  return "\"" + std::get<std::string>(v) + "\"";
}

namespace {

bool value_is_num(const Value& v) { return std::holds_alternative<double>(v); }
bool value_is_bool(const Value& v) { return std::holds_alternative<bool>(v); }

}  // namespace

EvalOutcome eval_expr(const Expr& e, const EvalContext& ctx) {
  switch (e.kind) {
    case ExprKind::Number:
      return EvalOutcome::of(e.number);
    case ExprKind::String:
      return EvalOutcome::of(e.text);
    case ExprKind::Bool:
      return EvalOutcome::of(e.boolean);

    case ExprKind::MsgField: {
      if (ctx.msg == nullptr)
        return EvalOutcome::fail(EvalErrorKind::Unbound, "msg." + e.text + " unbound");
      auto fv = mav::message_field(*ctx.msg, e.text);
      if (!fv)
        return EvalOutcome::fail(EvalErrorKind::Unbound,
                                 "message has no field '" + e.text + "'");
      if (std::holds_alternative<double>(*fv))
        return EvalOutcome::of(std::get<double>(*fv));
      return EvalOutcome::of(std::get<std::string>(*fv));
    }

    case ExprKind::StateRef: {
      if (ctx.state == nullptr)
        return EvalOutcome::fail(EvalErrorKind::Unbound, "state." + e.text + " unbound");
      if (e.text == "armed") return EvalOutcome::of(ctx.state->armed);
      if (e.text == "flight_mode")
        return EvalOutcome::of(static_cast<double>(ctx.state->flight_mode));
      if (e.text == "altitude_m") return EvalOutcome::of(ctx.state->altitude_m);
      if (e.text == "climb_rate_mps") return EvalOutcome::of(ctx.state->climb_rate_mps);
      const ParamEntry* p = ctx.state->find_param(e.text);
      if (p == nullptr)
        return EvalOutcome::fail(EvalErrorKind::Unbound,
                                 "state has no parameter '" + e.text + "'");
      return EvalOutcome::of(p->value);
    }

    case ExprKind::ModeConst: {
      auto n = flight_mode_number(e.text);
      if (!n)
        return EvalOutcome::fail(EvalErrorKind::Unbound, "unknown mode '" + e.text + "'");
      return EvalOutcome::of(static_cast<double>(*n));
    }

    case ExprKind::IterIndex:
      if (ctx.iter == nullptr)
        return EvalOutcome::fail(EvalErrorKind::Unbound, "iter.index unbound");
      return EvalOutcome::of(ctx.iter->index);
    case ExprKind::IterCount:
      if (ctx.iter == nullptr)
        return EvalOutcome::fail(EvalErrorKind::Unbound, "iter.count unbound");
      return EvalOutcome::of(ctx.iter->count);

    case ExprKind::Ident: {
      if (ctx.binders != nullptr) {
        auto it = ctx.binders->find(e.text);
        if (it != ctx.binders->end()) return EvalOutcome::of(it->second);
      }
      if (ctx.defines != nullptr) {
        auto it = ctx.defines->find(e.text);
        if (it != ctx.defines->end()) return EvalOutcome::of(it->second);
      }
      return EvalOutcome::fail(EvalErrorKind::Unbound,
                               "unbound identifier '" + e.text + "'");
    }

    case ExprKind::Unary: {
      EvalOutcome inner = eval_expr(*e.lhs, ctx);
      if (!inner.ok()) return inner;
      if (e.un == UnOp::Neg) {
        if (!value_is_num(inner.value()))
          return EvalOutcome::fail(EvalErrorKind::TypeMismatch,
                                   "negation needs a number");
        return EvalOutcome::of(-std::get<double>(inner.value()));
      }
      if (!value_is_bool(inner.value()))
        return EvalOutcome::fail(EvalErrorKind::TypeMismatch, "'not' needs a boolean");
      return EvalOutcome::of(!std::get<bool>(inner.value()));
    }

    case ExprKind::Binary: {
      if (e.bin == BinOp::And || e.bin == BinOp::Or) {
        EvalOutcome l = eval_expr(*e.lhs, ctx);
        if (!l.ok()) return l;
        if (!value_is_bool(l.value()))
          return EvalOutcome::fail(EvalErrorKind::TypeMismatch,
                                   "'and'/'or' need booleans");
        const bool lv = std::get<bool>(l.value());
        if (e.bin == BinOp::And && !lv) return EvalOutcome::of(false);
        if (e.bin == BinOp::Or && lv) return EvalOutcome::of(true);
        EvalOutcome r = eval_expr(*e.rhs, ctx);
        if (!r.ok()) return r;
        if (!value_is_bool(r.value()))
          return EvalOutcome::fail(EvalErrorKind::TypeMismatch,
                                   "'and'/'or' need booleans");
        return EvalOutcome::of(std::get<bool>(r.value()));
      }

      EvalOutcome l = eval_expr(*e.lhs, ctx);
      if (!l.ok()) return l;
      EvalOutcome r = eval_expr(*e.rhs, ctx);
      if (!r.ok()) return r;

      if (e.bin == BinOp::Eq || e.bin == BinOp::Ne) {
        if (l.value().index() != r.value().index())
          return EvalOutcome::fail(EvalErrorKind::TypeMismatch,
                                   "equality compares values of one type");
        const bool eq = l.value() == r.value();
        return EvalOutcome::of(e.bin == BinOp::Eq ? eq : !eq);
      }

      if (!value_is_num(l.value()) || !value_is_num(r.value()))
        return EvalOutcome::fail(EvalErrorKind::TypeMismatch,
                                 "operator needs numeric operands");
      const double a = std::get<double>(l.value());
      const double b = std::get<double>(r.value());
      switch (e.bin) {
        case BinOp::Add:
          return EvalOutcome::of(a + b);
        case BinOp::Sub:
          return EvalOutcome::of(a - b);
        case BinOp::Mul:
          return EvalOutcome::of(a * b);
        case BinOp::Div:
          if (b == 0.0)
            return EvalOutcome::fail(EvalErrorKind::DivisionByZero, "division by zero");
          return EvalOutcome::of(a / b);
        case BinOp::Lt:
          return EvalOutcome::of(a < b);
        case BinOp::Le:
          return EvalOutcome::of(a <= b);
        case BinOp::Gt:
          return EvalOutcome::of(a > b);
        case BinOp::Ge:
          return EvalOutcome::of(a >= b);
        default:
          return EvalOutcome::fail(EvalErrorKind::TypeMismatch, "bad operator");
      }
    }
  }
  return EvalOutcome::fail(EvalErrorKind::Unbound, "bad expression");
}

}  // namespace mavguard::dsl
