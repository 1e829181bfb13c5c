#include "tpet/dsl.hpp"

#include <algorithm>
#include <cmath>
#include <charconv>
#include <sstream>
#include <stdexcept>

#include "tpet/util.hpp"

namespace tpet::dsl {

const char* feature_name(Feature f) {
  switch (f) {
    case Feature::Pressure: return "pressure";
    case Feature::Queue: return "queue";
    case Feature::Wait: return "wait";
    case Feature::Starvation: return "starvation";
  }
  return "?";
}

const char* cat_feature_name(CatFeature f) {
  switch (f) {
    case CatFeature::Congestion: return "congestion";
    case CatFeature::Urgency: return "urgency";
    case CatFeature::Imbalance: return "imbalance";
    case CatFeature::DominantFlow: return "dominant_flow";
  }
  return "?";
}

const char* cmp_op_name(CmpOp op) {
  switch (op) {
    case CmpOp::Lt: return "<";
    case CmpOp::Le: return "<=";
    case CmpOp::Gt: return ">";
    case CmpOp::Ge: return ">=";
    case CmpOp::Eq: return "==";
    case CmpOp::Ne: return "!=";
  }
  return "?";
}

const char* mutation_kind_name(MutationKind k) {
  switch (k) {
    case MutationKind::ThresholdPerturb: return "threshold-perturb";
    case MutationKind::RuleInsert: return "rule-insert";
    case MutationKind::RuleDelete: return "rule-delete";
    case MutationKind::RuleSwap: return "rule-swap";
    case MutationKind::OperatorFlip: return "operator-flip";
    case MutationKind::SelectorSwap: return "selector-swap";
  }
  return "?";
}

std::string Diagnostic::to_string() const {
  std::ostringstream s;
  s << line << ":" << col << ": [" << code << "] " << message;
  return s.str();
}

bool BoolExpr::equals(const BoolExpr& o) const {
  if (kind != o.kind) return false;
  switch (kind) {
    case Kind::Compare: return lhs == o.lhs && rhs == o.rhs && cmp == o.cmp;
    case Kind::CatTest: return cat == o.cat && level == o.level;
    case Kind::StarvationTest: return phase == o.phase;
    case Kind::Not: return a->equals(*o.a);
    case Kind::Binary: return op == o.op && a->equals(*o.a) && b->equals(*o.b);
  }
  return false;
}

bool PolicyProgram::equals(const PolicyProgram& o) const {
  if (rules.size() != o.rules.size() || !(fallback == o.fallback) || phase_count != o.phase_count)
    return false;
  for (size_t i = 0; i < rules.size(); ++i)
    if (!rules[i].cond.equals(o.rules[i].cond) || !(rules[i].target == o.rules[i].target))
      return false;
  return true;
}

int expression_depth(const BoolExpr& e) {
  switch (e.kind) {
    case BoolExpr::Kind::Not: return 1 + expression_depth(*e.a);
    case BoolExpr::Kind::Binary:
      return 1 + std::max(expression_depth(*e.a), expression_depth(*e.b));
    default: return 1;
  }
}

const std::string& grammar_ebnf() {
  static const std::string g =
      "policy  := rule* default\n"
      "rule    := \"IF\" bexpr \"THEN\" pexpr\n"
      "default := \"ELSE\" pexpr\n"
      "pexpr   := INT | (\"argmax\"|\"argmin\") \"(\" FEATURE \")\"\n"
      "bexpr   := comparison | bexpr (\"AND\"|\"OR\") bexpr | \"NOT\" bexpr | \"(\" bexpr \")\"\n"
      "comparison := nexpr OP nexpr | CATFEATURE \"==\" LEVEL"
      " | \"starvation_risk\" \"[\" INT \"]\"\n"
      "nexpr   := NUMBER | FEATURE \"[\" INT \"]\" | (\"max\"|\"min\"|\"sum\") \"(\" FEATURE \")\"\n"
      "FEATURE := \"pressure\" | \"queue\" | \"wait\" | \"starvation\"\n"
      "CATFEATURE := \"congestion\" | \"urgency\" | \"imbalance\" | \"dominant_flow\"\n"
      "LEVEL   := \"Low\" | \"Moderate\" | \"High\" | \"Critical\" | \"Normal\" | \"None\""
      " | \"NS_Dominant\" | \"EW_Dominant\" | INT\n"
      "OP      := \">\" | \">=\" | \"<\" | \"<=\" | \"==\" | \"!=\"\n";
  return g;
}

// ---------------------------------------------------------------- lexer

namespace {

enum class Tok { Kw, Ident, Number, LParen, RParen, LBracket, RBracket, Op, End };

struct Token {
  Tok type = Tok::End;
  std::string text;
  double num = 0;
  int line = 1, col = 1;
};

struct ParseError {
  Diagnostic diag;
};

[[noreturn]] void err(int line, int col, const std::string& code, const std::string& msg) {
  throw ParseError{{line, col, code, msg}};
}

bool is_keyword(const std::string& s) {
  return s == "IF" || s == "THEN" || s == "ELSE" || s == "AND" || s == "OR" || s == "NOT";
}

std::vector<Token> lex(const std::string& src) {
  std::vector<Token> out;
  int line = 1, col = 1;
  size_t i = 0;
  auto advance = [&](size_t n) {
    for (size_t k = 0; k < n; ++k) {
      if (src[i + k] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    i += n;
  };
  while (i < src.size()) {
    char c = src[i];
    if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
      advance(1);
      continue;
    }
    Token t;
    t.line = line;
    t.col = col;
    if (c == '#') {  // comment to end of line
      while (i < src.size() && src[i] != '\n') advance(1);
      continue;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      size_t j = i;
      while (j < src.size() &&
             (std::isalnum(static_cast<unsigned char>(src[j])) || src[j] == '_'))
        ++j;
      t.text = src.substr(i, j - i);
      t.type = is_keyword(t.text) ? Tok::Kw : Tok::Ident;
      advance(j - i);
      out.push_back(std::move(t));
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) ||
        (c == '-' && i + 1 < src.size() && std::isdigit(static_cast<unsigned char>(src[i + 1])))) {
      size_t j = i + 1;
      while (j < src.size() &&
             (std::isdigit(static_cast<unsigned char>(src[j])) || src[j] == '.'))
        ++j;
      t.text = src.substr(i, j - i);
      double v = 0;
      auto [p, ec] = std::from_chars(src.data() + i, src.data() + j, v);
      if (ec != std::errc{} || p != src.data() + j)
        err(line, col, "syntax", "malformed number '" + t.text + "'");
      t.type = Tok::Number;
      t.num = v;
      advance(j - i);
      out.push_back(std::move(t));
      continue;
    }
    auto two = src.substr(i, 2);
    if (two == "==" || two == "!=" || two == ">=" || two == "<=") {
      t.type = Tok::Op;
      t.text = two;
      advance(2);
      out.push_back(std::move(t));
      continue;
    }
    if (c == '>' || c == '<') {
      t.type = Tok::Op;
      t.text = std::string(1, c);
      advance(1);
      out.push_back(std::move(t));
      continue;
    }
    if (c == '(') t.type = Tok::LParen;
    else if (c == ')') t.type = Tok::RParen;
    else if (c == '[') t.type = Tok::LBracket;
    else if (c == ']') t.type = Tok::RBracket;
    else err(line, col, "syntax", std::string("unexpected character '") + c + "'");
    t.text = std::string(1, c);
    advance(1);
    out.push_back(std::move(t));
  }
  Token end;
  end.type = Tok::End;
  end.line = line;
  end.col = col;
  out.push_back(end);
  return out;
}

// ---------------------------------------------------------------- parser

struct Parser {
  const std::vector<Token>& toks;
  size_t pos = 0;
  const Signature& sig;

  const Token& peek() const { return toks[pos]; }
  const Token& next() { return toks[pos++]; }

  bool at_kw(const char* kw) const { return peek().type == Tok::Kw && peek().text == kw; }

  void expect_kw(const char* kw) {
    if (!at_kw(kw))
      err(peek().line, peek().col, "syntax",
          std::string("expected '") + kw + "', found " + describe(peek()));
    next();
  }

  static std::string describe(const Token& t) {
    if (t.type == Tok::End) return "end of input";
    return "'" + t.text + "'";
  }

  int expect_int(const char* what) {
    if (peek().type != Tok::Number || peek().num != std::floor(peek().num))
      err(peek().line, peek().col, "syntax",
          std::string("expected integer ") + what + ", found " + describe(peek()));
    return static_cast<int>(next().num);
  }

  void check_phase(int p, const Token& at) {
    if (p < 0 || p >= sig.phase_count)
      err(at.line, at.col, "phase-range",
          "phase index " + std::to_string(p) + " outside [0, " +
              std::to_string(sig.phase_count) + ")");
  }

  std::optional<Feature> feature_of(const std::string& s) {
    if (s == "pressure") return Feature::Pressure;
    if (s == "queue") return Feature::Queue;
    if (s == "wait") return Feature::Wait;
    if (s == "starvation") return Feature::Starvation;
    return std::nullopt;
  }

  std::optional<CatFeature> cat_of(const std::string& s) {
    if (s == "congestion") return CatFeature::Congestion;
    if (s == "urgency") return CatFeature::Urgency;
    if (s == "imbalance") return CatFeature::Imbalance;
    if (s == "dominant_flow") return CatFeature::DominantFlow;
    return std::nullopt;
  }

  Feature expect_feature() {
    const Token& t = peek();
    if (t.type != Tok::Ident)
      err(t.line, t.col, "syntax", "expected a feature name, found " + describe(t));
    auto f = feature_of(t.text);
    if (!f) err(t.line, t.col, "unknown-feature", "unknown feature '" + t.text + "'");
    next();
    return *f;
  }

  NumExpr parse_nexpr() {
    const Token& t = peek();
    if (t.type == Tok::Number) {
      NumExpr e;
      e.kind = NumExpr::Kind::Literal;
      e.value = next().num;
      return e;
    }
    if (t.type == Tok::Ident) {
      if (t.text == "max" || t.text == "min" || t.text == "sum") {
        NumExpr e;
        e.kind = NumExpr::Kind::Aggregate;
        e.agg = t.text == "max" ? AggOp::Max : t.text == "min" ? AggOp::Min : AggOp::Sum;
        next();
        expect_punct(Tok::LParen, "(");
        e.feature = expect_feature();
        expect_punct(Tok::RParen, ")");
        return e;
      }
      auto f = feature_of(t.text);
      if (!f) err(t.line, t.col, "unknown-feature", "unknown feature '" + t.text + "'");
      next();
      NumExpr e;
      e.kind = NumExpr::Kind::FeatureIndex;
      e.feature = *f;
      expect_punct(Tok::LBracket, "[");
      const Token& it = peek();
      e.index = expect_int("feature index");
      check_phase(e.index, it);
      expect_punct(Tok::RBracket, "]");
      return e;
    }
    err(t.line, t.col, "syntax", "expected a numeric expression, found " + describe(t));
  }

  void expect_punct(Tok type, const char* what) {
    if (peek().type != type)
      err(peek().line, peek().col, "syntax",
          std::string("expected '") + what + "', found " + describe(peek()));
    next();
  }

  CmpOp expect_cmp() {
    const Token& t = peek();
    if (t.type != Tok::Op)
      err(t.line, t.col, "syntax", "expected a comparison operator, found " + describe(t));
    next();
    if (t.text == "<") return CmpOp::Lt;
    if (t.text == "<=") return CmpOp::Le;
    if (t.text == ">") return CmpOp::Gt;
    if (t.text == ">=") return CmpOp::Ge;
    if (t.text == "==") return CmpOp::Eq;
    return CmpOp::Ne;
  }

  BoolExpr parse_comparison() {
    const Token& t = peek();
    if (t.type == Tok::Ident) {
      if (auto cf = cat_of(t.text)) {
        next();
        const Token& opt = peek();
        CmpOp op = expect_cmp();
        if (op != CmpOp::Eq)
          err(opt.line, opt.col, "syntax", "categorical tests only support '=='");
        BoolExpr e;
        e.kind = BoolExpr::Kind::CatTest;
        e.cat = *cf;
        e.level = expect_level(*cf);
        return e;
      }
      if (t.text == "starvation_risk") {
        next();
        expect_punct(Tok::LBracket, "[");
        const Token& it = peek();
        int p = expect_int("phase index");
        check_phase(p, it);
        expect_punct(Tok::RBracket, "]");
        BoolExpr e;
        e.kind = BoolExpr::Kind::StarvationTest;
        e.phase = p;
        return e;
      }
    }
    BoolExpr e;
    e.kind = BoolExpr::Kind::Compare;
    e.lhs = parse_nexpr();
    e.cmp = expect_cmp();
    e.rhs = parse_nexpr();
    return e;
  }

  int expect_level(CatFeature cf) {
    const Token& t = peek();
    if (cf == CatFeature::DominantFlow) {
      if (t.type == Tok::Number) {
        const Token& at = peek();
        int p = expect_int("phase id");
        check_phase(p, at);
        return p;
      }
      if (t.type == Tok::Ident && t.text == "None") {
        next();
        return -1;
      }
      err(t.line, t.col, "unknown-level", "dominant_flow compares to a phase id or None");
    }
    if (t.type != Tok::Ident)
      err(t.line, t.col, "syntax", "expected a level name, found " + describe(t));
    const std::string& s = t.text;
    int level = -1;
    switch (cf) {
      case CatFeature::Congestion:
        if (s == "Low") level = 0;
        else if (s == "Moderate") level = 1;
        else if (s == "High") level = 2;
        else if (s == "Critical") level = 3;
        break;
      case CatFeature::Urgency:
        if (s == "Normal") level = 0;
        else if (s == "Critical") level = 1;
        break;
      case CatFeature::Imbalance:
        if (s == "None") level = 0;
        else if (s == "NS_Dominant") level = 1;
        else if (s == "EW_Dominant") level = 2;
        break;
      default: break;
    }
    if (level < 0)
      err(t.line, t.col, "unknown-level",
          "'" + s + "' is not a level of " + cat_feature_name(cf));
    next();
    return level;
  }

  BoolExpr parse_primary() {
    if (peek().type == Tok::LParen) {
      next();
      BoolExpr e = parse_bexpr();
      expect_punct(Tok::RParen, ")");
      return e;
    }
    return parse_comparison();
  }

  BoolExpr parse_unary() {
    if (at_kw("NOT")) {
      next();
      BoolExpr e;
      e.kind = BoolExpr::Kind::Not;
      e.a = std::make_shared<BoolExpr>(parse_unary());
      return e;
    }
    return parse_primary();
  }

  BoolExpr parse_and() {
    BoolExpr lhs = parse_unary();
    while (at_kw("AND")) {
      next();
      BoolExpr rhs = parse_unary();
      BoolExpr e;
      e.kind = BoolExpr::Kind::Binary;
      e.op = BoolOp::And;
      e.a = std::make_shared<BoolExpr>(std::move(lhs));
      e.b = std::make_shared<BoolExpr>(std::move(rhs));
      lhs = std::move(e);
    }
    return lhs;
  }

  BoolExpr parse_bexpr() {
    BoolExpr lhs = parse_and();
    while (at_kw("OR")) {
      next();
      BoolExpr rhs = parse_and();
      BoolExpr e;
      e.kind = BoolExpr::Kind::Binary;
      e.op = BoolOp::Or;
      e.a = std::make_shared<BoolExpr>(std::move(lhs));
      e.b = std::make_shared<BoolExpr>(std::move(rhs));
      lhs = std::move(e);
    }
    return lhs;
  }

  PhaseExpr parse_pexpr() {
    const Token& t = peek();
    if (t.type == Tok::Number) {
      PhaseExpr e;
      e.kind = PhaseExpr::Kind::Literal;
      const Token& at = peek();
      e.phase = expect_int("phase id");
      check_phase(e.phase, at);
      return e;
    }
    if (t.type == Tok::Ident && (t.text == "argmax" || t.text == "argmin")) {
      PhaseExpr e;
      e.kind = PhaseExpr::Kind::Select;
      e.sel = t.text == "argmax" ? SelOp::ArgMax : SelOp::ArgMin;
      next();
      expect_punct(Tok::LParen, "(");
      e.feature = expect_feature();
      expect_punct(Tok::RParen, ")");
      return e;
    }
    err(t.line, t.col, "syntax",
        "expected a phase id or argmax/argmin selector, found " + describe(t));
  }
};

}  // namespace

ParseResult parse(const PolicySource& source, const Signature& sig) {
  ParseResult result;
  try {
    auto toks = lex(source.text);
    Parser p{toks, 0, sig};
    PolicyProgram prog;
    prog.phase_count = sig.phase_count;
    while (p.at_kw("IF")) {
      p.next();
      const Token& at = p.peek();
      Rule r;
      r.cond = p.parse_bexpr();
      if (expression_depth(r.cond) > sig.max_depth)
        err(at.line, at.col, "limit-exceeded",
            "expression depth exceeds " + std::to_string(sig.max_depth));
      p.expect_kw("THEN");
      r.target = p.parse_pexpr();
      prog.rules.push_back(std::move(r));
      if (static_cast<int>(prog.rules.size()) > sig.max_rules)
        err(at.line, at.col, "limit-exceeded",
            "rule count exceeds " + std::to_string(sig.max_rules));
    }
    p.expect_kw("ELSE");
    prog.fallback = p.parse_pexpr();
    if (p.peek().type != Tok::End)
      err(p.peek().line, p.peek().col, "syntax",
          "trailing input after the default: " + Parser::describe(p.peek()));
    result.program = std::move(prog);
  } catch (const ParseError& e) {
    result.error = e.diag;
  }
  return result;
}

// ---------------------------------------------------------------- evaluate

namespace {

const std::vector<double>& feature_vector(const ssa::StructuredFacts& facts, Feature f) {
  switch (f) {
    case Feature::Pressure: return facts.pressure;
    case Feature::Queue: return facts.queue;
    case Feature::Wait: return facts.wait;
    case Feature::Starvation: return facts.starvation;
  }
  return facts.pressure;
}

double eval_num(const NumExpr& e, const ssa::StructuredFacts& facts) {
  switch (e.kind) {
    case NumExpr::Kind::Literal: return e.value;
    case NumExpr::Kind::FeatureIndex:
      return feature_vector(facts, e.feature)[static_cast<size_t>(e.index)];
    case NumExpr::Kind::Aggregate: {
      const auto& v = feature_vector(facts, e.feature);
      if (e.agg == AggOp::Sum) {
        double s = 0;
        for (double x : v) s += x;
        return s;
      }
      double best = v[0];
      for (double x : v) best = e.agg == AggOp::Max ? std::max(best, x) : std::min(best, x);
      return best;
    }
  }
  return 0;
}

bool eval_bool(const BoolExpr& e, const ssa::StructuredFacts& facts) {
  switch (e.kind) {
    case BoolExpr::Kind::Compare: {
      double l = eval_num(e.lhs, facts), r = eval_num(e.rhs, facts);
      switch (e.cmp) {
        case CmpOp::Lt: return l < r;
        case CmpOp::Le: return l <= r;
        case CmpOp::Gt: return l > r;
        case CmpOp::Ge: return l >= r;
        case CmpOp::Eq: return l == r;
        case CmpOp::Ne: return l != r;
      }
      return false;
    }
    case BoolExpr::Kind::CatTest:
      switch (e.cat) {
        case CatFeature::Congestion: return static_cast<int>(facts.congestion) == e.level;
        case CatFeature::Urgency: return static_cast<int>(facts.urgency) == e.level;
        case CatFeature::Imbalance: return static_cast<int>(facts.imbalance) == e.level;
        case CatFeature::DominantFlow:
          return e.level < 0 ? !facts.dominant_flow.has_value()
                             : facts.dominant_flow.has_value() && *facts.dominant_flow == e.level;
      }
      return false;
    case BoolExpr::Kind::StarvationTest:
      return facts.starvation_risk[static_cast<size_t>(e.phase)];
    case BoolExpr::Kind::Not: return !eval_bool(*e.a, facts);
    case BoolExpr::Kind::Binary:
      return e.op == BoolOp::And ? eval_bool(*e.a, facts) && eval_bool(*e.b, facts)
                                 : eval_bool(*e.a, facts) || eval_bool(*e.b, facts);
  }
  return false;
}

int eval_phase(const PhaseExpr& e, const ssa::StructuredFacts& facts) {
  if (e.kind == PhaseExpr::Kind::Literal) return e.phase;
  const auto& v = feature_vector(facts, e.feature);
  int best = 0;
  for (int i = 1; i < static_cast<int>(v.size()); ++i) {
    if (e.sel == SelOp::ArgMax ? v[static_cast<size_t>(i)] > v[static_cast<size_t>(best)]
                               : v[static_cast<size_t>(i)] < v[static_cast<size_t>(best)])
      best = i;  // strict improvement only: ties stay on the lowest index
  }
  return best;
}

}  // namespace

int evaluate(const PolicyProgram& program, const ssa::StructuredFacts& facts) {
  for (const auto& r : program.rules)
    if (eval_bool(r.cond, facts)) return eval_phase(r.target, facts);
  return eval_phase(program.fallback, facts);
}

// ---------------------------------------------------------------- render

namespace {

std::string render_num(const NumExpr& e) {
  switch (e.kind) {
    case NumExpr::Kind::Literal: return util::fmt_shortest(e.value);
    case NumExpr::Kind::FeatureIndex:
      return std::string(feature_name(e.feature)) + "[" + std::to_string(e.index) + "]";
    case NumExpr::Kind::Aggregate: {
      const char* n = e.agg == AggOp::Max ? "max" : e.agg == AggOp::Min ? "min" : "sum";
      return std::string(n) + "(" + feature_name(e.feature) + ")";
    }
  }
  return "0";
}

std::string level_name(CatFeature cf, int level) {
  switch (cf) {
    case CatFeature::Congestion:
      return to_string(static_cast<ssa::Congestion>(level));
    case CatFeature::Urgency:
      return to_string(static_cast<ssa::Urgency>(level));
    case CatFeature::Imbalance:
      return to_string(static_cast<ssa::Imbalance>(level));
    case CatFeature::DominantFlow:
      return level < 0 ? "None" : std::to_string(level);
  }
  return "?";
}

std::string render_bool(const BoolExpr& e) {
  switch (e.kind) {
    case BoolExpr::Kind::Compare:
      return render_num(e.lhs) + " " + cmp_op_name(e.cmp) + " " + render_num(e.rhs);
    case BoolExpr::Kind::CatTest:
      return std::string(cat_feature_name(e.cat)) + " == " + level_name(e.cat, e.level);
    case BoolExpr::Kind::StarvationTest:
      return "starvation_risk[" + std::to_string(e.phase) + "]";
    case BoolExpr::Kind::Not: return "NOT " + render_bool(*e.a);
    case BoolExpr::Kind::Binary:
      // Canonical form is fully parenthesized at every binary node.
      return "(" + render_bool(*e.a) + (e.op == BoolOp::And ? " AND " : " OR ") +
             render_bool(*e.b) + ")";
  }
  return "";
}

std::string render_phase(const PhaseExpr& e) {
  if (e.kind == PhaseExpr::Kind::Literal) return std::to_string(e.phase);
  return std::string(e.sel == SelOp::ArgMax ? "argmax" : "argmin") + "(" +
         feature_name(e.feature) + ")";
}

}  // namespace

PolicySource render(const PolicyProgram& program) {
  std::ostringstream s;
  for (const auto& r : program.rules)
    s << "IF " << render_bool(r.cond) << " THEN " << render_phase(r.target) << "\n";
  s << "ELSE " << render_phase(program.fallback) << "\n";
  return {s.str(), "", 0};
}

// ---------------------------------------------------------------- mutation

namespace {

// Site-indexed rewrites over the shared-children tree: `remaining` counts down
// in walk order (rules first to last, conditions pre-order, lhs before rhs)
// and the rewrite fires where it reaches zero.
BoolExpr rewrite_literal(const BoolExpr& e, int& remaining, double replacement) {
  BoolExpr out = e;
  switch (e.kind) {
    case BoolExpr::Kind::Compare:
      if (e.lhs.kind == NumExpr::Kind::Literal && remaining-- == 0) out.lhs.value = replacement;
      if (e.rhs.kind == NumExpr::Kind::Literal && remaining-- == 0) out.rhs.value = replacement;
      return out;
    case BoolExpr::Kind::Not:
      out.a = std::make_shared<BoolExpr>(rewrite_literal(*e.a, remaining, replacement));
      return out;
    case BoolExpr::Kind::Binary:
      out.a = std::make_shared<BoolExpr>(rewrite_literal(*e.a, remaining, replacement));
      out.b = std::make_shared<BoolExpr>(rewrite_literal(*e.b, remaining, replacement));
      return out;
    default: return out;
  }
}

void count_literals(const BoolExpr& e, int& n) {
  switch (e.kind) {
    case BoolExpr::Kind::Compare:
      if (e.lhs.kind == NumExpr::Kind::Literal) ++n;
      if (e.rhs.kind == NumExpr::Kind::Literal) ++n;
      break;
    case BoolExpr::Kind::Not: count_literals(*e.a, n); break;
    case BoolExpr::Kind::Binary:
      count_literals(*e.a, n);
      count_literals(*e.b, n);
      break;
    default: break;
  }
}

double literal_at(const BoolExpr& e, int& remaining, bool& found) {
  switch (e.kind) {
    case BoolExpr::Kind::Compare:
      if (e.lhs.kind == NumExpr::Kind::Literal && remaining-- == 0) {
        found = true;
        return e.lhs.value;
      }
      if (e.rhs.kind == NumExpr::Kind::Literal && remaining-- == 0) {
        found = true;
        return e.rhs.value;
      }
      return 0;
    case BoolExpr::Kind::Not: return literal_at(*e.a, remaining, found);
    case BoolExpr::Kind::Binary: {
      double v = literal_at(*e.a, remaining, found);
      if (found) return v;
      return literal_at(*e.b, remaining, found);
    }
    default: return 0;
  }
}

void count_ops(const BoolExpr& e, int& n) {
  switch (e.kind) {
    case BoolExpr::Kind::Compare: ++n; break;
    case BoolExpr::Kind::Not: count_ops(*e.a, n); break;
    case BoolExpr::Kind::Binary:
      ++n;
      count_ops(*e.a, n);
      count_ops(*e.b, n);
      break;
    default: break;
  }
}

CmpOp flip_cmp(CmpOp op) {
  switch (op) {
    case CmpOp::Lt: return CmpOp::Gt;
    case CmpOp::Gt: return CmpOp::Lt;
    case CmpOp::Le: return CmpOp::Ge;
    case CmpOp::Ge: return CmpOp::Le;
    case CmpOp::Eq: return CmpOp::Ne;
    case CmpOp::Ne: return CmpOp::Eq;
  }
  return op;
}

BoolExpr rewrite_op(const BoolExpr& e, int& remaining) {
  BoolExpr out = e;
  switch (e.kind) {
    case BoolExpr::Kind::Compare:
      if (remaining-- == 0) out.cmp = flip_cmp(e.cmp);
      return out;
    case BoolExpr::Kind::Not:
      out.a = std::make_shared<BoolExpr>(rewrite_op(*e.a, remaining));
      return out;
    case BoolExpr::Kind::Binary:
      if (remaining-- == 0) out.op = e.op == BoolOp::And ? BoolOp::Or : BoolOp::And;
      out.a = std::make_shared<BoolExpr>(rewrite_op(*e.a, remaining));
      out.b = std::make_shared<BoolExpr>(rewrite_op(*e.b, remaining));
      return out;
    default: return out;
  }
}

Feature random_feature(util::Rng& rng) {
  return static_cast<Feature>(rng.uniform_int(4));
}

PhaseExpr random_target(util::Rng& rng, const Signature& sig) {
  PhaseExpr e;
  if (rng.chance(0.5)) {
    e.kind = PhaseExpr::Kind::Literal;
    e.phase = rng.uniform_int(sig.phase_count);
  } else {
    e.kind = PhaseExpr::Kind::Select;
    e.sel = rng.chance(0.5) ? SelOp::ArgMax : SelOp::ArgMin;
    e.feature = random_feature(rng);
  }
  return e;
}

BoolExpr random_leaf(util::Rng& rng, const Signature& sig) {
  BoolExpr e;
  int r = rng.uniform_int(10);
  if (r < 6) {
    e.kind = BoolExpr::Kind::Compare;
    e.lhs.kind = NumExpr::Kind::FeatureIndex;
    e.lhs.feature = random_feature(rng);
    e.lhs.index = rng.uniform_int(sig.phase_count);
    static const CmpOp ops[4] = {CmpOp::Gt, CmpOp::Ge, CmpOp::Lt, CmpOp::Le};
    e.cmp = ops[rng.uniform_int(4)];
    e.rhs.kind = NumExpr::Kind::Literal;
    e.rhs.value = 1 + rng.uniform_int(30);
  } else if (r < 8) {
    e.kind = BoolExpr::Kind::CatTest;
    int c = rng.uniform_int(4);
    e.cat = static_cast<CatFeature>(c);
    switch (e.cat) {
      case CatFeature::Congestion: e.level = rng.uniform_int(4); break;
      case CatFeature::Urgency: e.level = rng.uniform_int(2); break;
      case CatFeature::Imbalance: e.level = rng.uniform_int(3); break;
      case CatFeature::DominantFlow: e.level = rng.uniform_int(sig.phase_count + 1) - 1; break;
    }
  } else {
    e.kind = BoolExpr::Kind::StarvationTest;
    e.phase = rng.uniform_int(sig.phase_count);
  }
  return e;
}

BoolExpr random_cond(util::Rng& rng, const Signature& sig, int depth) {
  int r = rng.uniform_int(10);
  if (depth > 1 && r >= 7) {
    BoolExpr e;
    if (r == 9) {
      e.kind = BoolExpr::Kind::Not;
      e.a = std::make_shared<BoolExpr>(random_cond(rng, sig, depth - 1));
    } else {
      e.kind = BoolExpr::Kind::Binary;
      e.op = r == 7 ? BoolOp::And : BoolOp::Or;
      e.a = std::make_shared<BoolExpr>(random_cond(rng, sig, depth - 1));
      e.b = std::make_shared<BoolExpr>(random_cond(rng, sig, depth - 1));
    }
    return e;
  }
  return random_leaf(rng, sig);
}

Rule random_rule(util::Rng& rng, const Signature& sig) {
  return {random_cond(rng, sig, 3), random_target(rng, sig)};
}

}  // namespace

MutationResult mutate_ast(const PolicyProgram& program, uint64_t seed, MutationKind kind,
                          const Signature& sig) {
  util::Rng rng(util::splitmix64(seed) ^ 0x7eA71D5ULL);
  MutationResult res;
  res.program = program;

  switch (kind) {
    case MutationKind::ThresholdPerturb: {
      int total = 0;
      for (const auto& r : program.rules) count_literals(r.cond, total);
      if (total == 0) {
        res.reason = "no numeric thresholds to perturb";
        return res;
      }
      int site = rng.uniform_int(total);
      // Locate the rule owning the site, then perturb within it.
      int offset = site;
      for (size_t ri = 0; ri < program.rules.size(); ++ri) {
        int here = 0;
        count_literals(program.rules[ri].cond, here);
        if (offset < here) {
          int idx = offset;
          bool found = false;
          double old = literal_at(program.rules[ri].cond, idx, found);
          double delta = std::max(1.0, std::fabs(old) * rng.uniform(0.1, 0.3));
          double neu = old + (rng.chance(0.5) ? delta : -delta);
          neu = std::round(neu * 10.0) / 10.0;
          int idx2 = offset;
          res.program.rules[ri].cond = rewrite_literal(program.rules[ri].cond, idx2, neu);
          res.applied = true;
          return res;
        }
        offset -= here;
      }
      res.reason = "no numeric thresholds to perturb";
      return res;
    }
    case MutationKind::OperatorFlip: {
      int total = 0;
      for (const auto& r : program.rules) count_ops(r.cond, total);
      if (total == 0) {
        res.reason = "no comparison or boolean operators to flip";
        return res;
      }
      int site = rng.uniform_int(total);
      for (size_t ri = 0; ri < program.rules.size(); ++ri) {
        int here = 0;
        count_ops(program.rules[ri].cond, here);
        if (site < here) {
          int idx = site;
          res.program.rules[ri].cond = rewrite_op(program.rules[ri].cond, idx);
          res.applied = true;
          return res;
        }
        site -= here;
      }
      return res;
    }
    case MutationKind::SelectorSwap: {
      std::vector<PhaseExpr*> sites;
      for (auto& r : res.program.rules)
        if (r.target.kind == PhaseExpr::Kind::Select) sites.push_back(&r.target);
      if (res.program.fallback.kind == PhaseExpr::Kind::Select)
        sites.push_back(&res.program.fallback);
      if (sites.empty()) {
        res.reason = "no argmax/argmin selectors present";
        return res;
      }
      PhaseExpr* site = sites[static_cast<size_t>(rng.uniform_int(static_cast<int>(sites.size())))];
      site->sel = site->sel == SelOp::ArgMax ? SelOp::ArgMin : SelOp::ArgMax;
      res.applied = true;
      return res;
    }
    case MutationKind::RuleInsert: {
      if (static_cast<int>(program.rules.size()) >= sig.max_rules) {
        res.reason = "rule limit reached";
        return res;
      }
      int pos = rng.uniform_int(static_cast<int>(program.rules.size()) + 1);
      res.program.rules.insert(res.program.rules.begin() + pos, random_rule(rng, sig));
      res.applied = true;
      return res;
    }
    case MutationKind::RuleDelete: {
      if (program.rules.empty()) {
        res.reason = "default-only program has no rule to delete";
        return res;
      }
      int pos = rng.uniform_int(static_cast<int>(program.rules.size()));
      res.program.rules.erase(res.program.rules.begin() + pos);
      res.applied = true;
      return res;
    }
    case MutationKind::RuleSwap: {
      if (program.rules.size() < 2) {
        res.reason = "fewer than two rules to swap";
        return res;
      }
      int n = static_cast<int>(program.rules.size());
      int i = rng.uniform_int(n);
      int j = rng.uniform_int(n - 1);
      if (j >= i) ++j;
      std::swap(res.program.rules[static_cast<size_t>(i)],
                res.program.rules[static_cast<size_t>(j)]);
      res.applied = true;
      return res;
    }
  }
  return res;
}

PolicyProgram random_program(uint64_t seed, const Signature& sig) {
  util::Rng rng(util::splitmix64(seed) ^ 0x9E11E12ULL);
  PolicyProgram p;
  p.phase_count = sig.phase_count;
  int n = rng.uniform_int(4);
  for (int i = 0; i < n; ++i) p.rules.push_back(random_rule(rng, sig));
  p.fallback = random_target(rng, sig);
  return p;
}

ssa::StructuredFacts random_facts(uint64_t seed, int phase_count) {
  util::Rng rng(util::splitmix64(seed) ^ 0xFAC75ULL);
  ssa::StructuredFacts f;
  const size_t n = static_cast<size_t>(phase_count);
  f.pressure.resize(n);
  f.queue.resize(n);
  f.wait.resize(n);
  f.starvation.resize(n);
  f.starvation_risk.resize(n);
  for (size_t i = 0; i < n; ++i) {
    f.pressure[i] = rng.uniform(-10.0, 50.0);
    f.queue[i] = rng.uniform(0.0, 40.0);
    f.wait[i] = rng.uniform(0.0, 240.0);
    f.starvation[i] = rng.uniform(0.0, 400.0);
    f.starvation_risk[i] = rng.chance(0.2);
  }
  f.congestion = static_cast<ssa::Congestion>(rng.uniform_int(4));
  f.urgency = static_cast<ssa::Urgency>(rng.uniform_int(2));
  f.imbalance = static_cast<ssa::Imbalance>(rng.uniform_int(3));
  if (rng.chance(0.5)) f.dominant_flow = rng.uniform_int(phase_count);
  return f;
}

}  // namespace tpet::dsl
