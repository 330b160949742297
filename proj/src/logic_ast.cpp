#include "logiccar/logic_ast.hpp"

#include <cctype>
#include <set>
#include <sstream>

namespace logiccar {

Formula Formula::pred(LabelRef ref, std::string name, std::string var) {
  Formula f;
  f.kind_ = Kind::kPred;
  f.ref_ = ref;
  f.name_ = std::move(name);
  f.var_ = std::move(var);
  return f;
}

Formula Formula::negation(Formula a) {
  Formula f;
  f.kind_ = Kind::kNot;
  f.lhs_ = std::make_shared<const Formula>(std::move(a));
  return f;
}

Formula Formula::binary(Kind kind, Formula a, Formula b) {
  Formula f;
  f.kind_ = kind;
  f.lhs_ = std::make_shared<const Formula>(std::move(a));
  f.rhs_ = std::make_shared<const Formula>(std::move(b));
  return f;
}

Formula Formula::conj(Formula a, Formula b) { return binary(Kind::kAnd, std::move(a), std::move(b)); }
Formula Formula::disj(Formula a, Formula b) { return binary(Kind::kOr, std::move(a), std::move(b)); }
Formula Formula::implies(Formula a, Formula b) { return binary(Kind::kImplies, std::move(a), std::move(b)); }

Formula Formula::forall(std::string var, Formula body) {
  Formula f;
  f.kind_ = Kind::kForAll;
  f.var_ = std::move(var);
  f.lhs_ = std::make_shared<const Formula>(std::move(body));
  return f;
}

bool operator==(const Formula& a, const Formula& b) {
  if (a.kind_ != b.kind_) return false;
  switch (a.kind_) {
    case Formula::Kind::kPred:
      return a.ref_ == b.ref_ && a.name_ == b.name_ && a.var_ == b.var_;
    case Formula::Kind::kNot:
      return *a.lhs_ == *b.lhs_;
    case Formula::Kind::kForAll:
      return a.var_ == b.var_ && *a.lhs_ == *b.lhs_;
    default:
      return *a.lhs_ == *b.lhs_ && *a.rhs_ == *b.rhs_;
  }
}

// ---------------------------------------------------------------------------

Vocabulary::Vocabulary(const LabelSpace& ls, const Hierarchy* h) {
  auto fill = [this](Granularity g, std::vector<std::string> names) {
    auto& out = slugs_[index_of(g)];
    std::set<std::string> seen;
    for (const auto& n : names) {
      out.push_back(slugify(n));
      if (out.back().empty() || !seen.insert(out.back()).second)
        throw LabelSpaceError("label '" + n + "' does not have a unique " + std::string(granularity_name(g)) +
                              " predicate name");
    }
  };
  std::vector<std::string> comps;
  for (Index c = 0; c < ls.num_compositions(); ++c) comps.push_back(ls.composition_name(c));
  fill(Granularity::kComposition, comps);
  fill(Granularity::kVerb, ls.verbs);
  fill(Granularity::kObject, ls.objects);
  if (h != nullptr) {
    fill(Granularity::kCoarseVerb, h->coarse_verb_names);
    fill(Granularity::kCoarseObject, h->coarse_object_names);
  }
}

std::optional<LabelRef> Vocabulary::resolve(Granularity g, std::string_view slug) const {
  const auto& names = slugs_[index_of(g)];
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == slug) return LabelRef{g, static_cast<Index>(i)};
  return std::nullopt;
}

const std::string& Vocabulary::slug(LabelRef ref) const {
  return slugs_[index_of(ref.granularity)].at(static_cast<std::size_t>(ref.index));
}

Index Vocabulary::cardinality(Granularity g) const { return static_cast<Index>(slugs_[index_of(g)].size()); }

// ---------------------------------------------------------------------------

ParseError::ParseError(const std::string& message, int line, int column)
    : std::runtime_error("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + message),
      line_(line),
      column_(column) {}

namespace {

struct Token {
  enum class Kind { kIdent, kColon, kLParen, kRParen, kArrow, kEnd };
  Kind kind = Kind::kEnd;
  std::string text;
  int column = 0;
};

class LineParser {
 public:
  LineParser(std::string_view line, int line_no, const Vocabulary& vocab)
      : line_no_(line_no), vocab_(vocab) {
    tokenize(line);
  }

  Formula parse_rule() {
    expect_keyword("forall");
    const Token& var = expect(Token::Kind::kIdent, "variable name");
    if (is_keyword(var.text)) fail("keyword '" + var.text + "' cannot be a variable", var.column);
    bound_ = var.text;
    expect(Token::Kind::kLParen, "'('");
    Formula body = parse_impl();
    expect(Token::Kind::kRParen, "')'");
    if (peek().kind != Token::Kind::kEnd) fail("unexpected '" + peek().text + "' after rule", peek().column);
    return Formula::forall(bound_, std::move(body));
  }

 private:
  static bool is_keyword(std::string_view s) { return s == "forall" || s == "not" || s == "and" || s == "or"; }

  void tokenize(std::string_view line) {
    std::size_t i = 0;
    while (i < line.size()) {
      const char ch = line[i];
      const int col = static_cast<int>(i) + 1;
      if (ch == '#') break;
      if (std::isspace(static_cast<unsigned char>(ch))) {
        ++i;
        continue;
      }
      if (std::isalnum(static_cast<unsigned char>(ch)) || ch == '_') {
        std::size_t j = i;
        while (j < line.size() && (std::isalnum(static_cast<unsigned char>(line[j])) || line[j] == '_')) ++j;
        tokens_.push_back({Token::Kind::kIdent, std::string(line.substr(i, j - i)), col});
        i = j;
      } else if (ch == ':') {
        tokens_.push_back({Token::Kind::kColon, ":", col});
        ++i;
      } else if (ch == '(') {
        tokens_.push_back({Token::Kind::kLParen, "(", col});
        ++i;
      } else if (ch == ')') {
        tokens_.push_back({Token::Kind::kRParen, ")", col});
        ++i;
      } else if (ch == '=' && i + 1 < line.size() && line[i + 1] == '>') {
        tokens_.push_back({Token::Kind::kArrow, "=>", col});
        i += 2;
      } else {
        fail(std::string("unexpected character '") + ch + "'", col);
      }
    }
    tokens_.push_back({Token::Kind::kEnd, "end of line", static_cast<int>(line.size()) + 1});
  }

  [[noreturn]] void fail(const std::string& msg, int col) const { throw ParseError(msg, line_no_, col); }

  const Token& peek(std::size_t ahead = 0) const { return tokens_[std::min(pos_ + ahead, tokens_.size() - 1)]; }
  const Token& next() {
    const Token& t = tokens_[pos_];
    if (pos_ + 1 < tokens_.size()) ++pos_;
    return t;
  }

  const Token& expect(Token::Kind kind, const char* what) {
    if (peek().kind != kind) fail(std::string("expected ") + what + ", found '" + peek().text + "'", peek().column);
    return next();
  }

  void expect_keyword(const char* kw) {
    if (peek().kind != Token::Kind::kIdent || peek().text != kw)
      fail(std::string("expected '") + kw + "', found '" + peek().text + "'", peek().column);
    next();
  }

  bool at_keyword(const char* kw) const { return peek().kind == Token::Kind::kIdent && peek().text == kw; }

  Formula parse_impl() {
    Formula lhs = parse_disj();
    if (peek().kind == Token::Kind::kArrow) {
      next();
      return Formula::implies(std::move(lhs), parse_impl());
    }
    return lhs;
  }

  Formula parse_disj() {
    Formula f = parse_conj();
    while (at_keyword("or")) {
      next();
      f = Formula::disj(std::move(f), parse_conj());
    }
    return f;
  }

  Formula parse_conj() {
    Formula f = parse_unary();
    while (at_keyword("and")) {
      next();
      f = Formula::conj(std::move(f), parse_unary());
    }
    return f;
  }

  Formula parse_unary() {
    if (at_keyword("not")) {
      next();
      return Formula::negation(parse_unary());
    }
    return parse_atom();
  }

  Formula parse_atom() {
    if (peek().kind == Token::Kind::kLParen) {
      next();
      Formula f = parse_impl();
      expect(Token::Kind::kRParen, "')'");
      return f;
    }
    const Token& gran = expect(Token::Kind::kIdent, "predicate");
    if (is_keyword(gran.text)) fail("unexpected keyword '" + gran.text + "'", gran.column);
    expect(Token::Kind::kColon, "':' after granularity");
    const Token& name = expect(Token::Kind::kIdent, "predicate name");
    const auto g = parse_granularity(gran.text);
    if (!g) fail("unknown granularity '" + gran.text + "'", gran.column);
    const auto ref = vocab_.resolve(*g, name.text);
    if (!ref) fail("unresolved predicate '" + gran.text + ":" + name.text + "'", gran.column);
    expect(Token::Kind::kLParen, "'('");
    const Token& arg = expect(Token::Kind::kIdent, "variable");
    if (arg.text != bound_) fail("unbound variable '" + arg.text + "'", arg.column);
    expect(Token::Kind::kRParen, "')'");
    return Formula::pred(*ref, name.text, arg.text);
  }

  int line_no_;
  const Vocabulary& vocab_;
  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
  std::string bound_;
};

bool blank(std::string_view line) {
  for (char ch : line) {
    if (ch == '#') return true;
    if (!std::isspace(static_cast<unsigned char>(ch))) return false;
  }
  return true;
}

enum Precedence { kImplPrec = 1, kOrPrec = 2, kAndPrec = 3, kNotPrec = 4, kAtomPrec = 5 };

int precedence(const Formula& f) {
  switch (f.kind()) {
    case Formula::Kind::kImplies: return kImplPrec;
    case Formula::Kind::kOr: return kOrPrec;
    case Formula::Kind::kAnd: return kAndPrec;
    case Formula::Kind::kNot: return kNotPrec;
    default: return kAtomPrec;
  }
}

void print_expr(std::ostream& os, const Formula& f, int min_prec) {
  const bool parens = precedence(f) < min_prec;
  if (parens) os << '(';
  switch (f.kind()) {
    case Formula::Kind::kPred:
      os << granularity_name(f.ref().granularity) << ':' << f.name() << '(' << f.var() << ')';
      break;
    case Formula::Kind::kNot:
      os << "not ";
      print_expr(os, f.lhs(), kNotPrec);
      break;
    case Formula::Kind::kAnd:
      print_expr(os, f.lhs(), kAndPrec);
      os << " and ";
      print_expr(os, f.rhs(), kNotPrec);
      break;
    case Formula::Kind::kOr:
      print_expr(os, f.lhs(), kOrPrec);
      os << " or ";
      print_expr(os, f.rhs(), kAndPrec);
      break;
    case Formula::Kind::kImplies:
      print_expr(os, f.lhs(), kOrPrec);
      os << " => ";
      print_expr(os, f.rhs(), kImplPrec);
      break;
    case Formula::Kind::kForAll:
      throw std::invalid_argument("print_rule: nested quantifier");
  }
  if (parens) os << ')';
}

}  // namespace

RuleSet parse_rules(std::string_view text, const Vocabulary& vocab, Provenance provenance) {
  RuleSet out;
  out.provenance = provenance;
  int line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    ++line_no;
    start = end + 1;
    if (blank(line)) continue;
    Formula f = LineParser(line, line_no, vocab).parse_rule();
    for (const auto& r : out.rules)
      if (r.formula == f) throw ParseError("duplicate rule", line_no, 1);
    out.rules.push_back({std::move(f), false});
  }
  return out;
}

std::string print_rule(const Formula& f) {
  if (f.kind() != Formula::Kind::kForAll) throw std::invalid_argument("print_rule: top level must be forall");
  std::ostringstream os;
  os << "forall " << f.var() << " (";
  print_expr(os, f.lhs(), kImplPrec);
  os << ')';
  return os.str();
}

std::string print_rules(const RuleSet& rules) {
  std::string out;
  for (const auto& r : rules.rules) {
    out += print_rule(r.formula);
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

constexpr const char* kVar = "x";

Formula pred_of(const Vocabulary& vocab, LabelRef ref) { return Formula::pred(ref, vocab.slug(ref), kVar); }

RuleSet::Rule composed_rule(const Vocabulary& vocab, LabelRef ant, LabelRef cons) {
  return {Formula::forall(kVar, Formula::implies(pred_of(vocab, ant), pred_of(vocab, cons))), false};
}

RuleSet::Rule exclusive_rule(const Vocabulary& vocab, Granularity g, Index label) {
  const Index n = vocab.cardinality(g);
  const LabelRef self{g, label};
  std::optional<Formula> body;
  for (Index i = 0; i < n; ++i) {
    if (i == label) continue;
    Formula lit = Formula::negation(pred_of(vocab, {g, i}));
    body = body ? Formula::conj(std::move(*body), std::move(lit)) : std::move(lit);
  }
  if (!body) {
    // Empty conjunction is true; "a => a" keeps the rule classically trivial.
    return {Formula::forall(kVar, Formula::implies(pred_of(vocab, self), pred_of(vocab, self))), true};
  }
  return {Formula::forall(kVar, Formula::implies(pred_of(vocab, self), std::move(*body))), false};
}

}  // namespace

RuleSet gen_ecl_rules(const LabelSpace& ls, CompositionScope scope) {
  if (ls.verbs.empty() || ls.objects.empty() || ls.compositions.empty())
    throw LabelSpaceError("cannot generate rules for an empty label space");
  const Vocabulary vocab(ls);
  RuleSet out;
  out.provenance = Provenance::kEcl;
  for (Index c = 0; c < ls.num_compositions(); ++c) {
    if (scope == CompositionScope::kSeenOnly && !ls.is_seen(c)) continue;
    const Composition& comp = ls.compositions[static_cast<std::size_t>(c)];
    out.rules.push_back(composed_rule(vocab, {Granularity::kComposition, c}, {Granularity::kVerb, comp.verb}));
    out.rules.push_back(composed_rule(vocab, {Granularity::kComposition, c}, {Granularity::kObject, comp.object}));
  }
  for (Index v = 0; v < ls.num_verbs(); ++v) out.rules.push_back(exclusive_rule(vocab, Granularity::kVerb, v));
  for (Index o = 0; o < ls.num_objects(); ++o) out.rules.push_back(exclusive_rule(vocab, Granularity::kObject, o));
  return out;
}

RuleSet gen_hpl_rules(const LabelSpace& ls, const Hierarchy& h) {
  if (const auto errors = validate_hierarchy(ls, h); !errors.empty())
    throw HierarchyError("invalid hierarchy: " + errors.front());
  const Vocabulary vocab(ls, &h);
  RuleSet out;
  out.provenance = Provenance::kHpl;
  for (Index v = 0; v < ls.num_verbs(); ++v)
    out.rules.push_back(composed_rule(vocab, {Granularity::kVerb, v},
                                      {Granularity::kCoarseVerb, h.verb_parent[static_cast<std::size_t>(v)]}));
  for (Index o = 0; o < ls.num_objects(); ++o)
    out.rules.push_back(composed_rule(vocab, {Granularity::kObject, o},
                                      {Granularity::kCoarseObject, h.object_parent[static_cast<std::size_t>(o)]}));
  for (Index c = 0; c < h.num_coarse_verbs(); ++c)
    out.rules.push_back(exclusive_rule(vocab, Granularity::kCoarseVerb, c));
  for (Index c = 0; c < h.num_coarse_objects(); ++c)
    out.rules.push_back(exclusive_rule(vocab, Granularity::kCoarseObject, c));
  return out;
}

std::optional<RuleShape> classify_rule(const Formula& f) {
  if (f.kind() != Formula::Kind::kForAll) return std::nullopt;
  const Formula& body = f.lhs();
  if (body.kind() != Formula::Kind::kImplies || body.lhs().kind() != Formula::Kind::kPred) return std::nullopt;
  RuleShape shape;
  shape.antecedent = body.lhs().ref();
  const Formula& cons = body.rhs();
  if (cons.kind() == Formula::Kind::kPred) {
    shape.kind = RuleShape::Kind::kComposed;
    shape.consequents.push_back(cons.ref());
    return shape;
  }
  // Left-nested chain of negated predicates.
  shape.kind = RuleShape::Kind::kExclusive;
  std::vector<LabelRef> rev;
  const Formula* cur = &cons;
  while (cur->kind() == Formula::Kind::kAnd) {
    const Formula& lit = cur->rhs();
    if (lit.kind() != Formula::Kind::kNot || lit.lhs().kind() != Formula::Kind::kPred) return std::nullopt;
    rev.push_back(lit.lhs().ref());
    cur = &cur->lhs();
  }
  if (cur->kind() != Formula::Kind::kNot || cur->lhs().kind() != Formula::Kind::kPred) return std::nullopt;
  rev.push_back(cur->lhs().ref());
  shape.consequents.assign(rev.rbegin(), rev.rend());
  return shape;
}

}  // namespace logiccar
