#include "logiccar/logic_ast.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <random>

namespace logiccar {
namespace {

using testing::small_hierarchy;
using testing::small_label_space;

LabelSpace abc_label_space() {
  LabelSpace ls;
  ls.verbs = {"a", "b", "c"};
  ls.objects = {"p", "q"};
  ls.compositions = {{0, 0, CompositionSplit::kSeen}, {1, 1, CompositionSplit::kSeen},
                     {2, 0, CompositionSplit::kSeen}, {0, 1, CompositionSplit::kUnseenTest}};
  return ls;
}

Formula verb(const char* name, Index i) { return Formula::pred({Granularity::kVerb, i}, name, "x"); }

TEST(ParseRules, CompositionImpliesVerb) {
  const LabelSpace ls = small_label_space();
  const Vocabulary vocab(ls);
  const RuleSet rs =
      parse_rules("forall x (composition:napkin_fall_like_a_feather(x) => verb:fall_like_a_feather(x))", vocab);
  ASSERT_EQ(rs.size(), 1u);
  const Formula expected = Formula::forall(
      "x", Formula::implies(Formula::pred({Granularity::kComposition, 0}, "napkin_fall_like_a_feather", "x"),
                            verb("fall_like_a_feather", 0)));
  EXPECT_EQ(rs.rules[0].formula, expected);
}

TEST(ParseRules, MinimalRule) {
  const LabelSpace ls = abc_label_space();
  const RuleSet rs = parse_rules("forall x (verb:a(x))", Vocabulary(ls));
  ASSERT_EQ(rs.size(), 1u);
  EXPECT_EQ(rs.rules[0].formula, Formula::forall("x", verb("a", 0)));
}

TEST(ParseRules, Precedence) {
  const LabelSpace ls = abc_label_space();
  const RuleSet rs = parse_rules("forall x (not verb:a(x) and verb:b(x) => verb:c(x))", Vocabulary(ls));
  const Formula expected = Formula::forall(
      "x", Formula::implies(Formula::conj(Formula::negation(verb("a", 0)), verb("b", 1)), verb("c", 2)));
  EXPECT_EQ(rs.rules[0].formula, expected);
}

TEST(ParseRules, ImplicationIsRightAssociative) {
  const LabelSpace ls = abc_label_space();
  const RuleSet rs = parse_rules("forall x (verb:a(x) => verb:b(x) => verb:c(x))", Vocabulary(ls));
  const Formula expected =
      Formula::forall("x", Formula::implies(verb("a", 0), Formula::implies(verb("b", 1), verb("c", 2))));
  EXPECT_EQ(rs.rules[0].formula, expected);
}

TEST(ParseRules, CommentsAndBlankLines) {
  const LabelSpace ls = abc_label_space();
  const RuleSet rs = parse_rules("# header\n\nforall x (verb:a(x))   # trailing\n  \nforall y (verb:b(y))\n",
                                 Vocabulary(ls));
  EXPECT_EQ(rs.size(), 2u);
}

void expect_parse_error(std::string_view text, int line, int column) {
  const LabelSpace ls = abc_label_space();
  try {
    parse_rules(text, Vocabulary(ls));
    ADD_FAILURE() << "no error for: " << text;
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), line) << e.what();
    EXPECT_EQ(e.column(), column) << e.what();
  }
}

TEST(ParseRules, ErrorsCarryPositions) {
  expect_parse_error("forall x (verb:a(x)", 1, 20);
  expect_parse_error("\nforall x (verb:zz(x))", 2, 11);
  expect_parse_error("forall x (verb:a(y))", 1, 18);
  expect_parse_error("forall x (noun:a(x))", 1, 11);
  expect_parse_error("forall x (verb:a(x) & verb:b(x))", 1, 21);
  expect_parse_error("exists x (verb:a(x))", 1, 1);
}

TEST(ParseRules, UnresolvedCoarseWithoutHierarchy) {
  const LabelSpace ls = small_label_space();
  EXPECT_THROW(parse_rules("forall x (coarse_verb:fall(x))", Vocabulary(ls)), ParseError);
  const Hierarchy h = small_hierarchy();
  EXPECT_NO_THROW(parse_rules("forall x (coarse_verb:fall(x))", Vocabulary(ls, &h)));
}

TEST(PrintRule, Canonical) {
  EXPECT_EQ(print_rule(Formula::forall("x", verb("a", 0))), "forall x (verb:a(x))");
  const Formula nested = Formula::forall(
      "x", Formula::conj(Formula::implies(verb("a", 0), verb("b", 1)), Formula::negation(verb("c", 2))));
  EXPECT_EQ(print_rule(nested), "forall x ((verb:a(x) => verb:b(x)) and not verb:c(x))");
  const Formula left_impl =
      Formula::forall("x", Formula::implies(Formula::implies(verb("a", 0), verb("b", 1)), verb("c", 2)));
  EXPECT_EQ(print_rule(left_impl), "forall x ((verb:a(x) => verb:b(x)) => verb:c(x))");
}

Formula random_formula(Rng& rng, const Vocabulary& vocab, int depth) {
  std::uniform_int_distribution<int> pick(0, depth > 0 ? 4 : 0);
  switch (pick(rng)) {
    case 1: return Formula::negation(random_formula(rng, vocab, depth - 1));
    case 2: return Formula::conj(random_formula(rng, vocab, depth - 1), random_formula(rng, vocab, depth - 1));
    case 3: return Formula::disj(random_formula(rng, vocab, depth - 1), random_formula(rng, vocab, depth - 1));
    case 4: return Formula::implies(random_formula(rng, vocab, depth - 1), random_formula(rng, vocab, depth - 1));
    default: {
      const Granularity g = kAllGranularities[std::uniform_int_distribution<std::size_t>(0, 4)(rng)];
      const LabelRef ref{g, std::uniform_int_distribution<Index>(0, vocab.cardinality(g) - 1)(rng)};
      return Formula::pred(ref, vocab.slug(ref), "x");
    }
  }
}

TEST(PrintRule, RandomRoundTrip) {
  const LabelSpace ls = small_label_space();
  const Hierarchy h = small_hierarchy();
  const Vocabulary vocab(ls, &h);
  Rng rng(2024);
  for (int i = 0; i < 500; ++i) {
    const Formula f = Formula::forall("x", random_formula(rng, vocab, 1 + i % 5));
    const std::string text = print_rule(f);
    const RuleSet back = parse_rules(text, vocab);
    ASSERT_EQ(back.size(), 1u);
    EXPECT_EQ(back.rules[0].formula, f) << text;
    EXPECT_EQ(print_rule(back.rules[0].formula), text);
  }
}

TEST(GenEclRules, Counts) {
  const LabelSpace ls = small_label_space();
  EXPECT_EQ(gen_ecl_rules(ls, CompositionScope::kSeenOnly).size(), 17u);
  EXPECT_EQ(gen_ecl_rules(ls, CompositionScope::kAll).size(), 2u * 7 + 3 + 4);
}

TEST(GenEclRules, NapkinFallLikeAFeather) {
  const LabelSpace ls = small_label_space();
  const RuleSet rs = gen_ecl_rules(ls, CompositionScope::kSeenOnly);
  EXPECT_EQ(print_rule(rs.rules[0].formula),
            "forall x (composition:napkin_fall_like_a_feather(x) => verb:fall_like_a_feather(x))");
  EXPECT_EQ(print_rule(rs.rules[1].formula),
            "forall x (composition:napkin_fall_like_a_feather(x) => object:napkin(x))");
  EXPECT_EQ(print_rule(rs.rules[10].formula),
            "forall x (verb:fall_like_a_feather(x) => not verb:fall_like_a_rock(x) and not verb:wear(x))");
}

TEST(GenEclRules, PrintedRulesReparse) {
  const LabelSpace ls = small_label_space();
  const RuleSet rs = gen_ecl_rules(ls, CompositionScope::kAll);
  const RuleSet back = parse_rules(print_rules(rs), Vocabulary(ls), Provenance::kEcl);
  ASSERT_EQ(back.size(), rs.size());
  for (std::size_t i = 0; i < rs.size(); ++i) EXPECT_EQ(back.rules[i].formula, rs.rules[i].formula);
}

TEST(GenEclRules, SingleVerbIsTrivial) {
  LabelSpace ls;
  ls.verbs = {"wear"};
  ls.objects = {"coat", "hat"};
  ls.compositions = {{0, 0, CompositionSplit::kSeen}};
  // {(0,1)} missing keeps C a strict subset of V x O
  const RuleSet rs = gen_ecl_rules(ls, CompositionScope::kSeenOnly);
  ASSERT_EQ(rs.size(), 2u + 1 + 2);
  EXPECT_TRUE(rs.rules[2].trivial);
  EXPECT_FALSE(rs.rules[3].trivial);
  EXPECT_FALSE(rs.rules[0].trivial);
}

TEST(GenEclRules, EmptyLabelSpaceThrows) {
  EXPECT_THROW(gen_ecl_rules(LabelSpace{}, CompositionScope::kSeenOnly), LabelSpaceError);
}

TEST(GenHplRules, FallLikeAFeather) {
  const LabelSpace ls = small_label_space();
  const Hierarchy h = small_hierarchy();
  const RuleSet rs = gen_hpl_rules(ls, h);
  EXPECT_EQ(rs.size(), 3u + 4 + 2 + 2);
  EXPECT_EQ(print_rule(rs.rules[0].formula), "forall x (verb:fall_like_a_feather(x) => coarse_verb:fall(x))");
  EXPECT_EQ(print_rule(rs.rules[3].formula), "forall x (object:napkin(x) => coarse_object:tableware(x))");
}

TEST(GenHplRules, FifteenRules) {
  LabelSpace ls;
  ls.verbs = {"v0", "v1", "v2", "v3"};
  ls.objects = {"o0", "o1", "o2", "o3", "o4", "o5"};
  for (Index v = 0; v < 4; ++v)
    for (Index o = 0; o < 6; ++o)
      if ((v + o) % 2 == 0) ls.compositions.push_back({v, o, CompositionSplit::kSeen});
  Hierarchy h;
  h.verb_parent = {0, 0, 1, 1};
  h.object_parent = {0, 1, 2, 0, 1, 2};
  h.coarse_verb_names = {"x", "y"};
  h.coarse_object_names = {"p", "q", "r"};
  EXPECT_EQ(gen_hpl_rules(ls, h).size(), 15u);
}

TEST(GenHplRules, InvalidHierarchyThrows) {
  const LabelSpace ls = small_label_space();
  Hierarchy h = small_hierarchy();
  h.verb_parent.pop_back();
  EXPECT_THROW(gen_hpl_rules(ls, h), HierarchyError);
}

TEST(ClassifyRule, Shapes) {
  const LabelSpace ls = small_label_space();
  const RuleSet rs = gen_ecl_rules(ls, CompositionScope::kSeenOnly);
  const auto composed = classify_rule(rs.rules[0].formula);
  ASSERT_TRUE(composed);
  EXPECT_EQ(composed->kind, RuleShape::Kind::kComposed);
  EXPECT_EQ(composed->consequents.size(), 1u);
  const auto exclusive = classify_rule(rs.rules[10].formula);
  ASSERT_TRUE(exclusive);
  EXPECT_EQ(exclusive->kind, RuleShape::Kind::kExclusive);
  EXPECT_EQ(exclusive->consequents.size(), 2u);
  EXPECT_FALSE(classify_rule(Formula::forall("x", verb("a", 0))));
}

}  // namespace
}  // namespace logiccar
