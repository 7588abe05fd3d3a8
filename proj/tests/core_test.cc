#include <gtest/gtest.h>

#include <random>

#include "oracles.h"
#include "qcfg/derivation.h"
#include "qcfg/errors.h"
#include "qcfg/grammar.h"
#include "qcfg/rule.h"
#include "qcfg/symbol.h"

namespace qcfg {
namespace {

using oracle::N;
using oracle::T;

TEST(Symbol, TerminalAndNonterminalEncoding) {
  Symbol a = Symbol::Terminal("walk");
  Symbol n = Symbol::Nonterminal(3);
  EXPECT_TRUE(a.is_terminal());
  EXPECT_TRUE(n.is_nonterminal());
  EXPECT_EQ(n.index(), 3);
  EXPECT_EQ(TokenText(a.token()), "walk");
  EXPECT_EQ(Symbol::Terminal("walk"), a);
  EXPECT_EQ(SymbolText(n), "NT_3");
}

TEST(Symbol, ParseSequenceHonoursNonterminalFlag) {
  Sequence with = ParseSequence("jump NT_2  twice", true);
  ASSERT_EQ(with.size(), 3u);
  EXPECT_EQ(with[1], Symbol::Nonterminal(2));
  Sequence without = ParseSequence("jump NT_2", false);
  EXPECT_TRUE(without[1].is_terminal());
  EXPECT_EQ(ToString(with), "jump NT_2 twice");
  EXPECT_EQ(ParseNonterminalName("NT_12"), 12);
  EXPECT_EQ(ParseNonterminalName("NT_x"), 0);
  EXPECT_EQ(ParseNonterminalName("walk"), 0);
}

TEST(Rule, ParseAndPrintRoundTrip) {
  Rule r = Rule::Parse("NT_1 twice ### NT_1 NT_1");
  EXPECT_EQ(r.Arity(), 1);
  EXPECT_EQ(r.ToString(), "NT_1 twice ### NT_1 NT_1");
  EXPECT_THROW(Rule::Parse("a b"), DataError);
  EXPECT_THROW(Rule::Parse("a ### b ### c"), DataError);
}

TEST(Rule, Validation) {
  EXPECT_FALSE(ValidateRule(Rule::Parse("NT_1 and NT_2 ### NT_1 NT_2"), 4, true));
  EXPECT_TRUE(ValidateRule(Rule::Parse("NT_1 and NT_1 ### NT_1"), 4, true));
  EXPECT_TRUE(ValidateRule(Rule::Parse("NT_1 and NT_2 ### NT_1"), 4, true));
  EXPECT_TRUE(ValidateRule(Rule::Parse("NT_1 ### NT_2"), 4, true));
  EXPECT_TRUE(ValidateRule(Rule::Parse("NT_1 twice ### NT_1 NT_1"), 4, false));
  EXPECT_FALSE(ValidateRule(Rule::Parse("NT_1 twice ### NT_1 NT_1"), 4, true));
  EXPECT_TRUE(ValidateRule(Rule::Parse("NT_1 NT_2 NT_3 ### NT_3 NT_2 NT_1"), 2, true));
  EXPECT_TRUE(ValidateRule(Rule(Sequence{}, Sequence{T("a")}), 4, true));
}

TEST(Rule, CanonicalizeRenumbersByInputOrder) {
  Rule r = Rule::Parse("NT_2 after NT_1 ### NT_1 NT_2");
  EXPECT_FALSE(IsCanonical(r));
  Rule c = Canonicalize(r);
  EXPECT_TRUE(IsCanonical(c));
  EXPECT_EQ(c.ToString(), "NT_1 after NT_2 ### NT_2 NT_1");
}

TEST(Rule, ComposeExamples) {
  Rule outer = Rule::Parse("NT_1 and NT_2 ### NT_1 NT_2");
  Rule inner = Rule::Parse("NT_1 twice ### NT_1 NT_1");
  EXPECT_EQ(Compose(outer, inner, 2).ToString(), "NT_1 and NT_2 twice ### NT_1 NT_2 NT_2");
  EXPECT_EQ(Compose(outer, inner, 1).ToString(), "NT_1 twice and NT_2 ### NT_1 NT_1 NT_2");
  Rule dup = Rule::Parse("NT_1 twice ### NT_1 NT_1");
  Rule leaf = Rule::Parse("jump ### JUMP");
  EXPECT_EQ(Compose(dup, leaf, 1).ToString(), "jump twice ### JUMP JUMP");
  EXPECT_THROW(Compose(outer, inner, 3), std::invalid_argument);
  Rule wide = Rule::Parse("NT_1 NT_2 ### NT_1 NT_2");
  EXPECT_THROW(Compose(wide, Rule::Parse("NT_1 x NT_2 ### NT_2 NT_1"), 1, 2), CompositionOverflow);
}

// Composing a child into its parent must not change the derived pair.
TEST(RuleProperty, ComposePreservesYield) {
  std::mt19937_64 rng(7);
  std::vector<std::string> in_vocab{"a", "b", "c"}, out_vocab{"A", "B", "C"};
  int checked = 0;
  while (checked < 300) {
    std::vector<Rule> rules;
    for (int i = 0; i < 5; ++i) rules.push_back(Canonicalize(oracle::RandomRule(rng, in_vocab, out_vocab, 3, 2, true)));
    rules.push_back(Rule::Parse("a ### A"));
    auto z = oracle::RandomDerivation(rng, rules, 3);
    if (!z || z->children.empty()) continue;
    int i = std::uniform_int_distribution<int>(1, static_cast<int>(z->children.size()))(rng);
    const Derivation& child = z->children[static_cast<size_t>(i - 1)];
    Rule composed = Compose(z->rule, child.rule, i, 8);
    // Children of the composed rule in input order: the parent's children
    // with child i replaced by its own children.
    std::vector<std::pair<Symbol, const Derivation*>> slots;
    for (Symbol s : z->rule.input) {
      if (!s.is_nonterminal()) continue;
      if (s.index() == i) {
        for (Symbol t : child.rule.input)
          if (t.is_nonterminal()) slots.emplace_back(t, &child.children[static_cast<size_t>(t.index() - 1)]);
      } else {
        slots.emplace_back(s, &z->children[static_cast<size_t>(s.index() - 1)]);
      }
    }
    std::vector<Derivation> kids;
    for (const auto& s : slots) kids.push_back(*s.second);
    Derivation flat(composed, kids);
    EXPECT_EQ(oracle::Yield(flat), oracle::Yield(*z)) << composed.ToString();
    EXPECT_TRUE(IsCanonical(composed));
    ++checked;
  }
}

TEST(Grammar, AddDeduplicatesAndCanonicalizes) {
  Grammar g;
  EXPECT_TRUE(g.Add(Rule::Parse("NT_2 after NT_1 ### NT_1 NT_2")));
  EXPECT_FALSE(g.Add(Rule::Parse("NT_1 after NT_2 ### NT_2 NT_1")));
  EXPECT_EQ(g.size(), 1u);
  EXPECT_TRUE(g.Contains(Rule::Parse("NT_1 after NT_2 ### NT_2 NT_1")));
  EXPECT_TRUE(g.Remove(Rule::Parse("NT_1 after NT_2 ### NT_2 NT_1")));
  EXPECT_TRUE(g.empty());
}

TEST(Grammar, RejectsIdentityAndInvalidRules) {
  Grammar g;
  EXPECT_THROW(g.Add(Rule::Parse("NT_1 ### NT_1")), DataError);
  EXPECT_THROW(g.Add(Rule::Parse("NT_1 ### A")), DataError);
  Grammar strict(GrammarConfig{.max_nonterminals = 1, .allow_repeated_indices = false});
  EXPECT_THROW(strict.Add(Rule::Parse("NT_1 and NT_2 ### NT_1 NT_2")), DataError);
  EXPECT_THROW(strict.Add(Rule::Parse("NT_1 twice ### NT_1 NT_1")), DataError);
}

TEST(Grammar, FingerprintDependsOnContentAndOrder) {
  Grammar a, b, c;
  a.Add(Rule::Parse("x ### X"));
  a.Add(Rule::Parse("y ### Y"));
  b.Add(Rule::Parse("x ### X"));
  b.Add(Rule::Parse("y ### Y"));
  c.Add(Rule::Parse("y ### Y"));
  c.Add(Rule::Parse("x ### X"));
  EXPECT_EQ(a.Fingerprint(), b.Fingerprint());
  EXPECT_NE(a.Fingerprint(), c.Fingerprint());
  EXPECT_EQ(FingerprintHex(0x1f).size(), 16u);
}

TEST(Derivation, YieldHeightSize) {
  Derivation leaf(Rule::Parse("jump ### JUMP"));
  Derivation twice(Rule::Parse("NT_1 twice ### NT_1 NT_1"), {leaf});
  Derivation conj(Rule::Parse("NT_1 and NT_2 ### NT_1 NT_2"), {twice, leaf});
  ExamplePair p = DerivationYield(conj);
  EXPECT_EQ(ToString(p.input), "jump twice and jump");
  EXPECT_EQ(ToString(p.output), "JUMP JUMP JUMP");
  EXPECT_EQ(conj.Height(), 3);
  EXPECT_EQ(conj.Size(), 4u);
  EXPECT_TRUE(conj.WellFormed());
  EXPECT_FALSE(Derivation(Rule::Parse("NT_1 twice ### NT_1 NT_1")).WellFormed());
}

TEST(DerivationProperty, YieldMatchesHandSubstitution) {
  std::mt19937_64 rng(11);
  std::vector<std::string> in_vocab{"p", "q"}, out_vocab{"P", "Q", "R"};
  int checked = 0;
  while (checked < 200) {
    std::vector<Rule> rules;
    for (int i = 0; i < 4; ++i) rules.push_back(Canonicalize(oracle::RandomRule(rng, in_vocab, out_vocab, 4, 3, true)));
    rules.push_back(Rule::Parse("p ### P"));
    auto z = oracle::RandomDerivation(rng, rules, 4);
    if (!z) continue;
    EXPECT_EQ(DerivationYield(*z), oracle::Yield(*z));
    ++checked;
  }
}

}  // namespace
}  // namespace qcfg
