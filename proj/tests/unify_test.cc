#include <gtest/gtest.h>

#include <random>
#include <set>

#include "oracles.h"
#include "qcfg/errors.h"
#include "qcfg/unify.h"

namespace qcfg {
namespace {

constexpr int kLimit = 64;

bool ComposesTo(const Rule& outer, const Rule& inner, const Rule& r1) {
  for (Symbol s : outer.input) {
    if (!s.is_nonterminal()) continue;
    try {
      if (Compose(outer, inner, s.index(), kLimit) == r1) return true;
    } catch (const CompositionOverflow&) {
    }
  }
  return false;
}

void Consider(Rule candidate, const Rule& r1, const Rule& r2, int max_nts, std::set<std::string>* out) {
  std::set<int> in_nts;
  for (Symbol s : candidate.input)
    if (s.is_nonterminal() && !in_nts.insert(s.index()).second) return;
  for (Symbol s : candidate.output)
    if (s.is_nonterminal() && !in_nts.count(s.index())) return;
  Rule r3 = Canonicalize(candidate);
  if (ValidateRule(r3, kLimit, true)) return;
  if (r3.Arity() > max_nts) return;
  if (ComposesTo(r2, r3, r1) || ComposesTo(r3, r2, r1)) out->insert(r3.ToString());
}

// Exhaustive search. An inner rule's sides are contiguous pieces of r1's
// sides; an outer rule is r1 with one input span and any set of disjoint
// output spans replaced by a fresh nonterminal.
std::set<std::string> UnifyOracle(const Rule& r1, const Rule& r2, int max_nts) {
  std::set<std::string> out;
  const Sequence& a = r1.input;
  const Sequence& b = r1.output;
  for (size_t i = 0; i < a.size(); ++i)
    for (size_t j = i + 1; j <= a.size(); ++j)
      for (size_t k = 0; k < b.size(); ++k)
        for (size_t l = k + 1; l <= b.size(); ++l)
          Consider(Rule(oracle::Slice(a, i, j), oracle::Slice(b, k, l)), r1, r2, max_nts, &out);

  const Symbol fresh = Symbol::Nonterminal(50);
  // Every set of disjoint non-empty output intervals, as a list of cuts.
  std::vector<std::vector<std::pair<size_t, size_t>>> interval_sets;
  std::vector<std::pair<size_t, size_t>> cur;
  auto rec = [&](auto&& self, size_t from) -> void {
    for (size_t s = from; s < b.size(); ++s)
      for (size_t e = s + 1; e <= b.size(); ++e) {
        cur.emplace_back(s, e);
        interval_sets.push_back(cur);
        self(self, e);
        cur.pop_back();
      }
  };
  rec(rec, 0);
  for (size_t i = 0; i < a.size(); ++i)
    for (size_t j = i + 1; j <= a.size(); ++j) {
      Sequence alpha = oracle::Slice(a, 0, i);
      alpha.push_back(fresh);
      alpha.insert(alpha.end(), a.begin() + static_cast<long>(j), a.end());
      for (const auto& set : interval_sets) {
        Sequence beta;
        size_t pos = 0;
        for (const auto& [s, e] : set) {
          beta.insert(beta.end(), b.begin() + static_cast<long>(pos), b.begin() + static_cast<long>(s));
          beta.push_back(fresh);
          pos = e;
        }
        beta.insert(beta.end(), b.begin() + static_cast<long>(pos), b.end());
        Consider(Rule(alpha, beta), r1, r2, max_nts, &out);
      }
    }
  return out;
}

std::set<std::string> Texts(const std::vector<Rule>& rules) {
  std::set<std::string> out;
  for (const auto& r : rules) out.insert(r.ToString());
  return out;
}

TEST(Unify, ScanExample) {
  Rule r1 = Rule::Parse("jump twice ### JUMP JUMP");
  Rule r2 = Rule::Parse("jump ### JUMP");
  auto got = Texts(Unify(r1, r2, 4));
  EXPECT_TRUE(got.count("NT_1 twice ### NT_1 NT_1"));
  EXPECT_EQ(got, UnifyOracle(r1, r2, 4));
}

TEST(Unify, OutputIsSortedAndCanonical) {
  auto got = Unify(Rule::Parse("a b a ### A B A"), Rule::Parse("a ### A"), 4);
  ASSERT_FALSE(got.empty());
  for (size_t i = 0; i < got.size(); ++i) {
    EXPECT_TRUE(IsCanonical(got[i]));
    if (i) EXPECT_LT(got[i - 1].ToString(), got[i].ToString());
  }
}

// 500 random pairs with at most 6 symbols per side. Most r1 are built by
// composing r2 with a random rule so that unifiers exist.
TEST(UnifyProperty, MatchesExhaustiveSearch) {
  std::mt19937_64 rng(31337);
  const std::vector<std::string> vocab{"a", "b"};
  int nonempty = 0;
  for (int trial = 0; trial < 500;) {
    Rule r2 = Canonicalize(oracle::RandomRule(rng, vocab, vocab, 3, 2, true));
    Rule r1;
    if (rng() % 5 == 0) {
      r1 = Canonicalize(oracle::RandomRule(rng, vocab, vocab, 6, 3, true));
    } else {
      Rule other = Canonicalize(oracle::RandomRule(rng, vocab, vocab, 3, 2, true));
      bool r2_outer = rng() % 2 == 0;
      const Rule& outer = r2_outer ? r2 : other;
      const Rule& inner = r2_outer ? other : r2;
      if (outer.Arity() == 0) continue;
      int index = 1 + static_cast<int>(rng() % static_cast<unsigned>(outer.Arity()));
      try {
        r1 = Compose(outer, inner, index, 3);
      } catch (const CompositionOverflow&) {
        continue;
      }
    }
    if (r1.input.size() > 6 || r1.output.size() > 6) continue;
    int max_nts = 1 + static_cast<int>(rng() % 4);
    auto want = UnifyOracle(r1, r2, max_nts);
    EXPECT_EQ(Texts(Unify(r1, r2, max_nts)), want) << r1.ToString() << " / " << r2.ToString();
    nonempty += !want.empty();
    ++trial;
  }
  EXPECT_GT(nonempty, 250);
}

}  // namespace
}  // namespace qcfg
