#include <gtest/gtest.h>

#include <random>
#include <set>

#include "oracles.h"
#include "qcfg/errors.h"
#include "qcfg/output_cfg.h"

namespace qcfg {
namespace {

// Sentential forms are vectors of ints: >= 0 terminal token, < 0 category
// -(c + 1).
using Form = std::vector<int>;

// Every form reachable from `start` with at most max_len symbols. The
// grammars used here have no empty productions, so forms never shrink.
std::set<Form> Reachable(const OutputCfg& cfg, int start, size_t max_len) {
  std::set<Form> seen{{-(start + 1)}};
  std::vector<Form> todo{{-(start + 1)}};
  while (!todo.empty()) {
    Form f = todo.back();
    todo.pop_back();
    for (size_t i = 0; i < f.size(); ++i) {
      if (f[i] >= 0) continue;
      int cat = -f[i] - 1;
      for (const auto& p : cfg.productions()) {
        if (p.lhs != cat) continue;
        Form g(f.begin(), f.begin() + static_cast<long>(i));
        for (const auto& item : p.rhs) g.push_back(item.terminal ? item.token : -(item.category + 1));
        g.insert(g.end(), f.begin() + static_cast<long>(i) + 1, f.end());
        if (g.size() <= max_len && seen.insert(g).second) todo.push_back(g);
      }
    }
  }
  return seen;
}

std::string RandomCfg(std::mt19937_64& rng) {
  const char* cats[] = {"S", "X", "Y"};
  const char* terms[] = {"'p'", "'q'", "'r'"};
  std::string text;
  for (const char* lhs : cats) {
    text += std::string(lhs) + " ->";
    int alts = 1 + static_cast<int>(rng() % 3);
    for (int a = 0; a < alts; ++a) {
      if (a) text += " |";
      int len = 1 + static_cast<int>(rng() % 3);
      for (int k = 0; k < len; ++k)
        text += std::string(" ") + (rng() % 2 ? terms[rng() % 3] : cats[rng() % 3]);
    }
    text += "\n";
    text += std::string(lhs) + " -> " + terms[rng() % 3] + "\n";
  }
  return text;
}

TEST(OutputCfg, ParseAndAccept) {
  OutputCfg cfg = OutputCfg::Parse(
      "# actions\nS -> A | A S\nA -> 'WALK' | 'JUMP' | T 'WALK'\nT -> 'LTURN'\n", "<test>");
  EXPECT_EQ(cfg.num_categories(), 3);
  EXPECT_EQ(cfg.category_name(cfg.start()), "S");
  EXPECT_TRUE(CfgAccepts(cfg, Tokens("WALK JUMP LTURN WALK")));
  EXPECT_FALSE(CfgAccepts(cfg, Tokens("WALK LTURN")));
  EXPECT_FALSE(CfgAccepts(cfg, Sequence{Symbol::Nonterminal(1)}));
  EXPECT_TRUE(RuleOutputValid(cfg, Rule::Parse("NT_1 twice ### NT_1 NT_1").output));
  EXPECT_TRUE(RuleOutputValid(cfg, Rule::Parse("NT_1 x ### NT_1 WALK").output));
  EXPECT_FALSE(RuleOutputValid(cfg, Tokens("WALK LTURN")));
}

TEST(OutputCfg, StartDirectiveAndNullable) {
  OutputCfg cfg = OutputCfg::Parse("A -> 'a' B\nB -> 'b' |\n@start B\n", "<test>");
  EXPECT_EQ(cfg.category_name(cfg.start()), "B");
  EXPECT_TRUE(CfgAccepts(cfg, Tokens("b")));
  EXPECT_FALSE(CfgAccepts(cfg, Tokens("a")));
  OutputCfg a = OutputCfg::Parse("A -> 'a' B\nB -> 'b' |\n", "<test>");
  EXPECT_TRUE(CfgAccepts(a, Tokens("a")));
  EXPECT_TRUE(CfgAccepts(a, Tokens("a b")));
}

TEST(OutputCfg, ErrorsNameSourceAndLine) {
  try {
    OutputCfg::Parse("S -> 'a'\nS => 'b'\n", "g.cfg");
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("g.cfg:2"), std::string::npos) << e.what();
  }
  EXPECT_THROW(OutputCfg::Parse("S -> Missing\n", "g.cfg"), DataError);
  EXPECT_THROW(OutputCfg::Parse("", "g.cfg"), DataError);
  EXPECT_THROW(OutputCfg::Parse("S -> 'a'\n@start Nope\n", "g.cfg"), DataError);
  EXPECT_THROW(OutputCfg::Load("/nonexistent/file.cfg"), DataError);
}

TEST(OutputCfg, CompatibleCategories) {
  OutputCfg cfg = OutputCfg::Parse("S -> N 'V' N\nN -> 'n' | 'the' N\n", "<test>");
  int s = *cfg.FindCategory("S");
  int n = *cfg.FindCategory("N");
  auto cats = CompatibleCategories(cfg, Rule::Parse("x NT_1 ### NT_1 V n").output,
                                   CategorySet::Single(cfg.num_categories(), s));
  ASSERT_TRUE(cats.has_value());
  EXPECT_EQ((*cats)[1].Members(), std::vector<int>{n});
  EXPECT_FALSE(CompatibleCategories(cfg, Tokens("V V"), CategorySet::All(cfg.num_categories())));
}

// Recognition against brute-force enumeration of sentential forms.
TEST(OutputCfgProperty, AcceptsMatchesEnumeration) {
  std::mt19937_64 rng(17);
  const char* tokens[] = {"p", "q", "r"};
  for (int trial = 0; trial < 40; ++trial) {
    OutputCfg cfg = OutputCfg::Parse(RandomCfg(rng), "<random>");
    auto forms = Reachable(cfg, cfg.start(), 5);
    for (int len = 1; len <= 4; ++len) {
      int total = 1;
      for (int i = 0; i < len; ++i) total *= 3;
      for (int code = 0; code < total; ++code) {
        Sequence y;
        Form f;
        for (int i = 0, c = code; i < len; ++i, c /= 3) {
          y.push_back(Symbol::Terminal(tokens[c % 3]));
          f.push_back(y.back().token());
        }
        EXPECT_EQ(CfgAccepts(cfg, y), forms.count(f) > 0) << ToString(y);
      }
    }
  }
}

// Rule output validity: some assignment of categories to the nonterminal
// occurrences gives a form derivable from some category.
TEST(OutputCfgProperty, RuleOutputValidMatchesEnumeration) {
  std::mt19937_64 rng(23);
  const std::vector<std::string> vocab{"p", "q", "r"};
  int valid = 0;
  for (int trial = 0; trial < 40; ++trial) {
    OutputCfg cfg = OutputCfg::Parse(RandomCfg(rng), "<random>");
    std::vector<std::set<Form>> reach;
    for (int c = 0; c < cfg.num_categories(); ++c) reach.push_back(Reachable(cfg, c, 4));
    for (int k = 0; k < 30; ++k) {
      Rule r = oracle::RandomRule(rng, vocab, vocab, 4, 2, true);
      std::vector<size_t> occ;
      for (size_t i = 0; i < r.output.size(); ++i)
        if (r.output[i].is_nonterminal()) occ.push_back(i);
      const int C = cfg.num_categories();
      bool any = false, any_consistent = false;
      int combos = 1;
      for (size_t i = 0; i < occ.size(); ++i) combos *= C;
      for (int code = 0; code < combos; ++code) {
        Form f;
        std::vector<int> assign(occ.size());
        for (size_t i = 0, c = static_cast<size_t>(code); i < occ.size(); ++i, c /= static_cast<size_t>(C))
          assign[i] = static_cast<int>(c % static_cast<size_t>(C));
        bool consistent = true;
        for (size_t i = 0; i < occ.size(); ++i)
          for (size_t j = 0; j < i; ++j)
            if (r.output[occ[i]] == r.output[occ[j]] && assign[i] != assign[j]) consistent = false;
        size_t o = 0;
        for (Symbol s : r.output) f.push_back(s.is_terminal() ? s.token() : -(assign[o++] + 1));
        bool derivable = false;
        for (int c = 0; c < C; ++c) derivable |= reach[static_cast<size_t>(c)].count(f) > 0;
        any |= derivable;
        any_consistent |= derivable && consistent;
      }
      valid += any;
      EXPECT_EQ(RuleOutputValid(cfg, r.output, false), any) << r.ToString();
      EXPECT_EQ(RuleOutputValid(cfg, r.output, true), any_consistent) << r.ToString();
    }
  }
  EXPECT_GT(valid, 100);
}

}  // namespace
}  // namespace qcfg
