#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

#include "oracles.h"
#include "qcfg/errors.h"
#include "qcfg/induction.h"
#include "qcfg/unify.h"

namespace qcfg {
namespace {

Corpus Make(std::initializer_list<const char*> pairs) {
  Corpus c;
  for (const char* p : pairs) {
    std::string s(p);
    auto k = s.find(" ### ");
    c.examples.push_back(MakePair(s.substr(0, k), s.substr(k + 5)));
  }
  return c;
}

Corpus ThreeExamples() { return Make({"jump ### JUMP", "walk ### WALK", "jump and walk ### JUMP WALK"}); }

InductionConfig Plain() {
  InductionConfig cfg;
  cfg.workers = 1;
  return cfg;
}

// p-hat and rule scores recomputed from brute-force occurrence tests.
double PhatOracle(const Sequence& a, bool a_input, const Sequence& b, bool b_input, const Corpus& c) {
  size_t both = 0, cond = 0;
  for (const auto& e : c.examples) {
    if (!oracle::Occurs(b, b_input ? e.input : e.output)) continue;
    ++cond;
    both += oracle::Occurs(a, a_input ? e.input : e.output);
  }
  return cond ? static_cast<double>(both) / static_cast<double>(cond) : 0.0;
}

double ScoreOracle(const Rule& r, const Corpus& c, const InductionConfig& cfg) {
  auto size = [&](const Sequence& s) {
    double v = 0;
    for (Symbol x : s) v += x.is_terminal() ? cfg.terminal_weight : cfg.nonterminal_weight;
    return v;
  };
  double floor = 1.0 / (2.0 * static_cast<double>(c.size()));
  double c_in = std::log(std::max(PhatOracle(r.input, true, r.output, false, c), floor));
  double c_out = std::log(std::max(PhatOracle(r.output, false, r.input, true, c), floor));
  return size(r.input) + size(r.output) - cfg.k_alpha * c_in - cfg.k_beta * c_out;
}

bool Derivable(const std::vector<Rule>& rules, const ExamplePair& e) {
  return !oracle::PairDerivations(rules, e.input, e.output).empty();
}

std::set<std::string> Texts(const Grammar& g) {
  std::set<std::string> out;
  for (const Rule& r : g.rules()) out.insert(r.ToString());
  return out;
}

TEST(Phat, DirectCounts) {
  Corpus c = Make({"jump ### JUMP", "walk ### WALK"});
  OccurrenceStats stats(c, 0, 0);
  EXPECT_DOUBLE_EQ(Phat(Tokens("jump"), Side::kInput, Tokens("JUMP"), Side::kOutput, stats), 1.0);
  EXPECT_DOUBLE_EQ(Phat(Tokens("jump"), Side::kInput, Tokens("WALK"), Side::kOutput, stats), 0.0);
  EXPECT_DOUBLE_EQ(Phat(Tokens("jump"), Side::kInput, Tokens("RUN"), Side::kOutput, stats), 0.0);
}

// A pattern with two nonterminals needs two non-empty pieces, so it only
// occurs in the two-token output.
TEST(Phat, PatternsWithNonterminals) {
  Corpus c = ThreeExamples();
  OccurrenceStats stats(c, 0, 0);
  Rule r = Rule::Parse("NT_1 and NT_2 ### NT_1 NT_2");
  double want = PhatOracle(r.input, true, r.output, false, c);
  EXPECT_DOUBLE_EQ(want, 1.0);
  EXPECT_DOUBLE_EQ(Phat(r.input, Side::kInput, r.output, Side::kOutput, stats), want);
  Rule single = Rule::Parse("NT_1 ### NT_1 WALK");
  EXPECT_DOUBLE_EQ(Phat(single.input, Side::kInput, single.output, Side::kOutput, stats),
                   PhatOracle(single.input, true, single.output, false, c));
  EXPECT_DOUBLE_EQ(Phat(single.output, Side::kOutput, single.input, Side::kInput, stats),
                   PhatOracle(single.output, false, single.input, true, c));
}

TEST(RuleScore, HandCounts) {
  Corpus c = ThreeExamples();
  OccurrenceStats stats(c, 0, 0);
  EXPECT_DOUBLE_EQ(RuleScore(Rule::Parse("jump ### JUMP"), stats, Plain()), 2.0);
  // "walk" never meets "JUMP": both directions hit the floor 1/(2N).
  Corpus two = Make({"jump ### JUMP", "walk ### WALK"});
  OccurrenceStats two_stats(two, 0, 0);
  EXPECT_NEAR(RuleScore(Rule::Parse("walk ### JUMP"), two_stats, Plain()), 2.0 + 2.0 * std::log(4.0), 1e-12);
  InductionConfig weighted = Plain();
  weighted.terminal_weight = 3;
  weighted.k_alpha = 0.5;
  weighted.k_beta = 2;
  for (const char* r : {"jump ### JUMP", "NT_1 and NT_2 ### NT_1 NT_2", "NT_1 and walk ### NT_1 WALK",
                        "jump ### WALK", "NT_1 ### NT_1 NT_1"}) {
    Rule rule = Rule::Parse(r);
    EXPECT_NEAR(RuleScore(rule, stats, weighted), ScoreOracle(rule, c, weighted), 1e-12) << r;
  }
}

TEST(RuleScore, ScanPreset) {
  InductionConfig scan = ScanInductionConfig();
  EXPECT_EQ(scan.k_alpha, 0.0);
  EXPECT_EQ(scan.k_beta, 100.0);
  EXPECT_EQ(scan.terminal_weight, 4.0);
  EXPECT_EQ(scan.nonterminal_weight, 1.0);
  EXPECT_EQ(scan.partitions, 16);
}

TEST(Objective, SumsRuleScores) {
  Corpus c = ThreeExamples();
  OccurrenceStats stats(c, 0, 0);
  Grammar g;
  EXPECT_EQ(Objective(g, stats, Plain()), 0.0);
  g.Add(Rule::Parse("jump ### JUMP"));
  EXPECT_DOUBLE_EQ(Objective(g, stats, Plain()), RuleScore(g.rule(0), stats, Plain()));
  g.Add(Rule::Parse("NT_1 and walk ### NT_1 WALK"));
  EXPECT_NEAR(Objective(g, stats, Plain()),
              ScoreOracle(g.rule(0), c, Plain()) + ScoreOracle(g.rule(1), c, Plain()), 1e-12);
}

TEST(InitGrammar, WholeExampleRulesAndSeeds) {
  Corpus c = ThreeExamples();
  Grammar g = InitGrammar(c, {}, Plain());
  EXPECT_EQ(g.size(), 3u);
  for (const auto& e : c.examples) EXPECT_TRUE(g.Contains(WholeExampleRule(e)));
  Corpus dup = Make({"jump ### JUMP", "jump ### JUMP"});
  EXPECT_EQ(InitGrammar(dup, {}, Plain()).size(), 1u);
  std::vector<Rule> seeds{Rule::Parse("jump ### JUMP"), Rule::Parse("NT_1 x ### NT_1")};
  EXPECT_EQ(InitGrammar(c, seeds, Plain()).size(), 4u);
  InductionConfig parts = Plain();
  parts.partitions = 3;
  Grammar first = InitGrammar(c, {}, parts);
  EXPECT_EQ(Texts(first), (std::set<std::string>{"jump ### JUMP"}));
}

TEST(SeedRules, SharedTokens) {
  Corpus c = Make({"a b ### b c", "c d ### e", "e ### a"});
  std::set<std::string> got;
  for (const Rule& r : SeedRulesSharedTokens(c)) got.insert(r.ToString());
  EXPECT_EQ(got, (std::set<std::string>{"b ### b"}));
}

TEST(PartitionByLength, SortedContiguousChunks) {
  Corpus c = Make({"a a a ### A", "a ### A A", "a a ### A", "a ### A", "a a a a ### A"});
  auto parts = PartitionByLength(c, 2);
  ASSERT_EQ(parts.size(), 2u);
  EXPECT_EQ(parts[0], (std::vector<size_t>{3, 1}));
  EXPECT_EQ(parts[1], (std::vector<size_t>{2, 0, 4}));
  EXPECT_EQ(PartitionByLength(c, 5).back(), std::vector<size_t>{4});
  EXPECT_THROW(PartitionByLength(c, 0), std::invalid_argument);
}

TEST(Unify, ComposedAndSelfUnifiers) {
  auto got = Unify(Rule::Parse("jump and NT_1 ### JUMP NT_1"), Rule::Parse("NT_1 and NT_2 ### NT_1 NT_2"), 4);
  std::set<std::string> texts;
  for (const Rule& r : got) texts.insert(r.ToString());
  EXPECT_TRUE(texts.count("jump ### JUMP"));
  auto self = Unify(Rule::Parse("jump ### JUMP"), Rule::Parse("jump ### JUMP"), 4);
  ASSERT_EQ(self.size(), 1u);
  EXPECT_TRUE(self[0].IsIdentity());
}

TEST(RemovalCheck, Cases) {
  Corpus c = Make({"jump twice ### JUMP JUMP"});
  Grammar g;
  for (const char* r : {"jump twice ### JUMP JUMP", "jump ### JUMP", "NT_1 twice ### NT_1 NT_1", "walk ### WALK"})
    g.Add(Rule::Parse(r));
  EXPECT_TRUE(RemovalCheck(g, Rule::Parse("jump twice ### JUMP JUMP"), c));
  EXPECT_TRUE(RemovalCheck(g, Rule::Parse("walk ### WALK"), c));
  Grammar sole;
  sole.Add(Rule::Parse("jump twice ### JUMP JUMP"));
  sole.Add(Rule::Parse("walk ### WALK"));
  EXPECT_FALSE(RemovalCheck(sole, Rule::Parse("jump twice ### JUMP JUMP"), c));
  EXPECT_THROW(RemovalCheck(sole, Rule::Parse("jump ### JUMP"), c), std::invalid_argument);
}

TEST(CandidateActions, AddsGeneralisedRule) {
  Corpus c = Make({"jump and walk ### JUMP WALK", "jump ### JUMP"});
  Grammar g;
  g.Add(Rule::Parse("jump and walk ### JUMP WALK"));
  g.Add(Rule::Parse("jump ### JUMP"));
  OccurrenceStats stats(c, 0, 0);
  auto actions = CandidateActions(g, g.rule(0), c, nullptr, stats, Plain());
  bool found = false;
  for (const Action& a : actions) {
    if (a.rule_to_add.ToString() != "NT_1 and walk ### NT_1 WALK") continue;
    found = true;
    ASSERT_FALSE(a.rules_to_remove.empty());
    EXPECT_EQ(a.rules_to_remove[0], g.rule(0));
    double want = ScoreOracle(a.rule_to_add, c, Plain());
    for (const Rule& r : a.rules_to_remove) want -= ScoreOracle(r, c, Plain());
    EXPECT_NEAR(a.objective_delta, want, 1e-12);
  }
  EXPECT_TRUE(found);
  for (const Action& a : actions) EXPECT_FALSE(g.Contains(a.rule_to_add)) << a.rule_to_add.ToString();
}

TEST(CandidateActions, NoPartnerAndCfgFilter) {
  Corpus c = Make({"jump ### JUMP", "walk ### WALK"});
  Grammar g;
  g.Add(Rule::Parse("jump ### JUMP"));
  g.Add(Rule::Parse("walk ### WALK"));
  OccurrenceStats stats(c, 0, 0);
  EXPECT_TRUE(CandidateActions(g, g.rule(0), c, nullptr, stats, Plain()).empty());

  Corpus c2 = Make({"jump and walk ### JUMP WALK", "jump ### JUMP"});
  Grammar g2;
  g2.Add(Rule::Parse("jump and walk ### JUMP WALK"));
  g2.Add(Rule::Parse("jump ### JUMP"));
  OccurrenceStats stats2(c2, 0, 0);
  // No category can stand before a WALK.
  OutputCfg cfg = OutputCfg::Parse("S -> 'JUMP' | 'WALK' | 'JUMP' 'WALK'\n", "<test>");
  auto unfiltered = CandidateActions(g2, g2.rule(0), c2, nullptr, stats2, Plain());
  auto filtered = CandidateActions(g2, g2.rule(0), c2, &cfg, stats2, Plain());
  EXPECT_FALSE(unfiltered.empty());
  EXPECT_TRUE(filtered.empty());
  for (const Action& a : filtered) EXPECT_TRUE(RuleOutputValid(cfg, a.rule_to_add.output));
}

TEST(Induce, ThreeExamplesGeneralise) {
  InductionConfig cfg = Plain();
  cfg.terminal_weight = 2;
  Corpus c = ThreeExamples();
  InductionResult r = Induce(c, {}, nullptr, cfg);
  auto texts = Texts(r.grammar);
  EXPECT_TRUE(texts.count("NT_1 and NT_2 ### NT_1 NT_2"));
  EXPECT_TRUE(texts.count("jump ### JUMP"));
  EXPECT_TRUE(texts.count("walk ### WALK"));
  EXPECT_FALSE(r.step_budget_exhausted);
  for (const auto& e : c.examples) EXPECT_TRUE(Derivable(r.grammar.rules(), e));
}

TEST(Induce, SingleExampleStaysDerivable) {
  Corpus c = Make({"look around right ### RTURN LOOK RTURN LOOK"});
  InductionResult r = Induce(c, {}, nullptr, Plain());
  EXPECT_TRUE(Derivable(r.grammar.rules(), c.examples[0]));
}

TEST(Induce, BudgetExhaustionIsFlagged) {
  InductionConfig cfg = Plain();
  cfg.terminal_weight = 2;
  cfg.max_steps = 1;
  InductionResult r = Induce(ThreeExamples(), {}, nullptr, cfg);
  EXPECT_TRUE(r.step_budget_exhausted);
  EXPECT_THROW(Induce(ThreeExamples(), {}, nullptr, InductionConfig{.max_steps = 0}), std::invalid_argument);
}

Corpus RandomCorpus(std::mt19937_64& rng) {
  static const std::vector<std::string> in{"a", "b", "c"}, out{"A", "B", "C"};
  for (;;) {
    std::vector<Rule> rules;
    rules.emplace_back(Sequence{Symbol::Terminal("a")}, Sequence{Symbol::Terminal("A")});
    rules.emplace_back(Sequence{Symbol::Terminal("b")}, Sequence{Symbol::Terminal("B")});
    int extra = std::uniform_int_distribution<int>(1, 3)(rng);
    while (static_cast<int>(rules.size()) < 2 + extra) {
      Rule r = oracle::RandomRule(rng, in, out, 3, 2, true);
      if (r.input.size() == 1 && r.input[0].is_nonterminal()) continue;
      rules.push_back(r);
    }
    Corpus c;
    std::set<std::pair<std::string, std::string>> seen;
    for (int tries = 0; tries < 200 && c.size() < 8; ++tries) {
      auto z = oracle::RandomDerivation(rng, rules, 3);
      if (!z) continue;
      ExamplePair e = oracle::Yield(*z);
      if (e.input.size() > 6 || e.output.size() > 6) continue;
      if (seen.emplace(ToString(e.input), ToString(e.output)).second) c.examples.push_back(e);
    }
    if (c.size() >= 4) return c;
  }
}

// Coverage of every activated example after each iteration, objective
// non-increasing within a partition and equal to the brute-force sum, and
// determinism across worker counts.
TEST(InduceProperty, CoverageMonotonicityDeterminism) {
  std::mt19937_64 rng(2024);
  size_t changes = 0;
  for (int trial = 0; trial < 20; ++trial) {
    Corpus c = RandomCorpus(rng);
    InductionConfig cfg = Plain();
    cfg.terminal_weight = 1 + static_cast<double>(trial % 3);
    cfg.partitions = 1 + trial % 2;
    cfg.max_steps = 50;
    auto parts = PartitionByLength(c, cfg.partitions);
    int last_partition = -1;
    double last_objective = 0;
    InductionResult r = Induce(c, {}, nullptr, cfg, [&](const IterationRecord& rec, const Grammar& g) {
      std::vector<size_t> active;
      for (int p = 0; p <= rec.partition; ++p) active.insert(active.end(), parts[p].begin(), parts[p].end());
      EXPECT_EQ(rec.active_examples, active.size());
      for (size_t i : active)
        EXPECT_TRUE(Derivable(g.rules(), c.examples[i]))
            << "trial " << trial << " step " << rec.step << " example " << i;
      double want = 0;
      for (const Rule& rule : g.rules()) want += ScoreOracle(rule, c, cfg);
      EXPECT_NEAR(rec.objective, want, 1e-9 * std::max(1.0, std::abs(want)));
      EXPECT_EQ(rec.grammar_size, g.size());
      changes += rec.actions + rec.plain_removals;
      if (rec.partition == last_partition)
        EXPECT_LE(rec.objective, last_objective + 1e-9) << "trial " << trial;
      last_partition = rec.partition;
      last_objective = rec.objective;
    });
    for (const auto& e : c.examples) EXPECT_TRUE(Derivable(r.grammar.rules(), e)) << "trial " << trial;
    InductionConfig many = cfg;
    many.workers = 3;
    EXPECT_EQ(Induce(c, {}, nullptr, many).grammar.Fingerprint(), r.grammar.Fingerprint());
  }
  EXPECT_GT(changes, 40u);
}

}  // namespace
}  // namespace qcfg
