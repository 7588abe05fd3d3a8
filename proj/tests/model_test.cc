#include <gtest/gtest.h>

#include <random>

#include "oracles.h"
#include "qcfg/chart_parser.h"
#include "qcfg/errors.h"
#include "qcfg/model.h"
#include "qcfg/rng.h"

namespace qcfg {
namespace {

Grammar ToyGrammar() {
  Grammar g;
  for (const char* r : {"walk ### WALK", "jump ### JUMP", "look ### LOOK", "NT_1 twice ### NT_1 NT_1",
                        "NT_1 thrice ### NT_1 NT_1 NT_1", "NT_1 and NT_2 ### NT_1 NT_2",
                        "NT_1 after NT_2 ### NT_2 NT_1"})
    g.Add(Rule::Parse(r));
  return g;
}

Corpus ToyCorpus() {
  Corpus c;
  for (const char* x : {"walk", "jump", "look"})
    for (const char* m : {"", " twice", " thrice"})
      for (const char* y : {"walk", "look"}) {
        std::string a = std::string(x) + m;
        std::string unit = x[0] == 'w' ? "WALK" : x[0] == 'j' ? "JUMP" : "LOOK";
        std::string ya = unit;
        if (std::string(m) == " twice") ya = unit + " " + unit;
        if (std::string(m) == " thrice") ya = unit + " " + unit + " " + unit;
        std::string yb = y[0] == 'w' ? "WALK" : "LOOK";
        c.examples.push_back(MakePair(a, ya));
        c.examples.push_back(MakePair(a + " and " + y, ya + " " + yb));
        c.examples.push_back(MakePair(a + " after " + y, yb + " " + ya));
      }
  return c;
}

TEST(ContextLayout, NumbersContextsInGrammarOrder) {
  Grammar g = ToyGrammar();
  ContextLayout layout(g);
  EXPECT_EQ(layout.num_contexts(), oracle::NumContexts(g));
  for (size_t r = 0; r < g.size(); ++r)
    for (int i = 1; i <= g.rule(r).Arity(); ++i) EXPECT_EQ(layout.Context(r, i), oracle::ContextOf(g, r, i));
  EXPECT_THROW(layout.Context(0, 1), LookupError);
  EXPECT_THROW(layout.Context(3, 2), LookupError);
}

TEST(LatentModel, ExpansionProbMatchesOracleAndRuleLookup) {
  Grammar g = ToyGrammar();
  ModelParams p = InitParams(g, 3, 5, 1.0);
  LatentModel m(g, p);
  for (size_t c = 0; c < oracle::NumContexts(g); ++c)
    for (size_t r = 0; r < g.size(); ++r)
      EXPECT_NEAR(m.ExpansionProb(static_cast<uint32_t>(r), static_cast<uint32_t>(c)),
                  static_cast<double>(oracle::ExpansionProb(p, r, c)), 1e-12);
  Rule twice = Rule::Parse("NT_1 twice ### NT_1 NT_1");
  Rule walk = Rule::Parse("walk ### WALK");
  EXPECT_DOUBLE_EQ(m.ExpansionProb(walk, std::make_pair(twice, 1)),
                   m.ExpansionProb(m.RuleId(walk), m.layout().Context(m.RuleId(twice), 1)));
  EXPECT_DOUBLE_EQ(m.ExpansionProb(walk, std::nullopt), m.ExpansionProb(m.RuleId(walk), kRootContext));
  EXPECT_THROW(m.RuleId(Rule::Parse("run ### RUN")), LookupError);
  EXPECT_THROW(m.ExpansionProb(walk, std::make_pair(twice, 2)), LookupError);
}

TEST(LatentModel, RejectsMismatchedParameters) {
  Grammar g = ToyGrammar();
  ModelParams p = InitParams(g, 2, 1);
  Grammar other = g;
  other.Add(Rule::Parse("run ### RUN"));
  EXPECT_THROW(LatentModel(other, p), LookupError);
  ModelParams bad = p;
  bad.theta_emit.pop_back();
  EXPECT_THROW(LatentModel(g, bad), LookupError);
}

TEST(LatentModel, UndefinedConditionalAndUnderivableJoint) {
  Grammar g = ToyGrammar();
  LatentModel m(g, InitParams(g, 2, 1));
  EXPECT_EQ(m.JointLogLik(MakePair("walk", "JUMP")), -std::numeric_limits<double>::infinity());
  EXPECT_THROW(m.ConditionalLogLik(MakePair("run", "RUN")), UndefinedConditional);
  EXPECT_FALSE(m.ViterbiParse(Tokens("run twice")).has_value());
  auto v = m.ViterbiParse(Tokens("jump twice after walk"));
  ASSERT_TRUE(v.has_value());
  EXPECT_EQ(ToString(v->output), "WALK JUMP JUMP");
}

// Analytic gradients of the forest log-inside against central differences,
// with and without a batch restriction mask.
TEST(ModelProperty, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(4242);
  double worst = 0;
  for (int trial = 0; trial < 50; ++trial) {
    oracle::Instance inst = oracle::RandomInstance(rng, true, false);
    ChartParser parser(inst.grammar);
    auto forest = parser.ParsePair(inst.pair);
    ASSERT_TRUE(forest.has_value());
    ContextLayout layout(inst.grammar);
    ModelParams p = InitParams(inst.grammar, 1 + static_cast<int>(rng() % 3), rng(), 1.0);
    std::vector<char> mask;
    const std::vector<char>* mask_ptr = nullptr;
    if (trial % 2 == 1) {
      mask.assign(inst.grammar.size(), 0);
      for (const auto& e : forest->edges()) mask[e.rule] = 1;
      for (auto& m : mask) m |= static_cast<char>(rng() % 2);
      mask_ptr = &mask;
    }
    LogTables tables = LogTables::Build(p, mask_ptr);
    Gradient grad(p);
    double value = ForestLogInsideGradient(*forest, layout, tables, mask_ptr, 1.0, &grad);
    EXPECT_NEAR(value, ForestLogInside(*forest, layout, tables), 1e-12);
    auto fd = [&](std::vector<double>& theta, size_t k) {
      const double h = 1e-5;
      double saved = theta[k];
      theta[k] = saved + h;
      double up = ForestLogInside(*forest, layout, LogTables::Build(p, mask_ptr));
      theta[k] = saved - h;
      double down = ForestLogInside(*forest, layout, LogTables::Build(p, mask_ptr));
      theta[k] = saved;
      return (up - down) / (2 * h);
    };
    auto check = [&](std::vector<double>& theta, const std::vector<double>& analytic) {
      for (size_t k = 0; k < theta.size(); ++k) {
        double n = fd(theta, k);
        double a = analytic[k];
        double rel = std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-5});
        worst = std::max(worst, rel);
        EXPECT_LT(rel, 1e-4) << "trial " << trial << " index " << k << " analytic " << a << " numeric " << n;
      }
    };
    check(p.theta_ctx, grad.ctx);
    check(p.theta_emit, grad.emit);
  }
  RecordProperty("worst_relative_error", std::to_string(worst));
}

TEST(ModelProperty, WeightScalesGradient) {
  std::mt19937_64 rng(8);
  oracle::Instance inst = oracle::RandomInstance(rng, true, false);
  auto forest = ChartParser(inst.grammar).ParsePair(inst.pair);
  ContextLayout layout(inst.grammar);
  ModelParams p = InitParams(inst.grammar, 2, 3, 1.0);
  LogTables tables = LogTables::Build(p);
  Gradient g1(p), g3(p);
  ForestLogInsideGradient(*forest, layout, tables, nullptr, 1.0, &g1);
  ForestLogInsideGradient(*forest, layout, tables, nullptr, 3.0, &g3);
  for (size_t k = 0; k < g1.emit.size(); ++k) EXPECT_NEAR(g3.emit[k], 3 * g1.emit[k], 1e-12);
}

TEST(Fit, ImprovesLikelihoodAndNormalizes) {
  Grammar g = ToyGrammar();
  Corpus c = ToyCorpus();
  TrainConfig cfg;
  cfg.steps = 300;
  cfg.workers = 1;
  FitStats stats;
  ModelParams init = InitParams(g, 2, cfg.rng_seed, cfg.init_scale);
  ModelParams p = Fit(g, c, 2, cfg, &stats);
  LatentModel before(g, init), after(g, p);
  EXPECT_GT(EvaluateLikelihood(after, c, 1).mean_joint, EvaluateLikelihood(before, c, 1).mean_joint + 1.0);
  EXPECT_EQ(stats.examples, c.size());
  EXPECT_EQ(stats.skipped, 0u);
  EXPECT_EQ(stats.loglik_trace.size(), 300u);
  for (size_t ctx = 0; ctx < after.layout().num_contexts(); ++ctx) {
    double total = 0;
    for (size_t r = 0; r < g.size(); ++r) total += after.ExpansionProb(static_cast<uint32_t>(r), static_cast<uint32_t>(ctx));
    EXPECT_NEAR(total, 1.0, 1e-9) << "context " << ctx;
  }
}

TEST(Fit, SingleStateIsContextIndependent) {
  Grammar g = ToyGrammar();
  TrainConfig cfg;
  cfg.steps = 100;
  cfg.workers = 1;
  LatentModel m(g, Fit(g, ToyCorpus(), 1, cfg));
  for (size_t r = 0; r < g.size(); ++r)
    for (size_t ctx = 1; ctx < m.layout().num_contexts(); ++ctx)
      EXPECT_NEAR(m.ExpansionProb(static_cast<uint32_t>(r), static_cast<uint32_t>(ctx)),
                  m.ExpansionProb(static_cast<uint32_t>(r), kRootContext), 1e-15);
}

TEST(Fit, DeterministicAcrossWorkerCounts) {
  Grammar g = ToyGrammar();
  Corpus c = ToyCorpus();
  TrainConfig cfg;
  cfg.steps = 50;
  cfg.batch_size = 8;
  cfg.rng_seed = 77;
  cfg.workers = 1;
  ModelParams a = Fit(g, c, 2, cfg);
  cfg.workers = 3;
  ModelParams b = Fit(g, c, 2, cfg);
  EXPECT_EQ(a.theta_ctx, b.theta_ctx);
  EXPECT_EQ(a.theta_emit, b.theta_emit);
  cfg.batch_restricted_normalization = true;
  ModelParams r = Fit(g, c, 2, cfg);
  EXPECT_NE(r.theta_emit, b.theta_emit);
}

TEST(Fit, SkipsUnderivableExamples) {
  Grammar g = ToyGrammar();
  Corpus c = ToyCorpus();
  c.examples.push_back(MakePair("run", "RUN"));
  TrainConfig cfg;
  cfg.steps = 5;
  FitStats stats;
  Fit(g, c, 2, cfg, &stats);
  EXPECT_EQ(stats.skipped, 1u);
}

TEST(FitSearch, KeepsBestRunUnderEachCriterion) {
  Grammar g = ToyGrammar();
  Corpus c = ToyCorpus();
  TrainConfig cfg;
  cfg.steps = 60;
  cfg.workers = 1;
  cfg.rng_seed = 3;
  const std::vector<double> lrs{0.01, 0.1};
  const int restarts = 3;
  double best_joint = -1e300, best_cond = -1e300;
  for (int k = 0; k < restarts; ++k) {
    uint64_t seed = k == 0 ? cfg.rng_seed : MixSeed(cfg.rng_seed, static_cast<uint64_t>(k));
    ModelParams init = InitParams(g, 2, seed, cfg.init_scale);
    for (double lr : lrs) {
      TrainConfig one = cfg;
      one.learning_rate = lr;
      LatentModel m(g, Fit(g, c, 2, one, nullptr, &init));
      auto s = EvaluateLikelihood(m, c, 1);
      best_joint = std::max(best_joint, s.mean_joint);
      best_cond = std::max(best_cond, s.mean_conditional);
    }
  }
  FitStats stats;
  LatentModel joint(g, FitSearch(g, c, 2, cfg, lrs, restarts, &stats));
  EXPECT_NEAR(EvaluateLikelihood(joint, c, 1).mean_joint, best_joint, 1e-9);
  EXPECT_NEAR(stats.train_mean_joint, best_joint, 1e-9);
  cfg.selection = FitSelection::kConditional;
  LatentModel cond(g, FitSearch(g, c, 2, cfg, lrs, restarts, &stats));
  EXPECT_GE(EvaluateLikelihood(cond, c, 1).mean_conditional, best_cond - kSelectionTolerance);
  EXPECT_THROW(FitSearch(g, c, 2, cfg, std::vector<double>{}, 1), std::invalid_argument);
}

TEST(Params, JsonRoundTripIsExact) {
  Grammar g = ToyGrammar();
  ModelParams p = InitParams(g, 4, 9, 0.7);
  ModelParams q = ParamsFromJson(ParamsToJson(p), "<mem>");
  EXPECT_EQ(p.theta_ctx, q.theta_ctx);
  EXPECT_EQ(p.theta_emit, q.theta_emit);
  EXPECT_EQ(p.num_states, q.num_states);
  EXPECT_EQ(p.num_contexts, q.num_contexts);
  EXPECT_EQ(p.grammar_fingerprint, q.grammar_fingerprint);
  EXPECT_EQ(p.ParameterCount(), p.num_contexts * 4 + 4 * g.size());
}

TEST(Params, MalformedJsonIsDataError) {
  try {
    ParamsFromJson("{\"format\": \"other\"}", "p.json");
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("p.json"), std::string::npos);
  }
  EXPECT_THROW(ParamsFromJson("not json", "p.json"), DataError);
  EXPECT_THROW(LoadParams("/nonexistent/params.json"), DataError);
}

}  // namespace
}  // namespace qcfg
