#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "qcfg/chart_parser.h"
#include "qcfg/corpus.h"
#include "qcfg/grammar.h"
#include "qcfg/occurrence.h"
#include "qcfg/output_cfg.h"

namespace qcfg {

inline constexpr int64_t kAutoPhatSample = -1;
inline constexpr int64_t kExactPhat = 0;

struct InductionConfig {
  double k_alpha = 1.0;
  double k_beta = 1.0;
  double terminal_weight = 1.0;
  double nonterminal_weight = 1.0;
  int max_nonterminals = kDefaultMaxNonterminals;
  bool allow_repeated_indices = true;
  int partitions = 1;
  // Iteration budget for each partition.
  int max_steps = 1000;
  // kExactPhat, a positive sample size, or kAutoPhatSample (exact up to
  // 10^4 examples, otherwise 2,000 sampled examples).
  int64_t sample_size_for_phat = kAutoPhatSample;
  uint64_t rng_seed = 0;
  int workers = 0;
  // Require occurrences of one output index to share a CFG category.
  bool consistent_cfg_categories = false;
  // Re-parse every activated example after each iteration.
  bool verify_coverage = false;
  ParserOptions parser;
};

// Hyperparameter presets per dataset family.
InductionConfig ScanInductionConfig();
InductionConfig CogsInductionConfig();
InductionConfig GeoQueryInductionConfig();
InductionConfig SmcalflowInductionConfig();

size_t ResolvePhatSampleSize(const InductionConfig& cfg, size_t corpus_size);

struct Action {
  Rule rule_to_add;
  std::vector<Rule> rules_to_remove;
  double objective_delta = 0.0;
};

// <t, t> for every token occurring on both sides of some example.
std::vector<Rule> SeedRulesSharedTokens(const Corpus& corpus);

// Example indices sorted by (input length, output length), split into
// `partitions` contiguous chunks of near-equal size.
std::vector<std::vector<size_t>> PartitionByLength(const Corpus& corpus, int partitions);

Rule WholeExampleRule(const ExamplePair& example);

Grammar InitGrammar(const Corpus& corpus, std::span<const Rule> seeds, const InductionConfig& cfg);

double RuleScore(const Rule& rule, const OccurrenceStats& stats, const InductionConfig& cfg);
double Objective(const Grammar& grammar, const OccurrenceStats& stats, const InductionConfig& cfg);

bool RemovalCheck(const Grammar& grammar, const Rule& rule, const Corpus& corpus,
                  ParserOptions options = {});

std::vector<Action> CandidateActions(const Grammar& grammar, const Rule& r_c, const Corpus& corpus,
                                     const OutputCfg* output_cfg, const OccurrenceStats& stats,
                                     const InductionConfig& cfg);

struct IterationRecord {
  int partition = 0;
  int step = 0;
  double objective = 0.0;
  size_t grammar_size = 0;
  size_t active_examples = 0;
  std::vector<std::string> added;
  std::vector<std::string> removed;
  size_t actions = 0;
  size_t plain_removals = 0;
};

struct InductionResult {
  Grammar grammar;
  bool step_budget_exhausted = false;
  double objective = 0.0;
  std::vector<IterationRecord> iterations;
};

using IterationObserver = std::function<void(const IterationRecord&, const Grammar&)>;

InductionResult Induce(const Corpus& corpus, std::span<const Rule> seeds,
                       const OutputCfg* output_cfg, const InductionConfig& cfg,
                       const IterationObserver& observer = {});

}  // namespace qcfg
