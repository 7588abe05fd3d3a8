#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qcfg/chart_parser.h"
#include "qcfg/derivation.h"
#include "qcfg/forest.h"
#include "qcfg/grammar.h"
#include "qcfg/output_cfg.h"

namespace qcfg {

inline constexpr uint32_t kRootContext = 0;

// Contexts are ROOT plus one (parent rule, nonterminal index) pair per
// nonterminal of every rule, numbered in grammar order.
class ContextLayout {
 public:
  ContextLayout() = default;
  explicit ContextLayout(const Grammar& grammar);

  size_t num_contexts() const { return num_contexts_; }
  size_t num_rules() const { return offsets_.size(); }
  int arity(size_t rule) const { return arities_[rule]; }
  // index is 1-based; LookupError when out of range.
  uint32_t Context(size_t rule, int index) const;

 private:
  std::vector<uint32_t> offsets_;
  std::vector<int> arities_;
  size_t num_contexts_ = 1;
};

struct ModelParams {
  int num_states = 1;
  size_t num_rules = 0;
  size_t num_contexts = 1;
  std::vector<double> theta_ctx;   // [context][state]
  std::vector<double> theta_emit;  // [state][rule]
  uint64_t grammar_fingerprint = 0;

  size_t ParameterCount() const { return theta_ctx.size() + theta_emit.size(); }
  double& ctx(size_t c, int s) { return theta_ctx[c * num_states + s]; }
  double ctx(size_t c, int s) const { return theta_ctx[c * num_states + s]; }
  double& emit(int s, size_t r) { return theta_emit[s * num_rules + r]; }
  double emit(int s, size_t r) const { return theta_emit[s * num_rules + r]; }
};

inline constexpr double kDefaultInitScale = 0.1;

ModelParams InitParams(const Grammar& grammar, int num_states, uint64_t seed,
                       double scale = kDefaultInitScale);

// Log-normalized parameter tables. With a mask, the emission softmax runs
// over the masked rules only and the others get -inf.
struct LogTables {
  int num_states = 1;
  size_t num_rules = 0;
  std::vector<double> ctx;   // log p(s | context)
  std::vector<double> emit;  // log p(r | s)

  static LogTables Build(const ModelParams& params, const std::vector<char>* rule_mask = nullptr);
  double LogExpansion(uint32_t rule, uint32_t context) const;
};

struct Gradient {
  std::vector<double> ctx;
  std::vector<double> emit;

  explicit Gradient(const ModelParams& p = {})
      : ctx(p.theta_ctx.size(), 0.0), emit(p.theta_emit.size(), 0.0) {}
  void Clear();
  Gradient& operator+=(const Gradient& o);
};

// log of the summed probability of every derivation in the forest, with the
// root expanded from ROOT. Edge rule ids must be grammar indices.
double ForestLogInside(const DerivationForest& forest, const ContextLayout& layout,
                       const LogTables& tables);

// Same value; adds weight * d(log inside)/d(theta) to grad. The mask must be
// the one tables were built with.
double ForestLogInsideGradient(const DerivationForest& forest, const ContextLayout& layout,
                               const LogTables& tables, const std::vector<char>* rule_mask,
                               double weight, Gradient* grad);

struct ViterbiResult {
  Sequence output;
  Derivation derivation;
  double log_prob = 0.0;
};

class LatentModel {
 public:
  // LookupError when params do not match the grammar.
  LatentModel(Grammar grammar, ModelParams params, ParserOptions options = {});

  const Grammar& grammar() const { return grammar_; }
  const ModelParams& params() const { return params_; }
  const ContextLayout& layout() const { return layout_; }
  const LogTables& tables() const { return tables_; }
  const ChartParser& parser() const { return parser_; }

  double ExpansionProb(uint32_t rule, uint32_t context) const;
  // parent == nullopt means ROOT.
  double ExpansionProb(const Rule& rule, const std::optional<std::pair<Rule, int>>& parent) const;
  double DerivationLogProb(const Derivation& z) const;

  // -inf when the pair is not derivable.
  double JointLogLik(const ExamplePair& pair) const;
  // UndefinedConditional when the input is not derivable.
  double ConditionalLogLik(const ExamplePair& pair) const;
  // nullopt (abstain) when x is not derivable or the best output fails the
  // output CFG.
  std::optional<ViterbiResult> ViterbiParse(std::span<const Symbol> x,
                                            const OutputCfg* output_cfg = nullptr) const;

  uint32_t RuleId(const Rule& rule) const;

 private:
  double LogDerivation(const Derivation& z, uint32_t context) const;

  Grammar grammar_;
  ModelParams params_;
  ContextLayout layout_;
  LogTables tables_;
  ChartParser parser_;
};

// Default |S| grid and learning-rate grid.
inline const std::vector<int> kDefaultStateGrid = {2, 4, 32, 64};
inline const std::vector<double> kDefaultLearningRateGrid = {0.01, 0.05, 0.1};
inline constexpr size_t kBatchRestrictedRuleThreshold = 5000;

// How FitSearch ranks its runs, on training data only. kConditional ranks by
// mean log p(y|x) and breaks near-ties (within kSelectionTolerance) by the
// joint.
enum class FitSelection { kJoint, kConditional };
inline constexpr double kSelectionTolerance = 1e-3;

struct TrainConfig {
  double learning_rate = 0.05;
  int steps = 500;
  int batch_size = 32;
  // Emission softmax over the rules used in the batch's forests.
  bool batch_restricted_normalization = false;
  uint64_t rng_seed = 0;
  int workers = 0;
  double init_scale = kDefaultInitScale;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  ParserOptions parser;
  FitSelection selection = FitSelection::kJoint;
};

struct FitStats {
  size_t examples = 0;
  size_t skipped = 0;
  // Mean joint log-likelihood of each step's batch, before the update.
  std::vector<double> loglik_trace;
  double learning_rate = 0.0;
  uint64_t init_seed = 0;
  double train_mean_joint = 0.0;
  // Only computed under FitSelection::kConditional.
  double train_mean_conditional = 0.0;
};

// Maximizes the mean joint log-likelihood with Adam on minibatches. Starts
// from `init` when given, otherwise InitParams(seed).
ModelParams Fit(const Grammar& grammar, const Corpus& corpus, int num_states,
                const TrainConfig& cfg, FitStats* stats = nullptr,
                const ModelParams* init = nullptr);

// Fits once per (learning rate, restart) and keeps the best run under
// cfg.selection. Restart k > 0 initializes from
// MixSeed(cfg.rng_seed, k).
ModelParams FitSearch(const Grammar& grammar, const Corpus& corpus, int num_states,
                      const TrainConfig& cfg, std::span<const double> learning_rates,
                      int restarts = 1, FitStats* stats = nullptr);

// Mean over derivable examples; skipped counts the others.
struct LikelihoodSummary {
  double mean_joint = 0.0;
  double mean_conditional = 0.0;
  size_t evaluated = 0;
  size_t skipped = 0;
};
LikelihoodSummary EvaluateLikelihood(const LatentModel& model, const Corpus& corpus, int workers = 0);

std::string ParamsToJson(const ModelParams& params);
ModelParams ParamsFromJson(const std::string& text, const std::string& source = "<params>");
void SaveParams(const std::string& path, const ModelParams& params);
ModelParams LoadParams(const std::string& path);

}  // namespace qcfg
