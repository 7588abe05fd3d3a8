#include "qcfg/model.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <unordered_map>

#include "json.hpp"
#include "qcfg/errors.h"
#include "qcfg/parallel.h"
#include "qcfg/rng.h"
#include "qcfg/text_io.h"

namespace qcfg {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double LogAdd(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  if (a < b) std::swap(a, b);
  return a + std::log1p(std::exp(b - a));
}

// Per-node list of the contexts a node is expanded under, flattened.
struct Slots {
  std::vector<uint32_t> begin;  // size nodes + 1
  std::vector<uint32_t> context;

  uint32_t Find(uint32_t node, uint32_t ctx) const {
    auto first = context.begin() + begin[node], last = context.begin() + begin[node + 1];
    return static_cast<uint32_t>(std::lower_bound(first, last, ctx) - context.begin());
  }
};

Slots BuildSlots(const DerivationForest& forest, const ContextLayout& layout) {
  const size_t n = forest.nodes().size();
  std::vector<std::vector<uint32_t>> need(n);
  need[forest.root()].push_back(kRootContext);
  for (uint32_t node = 0; node < n; ++node)
    for (const auto& e : forest.NodeEdges(node)) {
      auto kids = forest.EdgeChildren(e);
      for (size_t i = 0; i < kids.size(); ++i)
        need[kids[i]].push_back(layout.Context(e.rule, static_cast<int>(i) + 1));
    }
  Slots slots;
  slots.begin.reserve(n + 1);
  for (auto& v : need) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    slots.begin.push_back(static_cast<uint32_t>(slots.context.size()));
    slots.context.insert(slots.context.end(), v.begin(), v.end());
  }
  slots.begin.push_back(static_cast<uint32_t>(slots.context.size()));
  return slots;
}

struct Inside {
  Slots slots;
  std::vector<double> node_state;  // [node][state]: sum over edges given the state
  std::vector<double> slot;        // [slot]
  std::vector<double> edge_kids;   // [edge]: summed child inside scores
  double log_z = kNegInf;
};

Inside RunInside(const DerivationForest& forest, const ContextLayout& layout, const LogTables& t) {
  Inside in;
  in.slots = BuildSlots(forest, layout);
  const int S = t.num_states;
  const size_t n = forest.nodes().size();
  in.node_state.assign(n * S, kNegInf);
  in.slot.assign(in.slots.context.size(), kNegInf);
  in.edge_kids.assign(forest.edges().size(), kNegInf);
  const auto* edges = forest.edges().data();
  for (uint32_t node = 0; node < n; ++node) {
    double* ns = &in.node_state[node * S];
    for (const auto& e : forest.NodeEdges(node)) {
      auto kids = forest.EdgeChildren(e);
      double sum = 0.0;
      for (size_t i = 0; i < kids.size() && sum != kNegInf; ++i) {
        uint32_t ctx = layout.Context(e.rule, static_cast<int>(i) + 1);
        sum += in.slot[in.slots.Find(kids[i], ctx)];
      }
      in.edge_kids[&e - edges] = sum;
      if (sum == kNegInf) continue;
      for (int s = 0; s < S; ++s) ns[s] = LogAdd(ns[s], t.emit[s * t.num_rules + e.rule] + sum);
    }
    for (uint32_t k = in.slots.begin[node]; k < in.slots.begin[node + 1]; ++k) {
      const double* lc = &t.ctx[in.slots.context[k] * S];
      double v = kNegInf;
      for (int s = 0; s < S; ++s) v = LogAdd(v, lc[s] + ns[s]);
      in.slot[k] = v;
    }
  }
  in.log_z = in.slot[in.slots.Find(forest.root(), kRootContext)];
  return in;
}

}  // namespace

ContextLayout::ContextLayout(const Grammar& grammar) {
  uint32_t next = 1;
  for (const Rule& r : grammar.rules()) {
    offsets_.push_back(next);
    arities_.push_back(r.Arity());
    next += static_cast<uint32_t>(r.Arity());
  }
  num_contexts_ = next;
}

uint32_t ContextLayout::Context(size_t rule, int index) const {
  if (rule >= offsets_.size() || index < 1 || index > arities_[rule])
    throw LookupError("no context for rule " + std::to_string(rule) + " index " +
                      std::to_string(index));
  return offsets_[rule] + static_cast<uint32_t>(index - 1);
}

ModelParams InitParams(const Grammar& grammar, int num_states, uint64_t seed, double scale) {
  if (num_states < 1) throw std::invalid_argument("num_states must be >= 1");
  ContextLayout layout(grammar);
  ModelParams p;
  p.num_states = num_states;
  p.num_rules = grammar.size();
  p.num_contexts = layout.num_contexts();
  p.grammar_fingerprint = grammar.Fingerprint();
  Rng rng(seed);
  p.theta_ctx.resize(p.num_contexts * num_states);
  for (double& v : p.theta_ctx) v = scale > 0 ? rng.Normal(scale) : 0.0;
  p.theta_emit.resize(num_states * p.num_rules);
  for (double& v : p.theta_emit) v = scale > 0 ? rng.Normal(scale) : 0.0;
  return p;
}

LogTables LogTables::Build(const ModelParams& p, const std::vector<char>* mask) {
  LogTables t;
  t.num_states = p.num_states;
  t.num_rules = p.num_rules;
  const int S = p.num_states;
  t.ctx.resize(p.theta_ctx.size());
  for (size_t c = 0; c < p.num_contexts; ++c) {
    double z = kNegInf;
    for (int s = 0; s < S; ++s) z = LogAdd(z, p.ctx(c, s));
    for (int s = 0; s < S; ++s) t.ctx[c * S + s] = p.ctx(c, s) - z;
  }
  t.emit.assign(p.theta_emit.size(), kNegInf);
  for (int s = 0; s < S; ++s) {
    double z = kNegInf;
    for (size_t r = 0; r < p.num_rules; ++r)
      if (!mask || (*mask)[r]) z = LogAdd(z, p.emit(s, r));
    for (size_t r = 0; r < p.num_rules; ++r)
      if (!mask || (*mask)[r]) t.emit[s * p.num_rules + r] = p.emit(s, r) - z;
  }
  return t;
}

double LogTables::LogExpansion(uint32_t rule, uint32_t context) const {
  double v = kNegInf;
  for (int s = 0; s < num_states; ++s)
    v = LogAdd(v, ctx[context * num_states + s] + emit[s * num_rules + rule]);
  return v;
}

void Gradient::Clear() {
  std::fill(ctx.begin(), ctx.end(), 0.0);
  std::fill(emit.begin(), emit.end(), 0.0);
}

Gradient& Gradient::operator+=(const Gradient& o) {
  for (size_t i = 0; i < ctx.size(); ++i) ctx[i] += o.ctx[i];
  for (size_t i = 0; i < emit.size(); ++i) emit[i] += o.emit[i];
  return *this;
}

double ForestLogInside(const DerivationForest& forest, const ContextLayout& layout,
                       const LogTables& tables) {
  return RunInside(forest, layout, tables).log_z;
}

double ForestLogInsideGradient(const DerivationForest& forest, const ContextLayout& layout,
                               const LogTables& t, const std::vector<char>* mask, double weight,
                               Gradient* grad) {
  Inside in = RunInside(forest, layout, t);
  const double z = in.log_z;
  if (z == kNegInf) return z;
  const int S = t.num_states;
  const size_t n = forest.nodes().size();
  const auto* edges = forest.edges().data();
  std::vector<double> out(in.slot.size(), kNegInf);
  out[in.slots.Find(forest.root(), kRootContext)] = 0.0;
  std::vector<double> emit_count(static_cast<size_t>(S) * t.num_rules, 0.0);
  std::vector<double> out_state(S), base(S);
  for (uint32_t node = static_cast<uint32_t>(n); node-- > 0;) {
    const double* ns = &in.node_state[node * S];
    std::fill(out_state.begin(), out_state.end(), kNegInf);
    for (uint32_t k = in.slots.begin[node]; k < in.slots.begin[node + 1]; ++k) {
      if (out[k] == kNegInf || in.slot[k] == kNegInf) continue;
      uint32_t c = in.slots.context[k];
      const double* lc = &t.ctx[c * S];
      double total = 0.0;
      for (int s = 0; s < S; ++s) total += std::exp(out[k] + lc[s] + ns[s] - z);
      for (int s = 0; s < S; ++s) {
        double q = std::exp(out[k] + lc[s] + ns[s] - z);
        grad->ctx[c * S + s] += weight * (q - total * std::exp(lc[s]));
        out_state[s] = LogAdd(out_state[s], out[k] + lc[s]);
      }
    }
    for (const auto& e : forest.NodeEdges(node)) {
      double kids_sum = in.edge_kids[&e - edges];
      if (kids_sum == kNegInf) continue;
      double b = kNegInf;
      for (int s = 0; s < S; ++s) {
        base[s] = out_state[s] + t.emit[s * t.num_rules + e.rule];
        b = LogAdd(b, base[s]);
        if (base[s] != kNegInf) emit_count[s * t.num_rules + e.rule] += std::exp(base[s] + kids_sum - z);
      }
      if (b == kNegInf) continue;
      auto kids = forest.EdgeChildren(e);
      for (size_t i = 0; i < kids.size(); ++i) {
        uint32_t k = in.slots.Find(kids[i], layout.Context(e.rule, static_cast<int>(i) + 1));
        out[k] = LogAdd(out[k], b + kids_sum - in.slot[k]);
      }
    }
  }
  for (int s = 0; s < S; ++s) {
    const double* m = &emit_count[s * t.num_rules];
    double total = 0.0;
    for (size_t r = 0; r < t.num_rules; ++r) total += m[r];
    if (total == 0.0) continue;
    for (size_t r = 0; r < t.num_rules; ++r) {
      if (mask && !(*mask)[r]) continue;
      double p = std::exp(t.emit[s * t.num_rules + r]);
      grad->emit[s * t.num_rules + r] += weight * (m[r] - p * total);
    }
  }
  return z;
}

LatentModel::LatentModel(Grammar grammar, ModelParams params, ParserOptions options)
    : grammar_(std::move(grammar)),
      params_(std::move(params)),
      layout_(grammar_),
      parser_(grammar_, options) {
  if (params_.num_rules != grammar_.size() || params_.num_contexts != layout_.num_contexts() ||
      params_.theta_ctx.size() != params_.num_contexts * params_.num_states ||
      params_.theta_emit.size() != params_.num_rules * params_.num_states)
    throw LookupError("parameter tables do not match the grammar's rules and contexts");
  if (params_.grammar_fingerprint != grammar_.Fingerprint())
    throw LookupError("params are bound to grammar " + FingerprintHex(params_.grammar_fingerprint) +
                      ", not " + FingerprintHex(grammar_.Fingerprint()));
  tables_ = LogTables::Build(params_);
}

uint32_t LatentModel::RuleId(const Rule& rule) const {
  auto id = grammar_.Find(rule);
  if (!id) throw LookupError("rule not in grammar: " + rule.ToString());
  return static_cast<uint32_t>(*id);
}

double LatentModel::ExpansionProb(uint32_t rule, uint32_t context) const {
  if (rule >= params_.num_rules) throw LookupError("unknown rule id " + std::to_string(rule));
  if (context >= params_.num_contexts) throw LookupError("unknown context " + std::to_string(context));
  return std::exp(tables_.LogExpansion(rule, context));
}

double LatentModel::ExpansionProb(const Rule& rule,
                                  const std::optional<std::pair<Rule, int>>& parent) const {
  uint32_t ctx = parent ? layout_.Context(RuleId(parent->first), parent->second) : kRootContext;
  return ExpansionProb(RuleId(rule), ctx);
}

double LatentModel::LogDerivation(const Derivation& z, uint32_t context) const {
  uint32_t r = RuleId(z.rule);
  if (static_cast<int>(z.children.size()) != layout_.arity(r))
    throw std::invalid_argument("malformed derivation at " + z.rule.ToString());
  double lp = tables_.LogExpansion(r, context);
  for (size_t i = 0; i < z.children.size(); ++i)
    lp += LogDerivation(z.children[i], layout_.Context(r, static_cast<int>(i) + 1));
  return lp;
}

double LatentModel::DerivationLogProb(const Derivation& z) const {
  return LogDerivation(z, kRootContext);
}

double LatentModel::JointLogLik(const ExamplePair& pair) const {
  auto forest = parser_.ParsePair(pair);
  if (!forest) return kNegInf;
  return ForestLogInside(*forest, layout_, tables_);
}

double LatentModel::ConditionalLogLik(const ExamplePair& pair) const {
  auto input_forest = parser_.ParseInput(pair.input);
  if (!input_forest)
    throw UndefinedConditional("input is not derivable: " + ToString(pair.input));
  double marginal = ForestLogInside(*input_forest, layout_, tables_);
  return JointLogLik(pair) - marginal;
}

std::optional<ViterbiResult> LatentModel::ViterbiParse(std::span<const Symbol> x,
                                                      const OutputCfg* output_cfg) const {
  auto forest = parser_.ParseInput(x);
  if (!forest) return std::nullopt;
  Slots slots = BuildSlots(*forest, layout_);
  const auto* edges = forest->edges().data();
  std::vector<double> best(slots.context.size(), kNegInf);
  std::vector<uint32_t> back(slots.context.size(), UINT32_MAX);
  const size_t n = forest->nodes().size();
  for (uint32_t node = 0; node < n; ++node) {
    for (const auto& e : forest->NodeEdges(node)) {
      auto kids = forest->EdgeChildren(e);
      double sum = 0.0;
      for (size_t i = 0; i < kids.size() && sum != kNegInf; ++i)
        sum += best[slots.Find(kids[i], layout_.Context(e.rule, static_cast<int>(i) + 1))];
      if (sum == kNegInf) continue;
      for (uint32_t k = slots.begin[node]; k < slots.begin[node + 1]; ++k) {
        double v = tables_.LogExpansion(e.rule, slots.context[k]) + sum;
        if (v > best[k]) {
          best[k] = v;
          back[k] = static_cast<uint32_t>(&e - edges);
        }
      }
    }
  }
  uint32_t root_slot = slots.Find(forest->root(), kRootContext);
  if (back[root_slot] == UINT32_MAX) return std::nullopt;
  std::function<Derivation(uint32_t)> build = [&](uint32_t k) {
    const auto& e = edges[back[k]];
    Derivation z(grammar_.rule(e.rule));
    auto kids = forest->EdgeChildren(e);
    for (size_t i = 0; i < kids.size(); ++i)
      z.children.push_back(build(slots.Find(kids[i], layout_.Context(e.rule, static_cast<int>(i) + 1))));
    return z;
  };
  ViterbiResult result;
  result.derivation = build(root_slot);
  result.output = DerivationYield(result.derivation).output;
  result.log_prob = best[root_slot];
  if (output_cfg && !CfgAccepts(*output_cfg, result.output)) return std::nullopt;
  return result;
}

namespace {

struct ParsedCorpus {
  std::vector<DerivationForest> forests;  // unique derivable pairs
  std::vector<uint32_t> examples;         // forest index per derivable example
  size_t skipped = 0;
};

ParsedCorpus ParseCorpus(const ChartParser& parser, const Corpus& corpus, int workers) {
  std::unordered_map<ExamplePair, uint32_t, ExamplePairHash> ids;
  std::vector<const ExamplePair*> unique;
  std::vector<uint32_t> example_ids;
  for (const auto& e : corpus.examples) {
    auto [it, inserted] = ids.try_emplace(e, static_cast<uint32_t>(unique.size()));
    if (inserted) unique.push_back(&e);
    example_ids.push_back(it->second);
  }
  std::vector<std::optional<DerivationForest>> forests(unique.size());
  ParallelFor(unique.size(), workers, [&](size_t i) { forests[i] = parser.ParsePair(*unique[i]); });
  ParsedCorpus out;
  std::vector<uint32_t> remap(unique.size(), UINT32_MAX);
  for (size_t i = 0; i < unique.size(); ++i) {
    if (!forests[i]) continue;
    remap[i] = static_cast<uint32_t>(out.forests.size());
    out.forests.push_back(std::move(*forests[i]));
  }
  for (uint32_t id : example_ids) {
    if (remap[id] == UINT32_MAX) ++out.skipped;
    else out.examples.push_back(remap[id]);
  }
  return out;
}

ModelParams FitParsed(const Grammar& grammar, const ContextLayout& layout, const ParsedCorpus& data,
                      int num_states, const TrainConfig& cfg, FitStats* stats,
                      const ModelParams* init) {
  if (cfg.batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (cfg.steps < 0) throw std::invalid_argument("steps must be >= 0");
  if (!(cfg.learning_rate > 0)) throw std::invalid_argument("learning_rate must be positive");
  ModelParams params = init ? *init : InitParams(grammar, num_states, cfg.rng_seed, cfg.init_scale);
  if (stats) {
    stats->examples = data.examples.size() + data.skipped;
    stats->skipped = data.skipped;
    stats->learning_rate = cfg.learning_rate;
    stats->loglik_trace.clear();
  }
  if (data.examples.empty()) return params;
  Rng rng(MixSeed(cfg.rng_seed, 0x5eed));
  std::vector<uint32_t> order = data.examples;
  std::shuffle(order.begin(), order.end(), rng.engine());
  size_t pos = 0;
  const size_t batch = std::min<size_t>(cfg.batch_size, order.size());
  std::vector<double> m_ctx(params.theta_ctx.size()), v_ctx(params.theta_ctx.size());
  std::vector<double> m_emit(params.theta_emit.size()), v_emit(params.theta_emit.size());
  std::vector<Gradient> grads(batch, Gradient(params));
  std::vector<double> ll(batch);
  std::vector<uint32_t> items(batch);
  std::vector<char> mask;
  for (int step = 1; step <= cfg.steps; ++step) {
    for (size_t i = 0; i < batch; ++i) {
      if (pos == order.size()) {
        std::shuffle(order.begin(), order.end(), rng.engine());
        pos = 0;
      }
      items[i] = order[pos++];
    }
    const std::vector<char>* mask_ptr = nullptr;
    if (cfg.batch_restricted_normalization) {
      mask.assign(params.num_rules, 0);
      for (uint32_t f : items)
        for (const auto& e : data.forests[f].edges()) mask[e.rule] = 1;
      mask_ptr = &mask;
    }
    LogTables tables = LogTables::Build(params, mask_ptr);
    const double w = 1.0 / static_cast<double>(batch);
    ParallelFor(batch, cfg.workers, [&](size_t i) {
      grads[i].Clear();
      ll[i] = ForestLogInsideGradient(data.forests[items[i]], layout, tables, mask_ptr, w, &grads[i]);
    });
    Gradient total(params);
    double mean = 0.0;
    for (size_t i = 0; i < batch; ++i) {
      total += grads[i];
      mean += ll[i] * w;
    }
    if (stats) stats->loglik_trace.push_back(mean);
    const double c1 = 1.0 - std::pow(cfg.adam_beta1, step);
    const double c2 = 1.0 - std::pow(cfg.adam_beta2, step);
    auto update = [&](std::vector<double>& theta, const std::vector<double>& g, std::vector<double>& m,
                      std::vector<double>& v) {
      for (size_t i = 0; i < theta.size(); ++i) {
        m[i] = cfg.adam_beta1 * m[i] + (1 - cfg.adam_beta1) * g[i];
        v[i] = cfg.adam_beta2 * v[i] + (1 - cfg.adam_beta2) * g[i] * g[i];
        theta[i] += cfg.learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg.adam_epsilon);
      }
    };
    update(params.theta_ctx, total.ctx, m_ctx, v_ctx);
    update(params.theta_emit, total.emit, m_emit, v_emit);
  }
  return params;
}

double MeanJoint(const ContextLayout& layout, const ParsedCorpus& data, const ModelParams& params) {
  if (data.examples.empty()) return 0.0;
  LogTables tables = LogTables::Build(params);
  std::vector<double> per_forest(data.forests.size());
  for (size_t f = 0; f < data.forests.size(); ++f)
    per_forest[f] = ForestLogInside(data.forests[f], layout, tables);
  double total = 0.0;
  for (uint32_t f : data.examples) total += per_forest[f];
  return total / static_cast<double>(data.examples.size());
}

}  // namespace

ModelParams Fit(const Grammar& grammar, const Corpus& corpus, int num_states,
                const TrainConfig& cfg, FitStats* stats, const ModelParams* init) {
  ChartParser parser(grammar, cfg.parser);
  ContextLayout layout(grammar);
  ParsedCorpus data = ParseCorpus(parser, corpus, cfg.workers);
  ModelParams p = FitParsed(grammar, layout, data, num_states, cfg, stats, init);
  if (stats) {
    stats->init_seed = cfg.rng_seed;
    stats->train_mean_joint = MeanJoint(layout, data, p);
  }
  return p;
}

ModelParams FitSearch(const Grammar& grammar, const Corpus& corpus, int num_states,
                      const TrainConfig& cfg, std::span<const double> learning_rates, int restarts,
                      FitStats* stats) {
  if (learning_rates.empty()) throw std::invalid_argument("learning-rate grid is empty");
  if (restarts < 1) throw std::invalid_argument("restarts must be >= 1");
  ChartParser parser(grammar, cfg.parser);
  ContextLayout layout(grammar);
  ParsedCorpus data = ParseCorpus(parser, corpus, cfg.workers);
  std::optional<ModelParams> best;
  double best_joint = kNegInf, best_cond = kNegInf;
  for (int k = 0; k < restarts; ++k) {
    uint64_t init_seed = k == 0 ? cfg.rng_seed : MixSeed(cfg.rng_seed, static_cast<uint64_t>(k));
    ModelParams init = InitParams(grammar, num_states, init_seed, cfg.init_scale);
    for (double lr : learning_rates) {
      TrainConfig c = cfg;
      c.learning_rate = lr;
      FitStats s;
      ModelParams p = FitParsed(grammar, layout, data, num_states, c, &s, &init);
      double joint = MeanJoint(layout, data, p);
      double cond = 0.0;
      bool better = !best || joint > best_joint;
      if (cfg.selection == FitSelection::kConditional) {
        LatentModel m(grammar, p, cfg.parser);
        cond = EvaluateLikelihood(m, corpus, cfg.workers).mean_conditional;
        better = !best || cond > best_cond + kSelectionTolerance ||
                 (cond >= best_cond - kSelectionTolerance && joint > best_joint);
      }
      if (better) {
        best = std::move(p);
        best_joint = joint;
        best_cond = cond;
        s.init_seed = init_seed;
        s.train_mean_joint = joint;
        s.train_mean_conditional = cond;
        if (stats) *stats = s;
      }
    }
  }
  return *best;
}

LikelihoodSummary EvaluateLikelihood(const LatentModel& model, const Corpus& corpus, int workers) {
  std::vector<double> joint(corpus.size()), cond(corpus.size());
  ParallelFor(corpus.size(), workers, [&](size_t i) {
    joint[i] = model.JointLogLik(corpus.examples[i]);
    cond[i] = joint[i] == kNegInf ? kNegInf : model.ConditionalLogLik(corpus.examples[i]);
  });
  LikelihoodSummary s;
  for (size_t i = 0; i < corpus.size(); ++i) {
    if (joint[i] == kNegInf) {
      ++s.skipped;
      continue;
    }
    ++s.evaluated;
    s.mean_joint += joint[i];
    s.mean_conditional += cond[i];
  }
  if (s.evaluated) {
    s.mean_joint /= static_cast<double>(s.evaluated);
    s.mean_conditional /= static_cast<double>(s.evaluated);
  }
  return s;
}

std::string ParamsToJson(const ModelParams& p) {
  nlohmann::json j;
  j["format"] = "qcfg-params";
  j["version"] = 1;
  j["num_states"] = p.num_states;
  j["num_rules"] = p.num_rules;
  j["num_contexts"] = p.num_contexts;
  j["grammar_fingerprint"] = FingerprintHex(p.grammar_fingerprint);
  auto table = [](const std::vector<double>& flat, size_t rows, size_t cols) {
    nlohmann::json t = nlohmann::json::array();
    for (size_t r = 0; r < rows; ++r)
      t.push_back(std::vector<double>(flat.begin() + r * cols, flat.begin() + (r + 1) * cols));
    return t;
  };
  j["theta_ctx"] = table(p.theta_ctx, p.num_contexts, p.num_states);
  j["theta_emit"] = table(p.theta_emit, p.num_states, p.num_rules);
  return j.dump(1) + "\n";
}

ModelParams ParamsFromJson(const std::string& text, const std::string& source) {
  try {
    auto j = nlohmann::json::parse(text);
    if (j.at("format") != "qcfg-params" || j.at("version") != 1)
      throw DataError(source + ": not a version 1 params file");
    ModelParams p;
    p.num_states = j.at("num_states").get<int>();
    p.num_rules = j.at("num_rules").get<size_t>();
    p.num_contexts = j.at("num_contexts").get<size_t>();
    p.grammar_fingerprint = std::stoull(j.at("grammar_fingerprint").get<std::string>(), nullptr, 16);
    auto flatten = [&](const nlohmann::json& t, size_t rows, size_t cols, const char* name) {
      if (!t.is_array() || t.size() != rows)
        throw DataError(source + ": " + name + " has the wrong number of rows");
      std::vector<double> out;
      for (const auto& row : t) {
        if (!row.is_array() || row.size() != cols)
          throw DataError(source + ": " + name + " has the wrong number of columns");
        for (const auto& v : row) out.push_back(v.get<double>());
      }
      return out;
    };
    if (p.num_states < 1) throw DataError(source + ": num_states must be >= 1");
    p.theta_ctx = flatten(j.at("theta_ctx"), p.num_contexts, p.num_states, "theta_ctx");
    p.theta_emit = flatten(j.at("theta_emit"), p.num_states, p.num_rules, "theta_emit");
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(source + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw DataError(source + ": bad grammar_fingerprint");
  }
}

void SaveParams(const std::string& path, const ModelParams& params) {
  WriteFileOrThrow(path, ParamsToJson(params));
}

ModelParams LoadParams(const std::string& path) { return ParamsFromJson(ReadFileOrThrow(path), path); }

}  // namespace qcfg
