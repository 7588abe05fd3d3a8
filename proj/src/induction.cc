#include "qcfg/induction.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "qcfg/errors.h"
#include "qcfg/parallel.h"
#include "qcfg/unify.h"

namespace qcfg {

InductionConfig ScanInductionConfig() {
  InductionConfig c;
  c.k_alpha = 0;
  c.k_beta = 100;
  c.terminal_weight = 4;
  c.partitions = 16;
  return c;
}

InductionConfig CogsInductionConfig() {
  InductionConfig c;
  c.k_alpha = 1;
  c.k_beta = 5;
  c.terminal_weight = 8;
  c.partitions = 1;
  return c;
}

InductionConfig GeoQueryInductionConfig() {
  InductionConfig c;
  c.k_alpha = 4;
  c.k_beta = 16;
  c.terminal_weight = 8;
  c.partitions = 1;
  return c;
}

InductionConfig SmcalflowInductionConfig() {
  InductionConfig c = GeoQueryInductionConfig();
  return c;
}

size_t ResolvePhatSampleSize(const InductionConfig& cfg, size_t corpus_size) {
  if (cfg.sample_size_for_phat == kAutoPhatSample) return corpus_size <= 10000 ? 0 : 2000;
  if (cfg.sample_size_for_phat < 0)
    throw std::invalid_argument("sample_size_for_phat must be exact, auto or positive");
  return static_cast<size_t>(cfg.sample_size_for_phat);
}

std::vector<Rule> SeedRulesSharedTokens(const Corpus& corpus) {
  std::unordered_set<TokenId> shared;
  for (const auto& e : corpus.examples) {
    std::unordered_set<TokenId> in;
    for (Symbol s : e.input) in.insert(s.token());
    for (Symbol s : e.output)
      if (in.count(s.token())) shared.insert(s.token());
  }
  std::vector<std::string> names;
  for (TokenId t : shared) names.push_back(TokenText(t));
  std::sort(names.begin(), names.end());
  std::vector<Rule> seeds;
  for (const auto& n : names) seeds.emplace_back(Sequence{Symbol::Terminal(n)}, Sequence{Symbol::Terminal(n)});
  return seeds;
}

std::vector<std::vector<size_t>> PartitionByLength(const Corpus& corpus, int partitions) {
  if (partitions < 1) throw std::invalid_argument("partitions must be >= 1");
  std::vector<size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    const auto& ea = corpus.examples[a];
    const auto& eb = corpus.examples[b];
    if (ea.input.size() != eb.input.size()) return ea.input.size() < eb.input.size();
    return ea.output.size() < eb.output.size();
  });
  std::vector<std::vector<size_t>> parts(partitions);
  size_t n = order.size();
  for (int p = 0; p < partitions; ++p) {
    size_t begin = n * p / partitions, end = n * (p + 1) / partitions;
    parts[p].assign(order.begin() + begin, order.begin() + end);
  }
  return parts;
}

Rule WholeExampleRule(const ExamplePair& example) { return Rule(example.input, example.output); }

Grammar InitGrammar(const Corpus& corpus, std::span<const Rule> seeds, const InductionConfig& cfg) {
  Grammar g(GrammarConfig{cfg.max_nonterminals, cfg.allow_repeated_indices});
  for (const Rule& s : seeds) g.Add(s);
  auto parts = PartitionByLength(corpus, cfg.partitions);
  for (size_t i : parts[0]) g.Add(WholeExampleRule(corpus.examples[i]));
  return g;
}

double RuleScore(const Rule& rule, const OccurrenceStats& stats, const InductionConfig& cfg) {
  auto size = [&](const Sequence& s) {
    return cfg.nonterminal_weight * CountNonterminals(s) + cfg.terminal_weight * CountTerminals(s);
  };
  double floor = 1.0 / (2.0 * static_cast<double>(std::max<size_t>(stats.num_examples(), 1)));
  double c = 0.0;
  if (cfg.k_alpha != 0.0) {
    double p = Phat(rule.input, Side::kInput, rule.output, Side::kOutput, stats);
    c += cfg.k_alpha * std::log(std::max(p, floor));
  }
  if (cfg.k_beta != 0.0) {
    double p = Phat(rule.output, Side::kOutput, rule.input, Side::kInput, stats);
    c += cfg.k_beta * std::log(std::max(p, floor));
  }
  return size(rule.input) + size(rule.output) - c;
}

double Objective(const Grammar& grammar, const OccurrenceStats& stats, const InductionConfig& cfg) {
  double total = 0.0;
  for (const Rule& r : grammar.rules()) total += RuleScore(r, stats, cfg);
  return total;
}

bool RemovalCheck(const Grammar& grammar, const Rule& rule, const Corpus& corpus,
                  ParserOptions options) {
  auto id = grammar.Find(rule);
  if (!id) throw std::invalid_argument("removal_check: rule not in grammar: " + rule.ToString());
  ChartParser parser(grammar, options);
  parser.SetEnabled(static_cast<uint32_t>(*id), false);
  for (const auto& e : corpus.examples)
    if (!parser.CanDerive(e)) return false;
  return true;
}

namespace {

struct Proposal {
  enum Kind { kNone, kRemove, kAction } kind = kNone;
  Rule add;
  std::string add_key;
  std::vector<uint32_t> remove;
  double delta = 0.0;
};

std::vector<uint32_t> SortedWith(std::vector<uint32_t> ids, uint32_t extra) {
  ids.push_back(extra);
  std::sort(ids.begin(), ids.end());
  return ids;
}

class Inducer {
 public:
  Inducer(const Corpus& corpus, const OutputCfg* output_cfg, const InductionConfig& cfg)
      : corpus_(corpus),
        output_cfg_(output_cfg),
        cfg_(cfg),
        stats_(corpus, ResolvePhatSampleSize(cfg, corpus.size()), cfg.rng_seed),
        full_index_(corpus, AllRows(corpus.size())),
        active_(corpus.size()),
        canonical_row_(corpus.size()) {
    std::unordered_map<ExamplePair, size_t, ExamplePairHash> first;
    for (size_t i = 0; i < corpus.size(); ++i)
      canonical_row_[i] = first.try_emplace(corpus.examples[i], i).first->second;
  }

  const std::vector<Rule>& rules() const { return rules_; }

  void AddRule(const Rule& r) {
    if (auto err = ValidateRule(r, cfg_.max_nonterminals, cfg_.allow_repeated_indices))
      throw DataError("invalid rule '" + r.ToString() + "': " + *err);
    if (r.IsIdentity()) throw DataError("identity rule is not allowed");
    Rule c = Canonicalize(r);
    if (rule_set_.insert(c).second) rules_.push_back(std::move(c));
  }

  void Activate(const std::vector<size_t>& rows) {
    for (size_t row : rows) {
      active_.Set(row);
      AddRule(WholeExampleRule(corpus_.examples[row]));
      ++num_active_;
    }
  }

  size_t num_active() const { return num_active_; }

  void SetScore(const Rule& r, double s) { scores_[r] = s; }

  double Score(const Rule& r) {
    {
      std::lock_guard lock(mu_);
      auto it = scores_.find(r);
      if (it != scores_.end()) return it->second;
    }
    double s = RuleScore(r, stats_, cfg_);
    std::lock_guard lock(mu_);
    scores_.emplace(r, s);
    return s;
  }

  double ObjectiveValue() {
    double total = 0.0;
    for (const Rule& r : rules_) total += Score(r);
    return total;
  }

  // One greedy iteration. Returns whether the grammar changed.
  bool Step(IterationRecord* record);

  // Every candidate action for rule c of the current grammar.
  std::vector<Action> AllActions(size_t c);

  void VerifyCoverage() const {
    ChartParser parser(std::span<const Rule>(rules_), cfg_.parser);
    for (size_t row = 0; row < corpus_.size(); ++row) {
      if (!active_.Test(row) || canonical_row_[row] != row) continue;
      if (!parser.CanDerive(corpus_.examples[row]))
        throw std::logic_error("coverage invariant violated for example " + std::to_string(row) +
                               ": " + ToString(corpus_.examples[row].input));
    }
  }

 private:
  static std::vector<size_t> AllRows(size_t n) {
    std::vector<size_t> rows(n);
    std::iota(rows.begin(), rows.end(), size_t{0});
    return rows;
  }

  struct Snapshot {
    const std::vector<Rule>* rules;
    ChartParser* parser;
    std::unordered_map<TokenId, std::vector<uint32_t>> postings;
  };

  bool CfgValid(const Rule& r) {
    if (!output_cfg_) return true;
    {
      std::lock_guard lock(mu_);
      auto it = cfg_valid_.find(r.output);
      if (it != cfg_valid_.end()) return it->second;
    }
    bool ok = RuleOutputValid(*output_cfg_, r.output, cfg_.consistent_cfg_categories);
    std::lock_guard lock(mu_);
    cfg_valid_.emplace(r.output, ok);
    return ok;
  }

  // Every activated example that could use the rule stays derivable with
  // the filter applied.
  bool CorpusRemovable(const ChartParser& parser, const Rule& rule, const RuleFilter& filter) {
    Bitset rows = full_index_.Occurrences(rule.input, Side::kInput);
    rows &= full_index_.Occurrences(rule.output, Side::kOutput);
    rows &= active_;
    std::optional<size_t> witness;
    {
      std::lock_guard lock(mu_);
      auto it = witness_.find(rule);
      if (it != witness_.end()) witness = it->second;
    }
    auto derivable = [&](size_t row) {
      const auto& e = corpus_.examples[row];
      return parser.CanDerive(e.input, e.output, filter);
    };
    if (witness && rows.Test(*witness) && !derivable(*witness)) return false;
    bool ok = true;
    std::optional<size_t> failed;
    rows.ForEach([&](size_t row) {
      if (!ok || canonical_row_[row] != row || row == witness) return;
      if (!derivable(row)) {
        ok = false;
        failed = row;
      }
    });
    if (failed) {
      std::lock_guard lock(mu_);
      witness_[rule] = *failed;
    }
    return ok;
  }

  std::vector<Rule> UnifyCandidates(const Snapshot& snap, size_t c) {
    const auto& rules = *snap.rules;
    std::vector<Rule> out;
    std::unordered_set<Rule, RuleHash> seen;
    for (size_t o = 0; o < rules.size(); ++o) {
      if (o == c) continue;
      for (Rule& add : Unify(rules[c], rules[o], cfg_.max_nonterminals)) {
        if (add.IsIdentity() || rule_set_.count(add)) continue;
        if (ValidateRule(add, cfg_.max_nonterminals, cfg_.allow_repeated_indices)) continue;
        if (!seen.insert(add).second) continue;
        if (!CfgValid(add)) continue;
        out.push_back(std::move(add));
      }
    }
    return out;
  }

  // Rules (other than c) in which add's two sides both occur.
  std::vector<uint32_t> Related(const Snapshot& snap, size_t c, const Rule& add) {
    const auto& rules = *snap.rules;
    std::vector<uint32_t> pool;
    bool constrained = false;
    for (Symbol s : add.input) {
      if (!s.is_terminal()) continue;
      auto it = snap.postings.find(s.token());
      if (it == snap.postings.end()) return {};
      if (!constrained || it->second.size() < pool.size()) {
        pool = it->second;
        constrained = true;
      }
    }
    if (!constrained) {
      pool.resize(rules.size());
      std::iota(pool.begin(), pool.end(), 0u);
    }
    std::vector<uint32_t> out;
    for (uint32_t o : pool) {
      if (o == c) continue;
      const Rule& r = rules[o];
      if (OccursIn(add.input, r.input, true) && OccursIn(add.output, r.output, true))
        out.push_back(o);
    }
    return out;
  }

  Action Evaluate(const Snapshot& snap, size_t c, const Rule& add,
                  const std::vector<uint32_t>& related, std::vector<uint32_t>* removed_ids) {
    const auto& rules = *snap.rules;
    std::vector<uint32_t> removed{static_cast<uint32_t>(c)};
    for (uint32_t o : related) {
      auto disabled = SortedWith(removed, o);
      RuleFilter filter{disabled, std::span<const Rule>(&add, 1)};
      if (snap.parser->DerivesRule(rules[o], filter)) removed.push_back(o);
    }
    Action a;
    a.rule_to_add = add;
    a.objective_delta = Score(add);
    for (uint32_t id : removed) {
      a.rules_to_remove.push_back(rules[id]);
      a.objective_delta -= Score(rules[id]);
    }
    if (removed_ids) *removed_ids = std::move(removed);
    return a;
  }

  Proposal Propose(const Snapshot& snap, size_t c) {
    const auto& rules = *snap.rules;
    const Rule& rc = rules[c];
    Proposal p;
    uint32_t self = static_cast<uint32_t>(c);
    RuleFilter without{std::span<const uint32_t>(&self, 1), {}};
    if (snap.parser->DerivesRule(rc, without) || CorpusRemovable(*snap.parser, rc, without)) {
      p.kind = Proposal::kRemove;
      return p;
    }
    struct Candidate {
      Rule add;
      std::vector<uint32_t> related;
      double optimistic;
    };
    std::vector<Candidate> cands;
    double rc_score = Score(rc);
    for (Rule& add : UnifyCandidates(snap, c)) {
      double add_score = Score(add);
      double optimistic = add_score - rc_score;
      if (optimistic >= 0) {
        // Only extra removals could make it improve; bound them first.
        auto related = Related(snap, c, add);
        for (uint32_t o : related) optimistic -= Score(rules[o]);
        if (optimistic >= 0) continue;
        cands.push_back(Candidate{std::move(add), std::move(related), optimistic});
      } else {
        auto related = Related(snap, c, add);
        for (uint32_t o : related) optimistic -= Score(rules[o]);
        cands.push_back(Candidate{std::move(add), std::move(related), optimistic});
      }
    }
    std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
      return a.optimistic < b.optimistic;
    });
    double best = 0.0;
    for (auto& cand : cands) {
      if (cand.optimistic > best) break;
      std::vector<uint32_t> removed;
      Action a = Evaluate(snap, c, cand.add, cand.related, &removed);
      if (a.objective_delta >= 0) continue;
      std::string key = cand.add.ToString();
      if (p.kind == Proposal::kNone || a.objective_delta < best ||
          (a.objective_delta == best && key < p.add_key)) {
        p.kind = Proposal::kAction;
        p.add = cand.add;
        p.add_key = std::move(key);
        p.remove = std::move(removed);
        p.delta = a.objective_delta;
        best = a.objective_delta;
      }
    }
    return p;
  }

  Snapshot MakeSnapshot(const std::vector<Rule>& rules, ChartParser* parser) const {
    Snapshot snap{&rules, parser, {}};
    for (uint32_t id = 0; id < rules.size(); ++id) {
      std::vector<TokenId> toks;
      for (Symbol s : rules[id].input)
        if (s.is_terminal()) toks.push_back(s.token());
      std::sort(toks.begin(), toks.end());
      toks.erase(std::unique(toks.begin(), toks.end()), toks.end());
      for (TokenId t : toks) snap.postings[t].push_back(id);
    }
    return snap;
  }

  const Corpus& corpus_;
  const OutputCfg* output_cfg_;
  InductionConfig cfg_;
  OccurrenceStats stats_;
  OccurrenceIndex full_index_;
  Bitset active_;
  std::vector<size_t> canonical_row_;
  size_t num_active_ = 0;
  std::vector<Rule> rules_;
  std::unordered_set<Rule, RuleHash> rule_set_;

  std::mutex mu_;
  std::unordered_map<Rule, double, RuleHash> scores_;
  std::unordered_map<Sequence, bool, SequenceHash> cfg_valid_;
  std::unordered_map<Rule, size_t, RuleHash> witness_;
};

bool Inducer::Step(IterationRecord* record) {
  const std::vector<Rule> snapshot = rules_;
  ChartParser parser(std::span<const Rule>(snapshot), cfg_.parser);
  Snapshot snap = MakeSnapshot(snapshot, &parser);
  const size_t n = snapshot.size();

  std::vector<Proposal> proposals(n);
  ParallelFor(n, cfg_.workers, [&](size_t c) { proposals[c] = Propose(snap, c); });

  // Serial phase: every removal is re-verified against the current state,
  // which keeps all activated examples derivable.
  std::vector<char> removed(n, 0);
  std::vector<Rule> added;
  for (size_t c = 0; c < n; ++c) {
    if (proposals[c].kind != Proposal::kRemove) continue;
    uint32_t self = static_cast<uint32_t>(c);
    RuleFilter without{std::span<const uint32_t>(&self, 1), {}};
    if (parser.DerivesRule(snapshot[c], without) ||
        CorpusRemovable(parser, snapshot[c], without)) {
      parser.SetEnabled(self, false);
      removed[c] = 1;
      ++record->plain_removals;
      record->removed.push_back(snapshot[c].ToString());
    }
  }

  std::vector<size_t> order;
  for (size_t c = 0; c < n; ++c)
    if (proposals[c].kind == Proposal::kAction) order.push_back(c);
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    if (proposals[a].delta != proposals[b].delta) return proposals[a].delta < proposals[b].delta;
    return proposals[a].add_key < proposals[b].add_key;
  });
  std::vector<char> claimed(n, 0);
  std::unordered_set<Rule, RuleHash> claimed_adds;
  for (size_t c : order) {
    const Proposal& p = proposals[c];
    if (claimed_adds.count(p.add)) continue;
    bool conflict = false;
    for (uint32_t id : p.remove) conflict |= claimed[id] || removed[id];
    if (conflict) continue;
    claimed_adds.insert(p.add);
    for (uint32_t id : p.remove) claimed[id] = 1;

    uint32_t new_id = parser.AddRule(p.add);
    std::vector<uint32_t> done;
    double delta = Score(p.add);
    for (uint32_t id : p.remove) {
      RuleFilter without{std::span<const uint32_t>(&id, 1), {}};
      if (!parser.DerivesRule(snapshot[id], without)) continue;
      parser.SetEnabled(id, false);
      done.push_back(id);
      delta -= Score(snapshot[id]);
    }
    if (done.empty() || delta >= 0) {
      for (uint32_t id : done) parser.SetEnabled(id, true);
      parser.SetEnabled(new_id, false);
      continue;
    }
    for (uint32_t id : done) {
      removed[id] = 1;
      record->removed.push_back(snapshot[id].ToString());
    }
    added.push_back(p.add);
    record->added.push_back(p.add.ToString());
    ++record->actions;
  }

  bool changed = !added.empty() || std::any_of(removed.begin(), removed.end(), [](char r) { return r; });
  if (changed) {
    std::vector<Rule> next;
    for (size_t c = 0; c < n; ++c)
      if (!removed[c]) next.push_back(snapshot[c]);
    for (const Rule& r : added) next.push_back(r);
    rules_ = std::move(next);
    rule_set_.clear();
    rule_set_.insert(rules_.begin(), rules_.end());
  }
  if (cfg_.verify_coverage) VerifyCoverage();
  return changed;
}

std::vector<Action> Inducer::AllActions(size_t c) {
  const std::vector<Rule> snapshot = rules_;
  ChartParser parser(std::span<const Rule>(snapshot), cfg_.parser);
  Snapshot snap = MakeSnapshot(snapshot, &parser);
  std::vector<Action> out;
  for (const Rule& add : UnifyCandidates(snap, c))
    out.push_back(Evaluate(snap, c, add, Related(snap, c, add), nullptr));
  return out;
}

}  // namespace

std::vector<Action> CandidateActions(const Grammar& grammar, const Rule& r_c, const Corpus& corpus,
                                     const OutputCfg* output_cfg, const OccurrenceStats& stats,
                                     const InductionConfig& cfg) {
  auto id = grammar.Find(r_c);
  if (!id) throw std::invalid_argument("candidate_actions: rule not in grammar: " + r_c.ToString());
  InductionConfig local = cfg;
  local.max_nonterminals = grammar.config().max_nonterminals;
  local.allow_repeated_indices = grammar.config().allow_repeated_indices;
  Inducer inducer(corpus, output_cfg, local);
  for (const Rule& r : grammar.rules()) inducer.AddRule(r);
  // Scores come from the caller's statistics.
  for (const Rule& r : grammar.rules()) inducer.SetScore(r, RuleScore(r, stats, local));
  auto actions = inducer.AllActions(*id);
  for (auto& a : actions) {
    a.objective_delta = RuleScore(a.rule_to_add, stats, local);
    for (const Rule& r : a.rules_to_remove) a.objective_delta -= RuleScore(r, stats, local);
  }
  return actions;
}

InductionResult Induce(const Corpus& corpus, std::span<const Rule> seeds,
                       const OutputCfg* output_cfg, const InductionConfig& cfg,
                       const IterationObserver& observer) {
  if (cfg.max_steps < 1) throw std::invalid_argument("max_steps must be >= 1");
  Inducer inducer(corpus, output_cfg, cfg);
  for (const Rule& s : seeds) inducer.AddRule(s);
  InductionResult result;
  auto parts = PartitionByLength(corpus, cfg.partitions);
  auto to_grammar = [&] {
    Grammar g(GrammarConfig{cfg.max_nonterminals, cfg.allow_repeated_indices});
    for (const Rule& r : inducer.rules()) g.Add(r);
    return g;
  };
  for (int p = 0; p < cfg.partitions; ++p) {
    inducer.Activate(parts[p]);
    bool converged = false;
    for (int step = 0; step < cfg.max_steps; ++step) {
      IterationRecord rec;
      rec.partition = p;
      rec.step = step;
      bool changed = inducer.Step(&rec);
      rec.objective = inducer.ObjectiveValue();
      rec.grammar_size = inducer.rules().size();
      rec.active_examples = inducer.num_active();
      result.iterations.push_back(rec);
      if (observer) observer(rec, to_grammar());
      if (!changed) {
        converged = true;
        break;
      }
    }
    if (!converged) result.step_budget_exhausted = true;
  }
  result.grammar = to_grammar();
  result.objective = inducer.ObjectiveValue();
  return result;
}

}  // namespace qcfg
