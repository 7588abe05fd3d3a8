#include "qcfg/sampler.h"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <optional>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "qcfg/errors.h"
#include "qcfg/parallel.h"

namespace qcfg {

struct Sampler::Eligibility {
  std::vector<uint32_t> rules;
  std::vector<std::vector<CategorySet>> child_categories;  // per eligible rule, by index
};

struct Sampler::Cache {
  struct Hash {
    size_t operator()(const CategorySet& c) const { return c.Hash(); }
  };
  std::mutex mu;
  std::unordered_map<CategorySet, std::unique_ptr<Eligibility>, Hash> by_categories;
};

Sampler::Sampler(const LatentModel& model, const OutputCfg* output_cfg, SamplerConfig cfg)
    : model_(model), output_cfg_(output_cfg), cfg_(cfg), cache_(std::make_unique<Cache>()) {
  if (!(cfg_.temperature > 0)) throw std::invalid_argument("temperature must be positive");
  if (cfg_.max_depth < 1) throw std::invalid_argument("max_depth must be >= 1");
  if (cfg_.nt_bias_delta < 0) throw std::invalid_argument("nt_bias_delta must be non-negative");
  if (model_.grammar().empty()) throw std::invalid_argument("cannot sample from an empty grammar");
  const ModelParams& p = model_.params();
  const size_t R = p.num_rules, C = p.num_contexts;
  const int S = p.num_states;
  prob_.assign(C * R, 0.0);
  if (std::isinf(cfg_.temperature)) {
    std::fill(prob_.begin(), prob_.end(), 1.0 / static_cast<double>(R));
  } else {
    std::vector<double> emit(S * R);
    for (int s = 0; s < S; ++s) {
      double mx = -std::numeric_limits<double>::infinity();
      for (size_t r = 0; r < R; ++r) {
        double logit = p.emit(s, r);
        if (model_.layout().arity(r) > cfg_.nt_bias_threshold) logit += cfg_.nt_bias_delta;
        emit[s * R + r] = logit / cfg_.temperature;
        mx = std::max(mx, emit[s * R + r]);
      }
      double z = 0.0;
      for (size_t r = 0; r < R; ++r) z += std::exp(emit[s * R + r] - mx);
      for (size_t r = 0; r < R; ++r) emit[s * R + r] = std::exp(emit[s * R + r] - mx) / z;
    }
    const auto& t = model_.tables();
    for (size_t c = 0; c < C; ++c)
      for (int s = 0; s < S; ++s) {
        double ps = std::exp(t.ctx[c * S + s]);
        for (size_t r = 0; r < R; ++r) prob_[c * R + r] += ps * emit[s * R + r];
      }
  }
  cdf_.resize(prob_.size());
  for (size_t c = 0; c < C; ++c) {
    double acc = 0.0;
    for (size_t r = 0; r < R; ++r) cdf_[c * R + r] = acc += prob_[c * R + r];
  }
}

Sampler::~Sampler() = default;

std::vector<double> Sampler::Distribution(uint32_t context) const {
  const size_t R = model_.params().num_rules;
  if (context >= model_.params().num_contexts) throw LookupError("unknown context");
  return {prob_.begin() + context * R, prob_.begin() + (context + 1) * R};
}

const Sampler::Eligibility& Sampler::EligibleFor(const CategorySet& cats) const {
  {
    std::lock_guard lock(cache_->mu);
    auto it = cache_->by_categories.find(cats);
    if (it != cache_->by_categories.end()) return *it->second;
  }
  auto e = std::make_unique<Eligibility>();
  const auto& rules = model_.grammar().rules();
  for (uint32_t r = 0; r < rules.size(); ++r) {
    auto kids = CompatibleCategories(*output_cfg_, rules[r].output, cats);
    if (!kids) continue;
    e->rules.push_back(r);
    e->child_categories.push_back(std::move(*kids));
  }
  std::lock_guard lock(cache_->mu);
  auto [it, inserted] = cache_->by_categories.try_emplace(cats, std::move(e));
  return *it->second;
}

SampleStatus Sampler::Expand(Rng& rng, uint32_t context, const CategorySet* cats, int depth,
                             Derivation* out) const {
  if (depth > cfg_.max_depth) return SampleStatus::kDepthReject;
  const size_t R = model_.params().num_rules;
  const double* prob = &prob_[context * R];
  uint32_t rule = 0;
  const std::vector<CategorySet>* child_cats = nullptr;
  if (!output_cfg_) {
    const double* cdf = &cdf_[context * R];
    double u = rng.Uniform() * cdf[R - 1];
    rule = static_cast<uint32_t>(std::upper_bound(cdf, cdf + R, u) - cdf);
    if (rule >= R) rule = static_cast<uint32_t>(R - 1);
  } else {
    const Eligibility& e = EligibleFor(*cats);
    double total = 0.0;
    for (uint32_t r : e.rules) total += prob[r];
    if (e.rules.empty() || total <= 0.0) return SampleStatus::kDeadEnd;
    double u = rng.Uniform() * total;
    size_t pick = e.rules.size() - 1;
    for (size_t k = 0; k < e.rules.size(); ++k) {
      u -= prob[e.rules[k]];
      if (u < 0) {
        pick = k;
        break;
      }
    }
    rule = e.rules[pick];
    child_cats = &e.child_categories[pick];
  }
  const Rule& r = model_.grammar().rule(rule);
  out->rule = r;
  out->children.assign(r.Arity(), Derivation());
  for (int i = 1; i <= r.Arity(); ++i) {
    const CategorySet* kid = child_cats ? &(*child_cats)[i] : nullptr;
    auto status = Expand(rng, model_.layout().Context(rule, i), kid, depth + 1, &out->children[i - 1]);
    if (status != SampleStatus::kAccepted) return status;
  }
  return SampleStatus::kAccepted;
}

SampleStatus Sampler::SampleDerivation(Rng& rng, Derivation* out) const {
  std::optional<CategorySet> root;
  if (output_cfg_) root = CategorySet::Single(output_cfg_->num_categories(), output_cfg_->start());
  auto status = Expand(rng, kRootContext, root ? &*root : nullptr, 1, out);
  if (status != SampleStatus::kAccepted) return status;
  if (output_cfg_ && !CfgAccepts(*output_cfg_, DerivationYield(*out).output))
    return SampleStatus::kCfgReject;
  return SampleStatus::kAccepted;
}

Corpus SampleDataset(const LatentModel& model, const OutputCfg* output_cfg,
                     const SamplerConfig& cfg, SampleStats* stats_out) {
  Sampler sampler(model, output_cfg, cfg);
  Corpus corpus;
  corpus.name = "synthetic";
  corpus.examples.resize(cfg.count);
  SampleStats stats;
  struct Slot {
    size_t attempts = 0, depth = 0, dead = 0, cfg = 0;
    bool done = false;
  };
  const size_t chunk = 1024;
  const size_t per_sample_cap =
      std::max<size_t>(cfg.acceptance_window, static_cast<size_t>(1.0 / cfg.min_acceptance_rate));
  auto abort = [&](const std::string& why) {
    std::ostringstream msg;
    msg << "sampler aborted: " << why << " (attempts " << stats.attempts << ", accepted "
        << stats.accepted << ", depth rejects " << stats.depth_rejects << ", dead ends "
        << stats.dead_ends << ", cfg rejects " << stats.cfg_rejects << ", max_depth "
        << cfg.max_depth << ")";
    throw CapacityError(msg.str());
  };
  for (size_t begin = 0; begin < cfg.count; begin += chunk) {
    size_t end = std::min(cfg.count, begin + chunk);
    std::vector<Slot> slots(end - begin);
    ParallelFor(end - begin, cfg.workers, [&](size_t k) {
      size_t index = begin + k;
      Slot& s = slots[k];
      Derivation z;
      while (s.attempts < per_sample_cap) {
        Rng rng(MixSeed(MixSeed(cfg.rng_seed, index), s.attempts));
        ++s.attempts;
        auto status = sampler.SampleDerivation(rng, &z);
        if (status == SampleStatus::kAccepted) {
          corpus.examples[index] = DerivationYield(z);
          s.done = true;
          return;
        }
        if (status == SampleStatus::kDepthReject) ++s.depth;
        if (status == SampleStatus::kDeadEnd) ++s.dead;
        if (status == SampleStatus::kCfgReject) ++s.cfg;
      }
    });
    bool stuck = false;
    for (const Slot& s : slots) {
      stats.attempts += s.attempts;
      stats.accepted += s.done;
      stats.depth_rejects += s.depth;
      stats.dead_ends += s.dead;
      stats.cfg_rejects += s.cfg;
      stuck |= !s.done;
    }
    if (stuck) abort("a sample exhausted its attempt budget");
    if (stats.attempts >= cfg.acceptance_window && stats.acceptance_rate() < cfg.min_acceptance_rate)
      abort("acceptance rate below floor");
  }
  if (cfg.dedup) {
    std::unordered_set<ExamplePair, ExamplePairHash> seen;
    std::vector<ExamplePair> kept;
    for (auto& e : corpus.examples)
      if (seen.insert(e).second) kept.push_back(std::move(e));
    stats.duplicates_removed = corpus.examples.size() - kept.size();
    corpus.examples = std::move(kept);
  }
  if (stats_out) *stats_out = stats;
  return corpus;
}

}  // namespace qcfg
