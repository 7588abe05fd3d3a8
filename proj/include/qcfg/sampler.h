#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <vector>

#include "qcfg/corpus.h"
#include "qcfg/derivation.h"
#include "qcfg/model.h"
#include "qcfg/output_cfg.h"
#include "qcfg/rng.h"

namespace qcfg {

inline constexpr double kInfiniteTemperature = std::numeric_limits<double>::infinity();

struct SamplerConfig {
  size_t count = 100000;
  // Divides the emission logits; infinity samples uniformly over eligible rules.
  double temperature = 1.0;
  // Added to the emission logits of rules with more than nt_bias_threshold
  // nonterminals, before the temperature.
  double nt_bias_delta = 0.0;
  int nt_bias_threshold = 1;
  // Maximum derivation height; taller samples are rejected.
  int max_depth = 20;
  uint64_t rng_seed = 0;
  bool dedup = false;
  int workers = 0;
  // Abort when fewer than this fraction of attempts are accepted, checked
  // once at least acceptance_window attempts were made.
  double min_acceptance_rate = 0.001;
  size_t acceptance_window = 10000;
};

enum class SampleStatus { kAccepted, kDepthReject, kDeadEnd, kCfgReject };

struct SampleStats {
  size_t attempts = 0;
  size_t accepted = 0;
  size_t depth_rejects = 0;
  size_t dead_ends = 0;
  size_t cfg_rejects = 0;
  size_t duplicates_removed = 0;
  double acceptance_rate() const {
    return attempts ? static_cast<double>(accepted) / static_cast<double>(attempts) : 0.0;
  }
};

class Sampler {
 public:
  Sampler(const LatentModel& model, const OutputCfg* output_cfg, SamplerConfig cfg);
  ~Sampler();

  const SamplerConfig& config() const { return cfg_; }

  // Adjusted expansion distribution over all rules for a context, ignoring
  // output-CFG eligibility.
  std::vector<double> Distribution(uint32_t context) const;

  // One forward sample. On kAccepted, *out holds the derivation.
  SampleStatus SampleDerivation(Rng& rng, Derivation* out) const;

  struct Eligibility;

 private:
  SampleStatus Expand(Rng& rng, uint32_t context, const CategorySet* cats, int depth,
                      Derivation* out) const;
  const Eligibility& EligibleFor(const CategorySet& cats) const;

  const LatentModel& model_;
  const OutputCfg* output_cfg_;
  SamplerConfig cfg_;
  std::vector<double> prob_;  // [context][rule]
  std::vector<double> cdf_;   // [context][rule]
  struct Cache;
  std::unique_ptr<Cache> cache_;
};

// Draws cfg.count accepted samples. Sample i uses the RNG stream derived from
// (seed, i, attempt), so output does not depend on the worker count. Throws
// CapacityError when the acceptance rate falls below the floor.
Corpus SampleDataset(const LatentModel& model, const OutputCfg* output_cfg,
                     const SamplerConfig& cfg, SampleStats* stats = nullptr);

}  // namespace qcfg
