#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qcfg/induction.h"
#include "qcfg/model.h"
#include "qcfg/sampler.h"

namespace qcfg {

struct RunConfig {
  uint64_t seed = 0;
  int workers = 0;
  std::string output_dir;

  std::string train_path;
  std::string test_path;
  std::string unlabeled_path;
  std::string output_cfg_path;

  InductionConfig induction;
  bool shared_token_seeds = true;
  std::string seed_rules_path;

  int num_states = 2;
  TrainConfig train;
  std::vector<double> learning_rates;  // empty: train.learning_rate only
  int restarts = 1;

  SamplerConfig sampler;
  bool augment = true;
  int dup_factor = 1;
  bool reinduce = false;
};

// JSON run configuration. Required keys: "seed", "output_dir" and
// "data.train". Unknown keys, wrong types and missing required keys raise
// UsageError naming the key. Per-stage seeds default to values derived from
// "seed" and can be set explicitly.
RunConfig ParseRunConfig(const std::string& text, const std::string& source);
RunConfig LoadRunConfig(const std::string& path);

// The "induction" object of a run configuration, also accepted on its own by
// `induce --config`.
struct InductionSection {
  InductionConfig config;
  bool shared_token_seeds = true;
  std::string seed_rules_path;
};
InductionSection ParseInductionSection(const std::string& text, const std::string& source);
InductionSection LoadInductionSection(const std::string& path);

// Named induction hyperparameter presets: default, scan, cogs, geoquery,
// smcalflow. UsageError for other names.
InductionConfig InductionPreset(const std::string& name);

}  // namespace qcfg
