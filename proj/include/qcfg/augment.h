#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qcfg/corpus.h"
#include "qcfg/induction.h"
#include "qcfg/model.h"
#include "qcfg/output_cfg.h"

namespace qcfg {

// Replicates the smaller corpus ceil(larger / smaller) times, truncates it to
// the larger size and shuffles the union with the seed.
Corpus MixBalanced(const Corpus& original, const Corpus& synthetic, uint64_t seed = 0);

struct RelabelStats {
  size_t inputs = 0;
  size_t labeled = 0;
  size_t discarded_not_derivable = 0;
  size_t discarded_cfg = 0;
};

Corpus HardEmRelabel(const LatentModel& model, std::span<const Sequence> unlabeled,
                     const OutputCfg* output_cfg = nullptr, RelabelStats* stats = nullptr,
                     int workers = 0);

struct SemiSupervisedConfig {
  int num_states = 2;
  int dup_factor = 1;
  TrainConfig train;
  // Re-induce the grammar on labeled plus pseudo-labeled data before refitting.
  bool reinduce = false;
  InductionConfig induction;
  std::vector<Rule> seeds;
};

struct SemiSupervisedResult {
  Grammar grammar;
  ModelParams params;
  RelabelStats relabel;
  Corpus pseudo_labeled;
};

SemiSupervisedResult SemiSupervisedFit(const Grammar& grammar, const Corpus& labeled,
                                       std::span<const Sequence> unlabeled,
                                       const SemiSupervisedConfig& cfg,
                                       const OutputCfg* output_cfg = nullptr);

struct EvalReport {
  size_t total = 0;
  size_t correct = 0;
  size_t abstained = 0;
  size_t covered = 0;
  size_t covered_correct = 0;
  size_t uncovered = 0;
  size_t uncovered_correct = 0;

  double accuracy() const { return total ? static_cast<double>(correct) / total : 0.0; }
  double covered_accuracy() const {
    return covered ? static_cast<double>(covered_correct) / covered : 0.0;
  }
  double uncovered_accuracy() const {
    return uncovered ? static_cast<double>(uncovered_correct) / uncovered : 0.0;
  }
  std::string ToJson() const;
};

// nullopt predictions are abstentions. When coverage is given, covered[i]
// says whether gold input i is derivable; otherwise every non-abstained
// prediction counts as covered.
EvalReport ExactMatchEval(std::span<const std::optional<Sequence>> predictions, const Corpus& gold,
                          const std::vector<char>* coverage = nullptr);

// Viterbi predictions and input coverage for a corpus.
struct Predictions {
  std::vector<std::optional<Sequence>> outputs;
  std::vector<char> covered;
};
Predictions Predict(const LatentModel& model, const Corpus& corpus,
                    const OutputCfg* output_cfg = nullptr, int workers = 0);

}  // namespace qcfg
