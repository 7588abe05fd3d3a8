#include "qcfg/augment.h"

#include <algorithm>
#include <stdexcept>

#include "json.hpp"
#include "qcfg/parallel.h"
#include "qcfg/rng.h"

namespace qcfg {

Corpus MixBalanced(const Corpus& original, const Corpus& synthetic, uint64_t seed) {
  if (original.examples.empty() || synthetic.examples.empty())
    throw std::invalid_argument("mix_balanced needs non-empty original and synthetic corpora");
  const bool original_smaller = original.size() < synthetic.size();
  const Corpus& small = original_smaller ? original : synthetic;
  const Corpus& large = original_smaller ? synthetic : original;
  const size_t copies = (large.size() + small.size() - 1) / small.size();
  Corpus out;
  out.name = "augmented";
  out.examples.reserve(2 * large.size());
  for (size_t c = 0; c < copies && out.examples.size() < large.size(); ++c)
    for (const auto& e : small.examples) {
      if (out.examples.size() == large.size()) break;
      out.examples.push_back(e);
    }
  out.examples.insert(out.examples.end(), large.examples.begin(), large.examples.end());
  Rng rng(seed);
  std::shuffle(out.examples.begin(), out.examples.end(), rng.engine());
  return out;
}

Corpus HardEmRelabel(const LatentModel& model, std::span<const Sequence> unlabeled,
                     const OutputCfg* output_cfg, RelabelStats* stats, int workers) {
  std::vector<std::optional<ViterbiResult>> best(unlabeled.size());
  std::vector<char> derivable(unlabeled.size(), 0);
  ParallelFor(unlabeled.size(), workers, [&](size_t i) {
    best[i] = model.ViterbiParse(unlabeled[i]);
    derivable[i] = best[i].has_value();
    if (best[i] && output_cfg && !CfgAccepts(*output_cfg, best[i]->output)) best[i].reset();
  });
  RelabelStats s;
  s.inputs = unlabeled.size();
  Corpus out;
  out.name = "pseudo_labeled";
  for (size_t i = 0; i < unlabeled.size(); ++i) {
    if (!derivable[i]) {
      ++s.discarded_not_derivable;
    } else if (!best[i]) {
      ++s.discarded_cfg;
    } else {
      out.examples.push_back(ExamplePair{unlabeled[i], best[i]->output});
      ++s.labeled;
    }
  }
  if (stats) *stats = s;
  return out;
}

SemiSupervisedResult SemiSupervisedFit(const Grammar& grammar, const Corpus& labeled,
                                       std::span<const Sequence> unlabeled,
                                       const SemiSupervisedConfig& cfg,
                                       const OutputCfg* output_cfg) {
  if (cfg.dup_factor < 1) throw std::invalid_argument("dup_factor must be >= 1");
  SemiSupervisedResult result;
  result.grammar = grammar;
  result.params = Fit(grammar, labeled, cfg.num_states, cfg.train);
  if (unlabeled.empty()) return result;
  LatentModel model(grammar, result.params, cfg.train.parser);
  result.pseudo_labeled = HardEmRelabel(model, unlabeled, output_cfg, &result.relabel, cfg.train.workers);
  Corpus combined = labeled;
  for (int d = 0; d < cfg.dup_factor; ++d)
    combined.examples.insert(combined.examples.end(), result.pseudo_labeled.examples.begin(),
                             result.pseudo_labeled.examples.end());
  if (cfg.reinduce)
    result.grammar = Induce(combined, cfg.seeds, output_cfg, cfg.induction).grammar;
  result.params = Fit(result.grammar, combined, cfg.num_states, cfg.train);
  return result;
}

std::string EvalReport::ToJson() const {
  nlohmann::ordered_json j;
  j["total"] = total;
  j["correct"] = correct;
  j["accuracy"] = accuracy();
  j["abstained"] = abstained;
  j["covered"] = covered;
  j["covered_correct"] = covered_correct;
  j["covered_accuracy"] = covered_accuracy();
  j["uncovered"] = uncovered;
  j["uncovered_correct"] = uncovered_correct;
  j["uncovered_accuracy"] = uncovered_accuracy();
  return j.dump(2) + "\n";
}

EvalReport ExactMatchEval(std::span<const std::optional<Sequence>> predictions, const Corpus& gold,
                          const std::vector<char>* coverage) {
  if (predictions.size() != gold.size())
    throw std::invalid_argument("exact_match_eval: " + std::to_string(predictions.size()) +
                                " predictions for " + std::to_string(gold.size()) + " examples");
  if (coverage && coverage->size() != gold.size())
    throw std::invalid_argument("exact_match_eval: coverage size mismatch");
  EvalReport r;
  r.total = gold.size();
  for (size_t i = 0; i < gold.size(); ++i) {
    bool ok = predictions[i] && *predictions[i] == gold.examples[i].output;
    bool covered = coverage ? (*coverage)[i] != 0 : predictions[i].has_value();
    r.correct += ok;
    r.abstained += !predictions[i];
    if (covered) {
      ++r.covered;
      r.covered_correct += ok;
    } else {
      ++r.uncovered;
      r.uncovered_correct += ok;
    }
  }
  return r;
}

Predictions Predict(const LatentModel& model, const Corpus& corpus, const OutputCfg* output_cfg,
                    int workers) {
  Predictions p;
  p.outputs.resize(corpus.size());
  p.covered.assign(corpus.size(), 0);
  ParallelFor(corpus.size(), workers, [&](size_t i) {
    auto best = model.ViterbiParse(corpus.examples[i].input);
    p.covered[i] = best.has_value();
    if (best && (!output_cfg || CfgAccepts(*output_cfg, best->output))) p.outputs[i] = best->output;
  });
  return p;
}

}  // namespace qcfg
