#pragma once

#include <ostream>
#include <string>

#include "qcfg/augment.h"
#include "qcfg/config.h"
#include "qcfg/sampler.h"

namespace qcfg {

struct PipelineArtifacts {
  std::string grammar_path;
  std::string params_path;
  std::string synthetic_path;
  std::string augmented_path;   // empty when augmentation is disabled
  std::string eval_path;        // empty without a test set
  std::string predictions_path; // empty without a test set
  std::string log_path;
  size_t grammar_size = 0;
  SampleStats sample_stats;
  EvalReport eval;
};

// induce -> fit -> (relabel + refit) -> sample -> augment -> eval. Writes
// grammar.txt, params.json, synthetic.tsv, augmented.tsv, predictions.txt,
// eval.json and run_log.jsonl into cfg.output_dir. Output files depend only
// on the configuration and input files.
PipelineArtifacts RunPipeline(const RunConfig& cfg, std::ostream* progress = nullptr);

}  // namespace qcfg
