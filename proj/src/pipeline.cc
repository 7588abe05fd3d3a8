#include "qcfg/pipeline.h"

#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "qcfg/errors.h"
#include "qcfg/text_io.h"

namespace qcfg {
namespace {

using Json = nlohmann::ordered_json;

class RunLog {
 public:
  explicit RunLog(const std::string& path) : out_(path) {
    if (!out_) throw DataError(path + ": cannot open log file");
  }
  void Write(const Json& record) { out_ << record.dump() << "\n"; }

 private:
  std::ofstream out_;
};

std::string Join(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

}  // namespace

PipelineArtifacts RunPipeline(const RunConfig& cfg, std::ostream* progress) {
  auto note = [&](const std::string& msg) {
    if (progress) *progress << msg << std::endl;
  };
  if (cfg.output_dir.empty()) throw UsageError("output_dir must not be empty");
  std::filesystem::create_directories(cfg.output_dir);
  PipelineArtifacts art;
  art.grammar_path = Join(cfg.output_dir, "grammar.txt");
  art.params_path = Join(cfg.output_dir, "params.json");
  art.synthetic_path = Join(cfg.output_dir, "synthetic.tsv");
  art.log_path = Join(cfg.output_dir, "run_log.jsonl");
  RunLog log(art.log_path);

  Corpus train = LoadCorpus(cfg.train_path);
  std::optional<OutputCfg> output_cfg;
  if (!cfg.output_cfg_path.empty()) output_cfg = OutputCfg::Load(cfg.output_cfg_path);
  const OutputCfg* ocfg = output_cfg ? &*output_cfg : nullptr;
  log.Write({{"event", "start"},
             {"train", cfg.train_path},
             {"train_examples", train.size()},
             {"seed", cfg.seed}});

  std::vector<Rule> seeds;
  if (cfg.shared_token_seeds) seeds = SeedRulesSharedTokens(train);
  if (!cfg.seed_rules_path.empty()) {
    Grammar extra = LoadGrammar(cfg.seed_rules_path);
    seeds.insert(seeds.end(), extra.rules().begin(), extra.rules().end());
  }
  note("inducing grammar from " + std::to_string(train.size()) + " examples");
  auto induced = Induce(train, seeds, ocfg, cfg.induction,
                        [&](const IterationRecord& r, const Grammar&) {
                          log.Write({{"event", "induction_iteration"},
                                     {"partition", r.partition},
                                     {"step", r.step},
                                     {"objective", r.objective},
                                     {"grammar_size", r.grammar_size},
                                     {"active_examples", r.active_examples},
                                     {"actions", r.actions},
                                     {"plain_removals", r.plain_removals}});
                        });
  Grammar grammar = std::move(induced.grammar);
  SaveGrammar(art.grammar_path, grammar);
  art.grammar_size = grammar.size();
  log.Write({{"event", "induction_done"},
             {"grammar_size", grammar.size()},
             {"objective", induced.objective},
             {"step_budget_exhausted", induced.step_budget_exhausted},
             {"fingerprint", FingerprintHex(grammar.Fingerprint())}});
  note("induced " + std::to_string(grammar.size()) + " rules");

  std::vector<double> lrs = cfg.learning_rates;
  if (lrs.empty()) lrs.push_back(cfg.train.learning_rate);
  auto fit = [&](const Grammar& g, const Corpus& data, const char* stage) {
    FitStats stats;
    ModelParams p = FitSearch(g, data, cfg.num_states, cfg.train, lrs, cfg.restarts, &stats);
    Json trace = Json::array();
    for (size_t i = 0; i < stats.loglik_trace.size(); i += 10) trace.push_back(stats.loglik_trace[i]);
    log.Write({{"event", "fit"},
               {"stage", stage},
               {"num_states", cfg.num_states},
               {"learning_rate", stats.learning_rate},
               {"init_seed", stats.init_seed},
               {"examples", stats.examples},
               {"skipped", stats.skipped},
               {"train_mean_joint", stats.train_mean_joint},
               {"train_mean_conditional", stats.train_mean_conditional},
               {"loglik_trace_every_10", trace}});
    return p;
  };
  note("fitting model with " + std::to_string(cfg.num_states) + " states");
  ModelParams params = fit(grammar, train, "supervised");

  if (!cfg.unlabeled_path.empty()) {
    auto unlabeled = LoadInputs(cfg.unlabeled_path);
    LatentModel model(grammar, params, cfg.train.parser);
    RelabelStats rs;
    Corpus pseudo = HardEmRelabel(model, unlabeled, ocfg, &rs, cfg.workers);
    log.Write({{"event", "relabel"},
               {"inputs", rs.inputs},
               {"labeled", rs.labeled},
               {"discarded_not_derivable", rs.discarded_not_derivable},
               {"discarded_cfg", rs.discarded_cfg}});
    Corpus combined = train;
    for (int d = 0; d < cfg.dup_factor; ++d)
      combined.examples.insert(combined.examples.end(), pseudo.examples.begin(), pseudo.examples.end());
    if (cfg.reinduce) {
      grammar = Induce(combined, seeds, ocfg, cfg.induction).grammar;
      SaveGrammar(art.grammar_path, grammar);
      art.grammar_size = grammar.size();
      log.Write({{"event", "reinduction_done"}, {"grammar_size", grammar.size()}});
    }
    params = fit(grammar, combined, "semi_supervised");
  }
  SaveParams(art.params_path, params);
  LatentModel model(grammar, params, cfg.train.parser);

  note("sampling " + std::to_string(cfg.sampler.count) + " examples");
  Corpus synthetic = SampleDataset(model, ocfg, cfg.sampler, &art.sample_stats);
  SaveCorpus(art.synthetic_path, synthetic);
  const auto& ss = art.sample_stats;
  log.Write({{"event", "sample"},
             {"requested", cfg.sampler.count},
             {"emitted", synthetic.size()},
             {"attempts", ss.attempts},
             {"accepted", ss.accepted},
             {"acceptance_rate", ss.acceptance_rate()},
             {"depth_rejects", ss.depth_rejects},
             {"dead_ends", ss.dead_ends},
             {"cfg_rejects", ss.cfg_rejects},
             {"duplicates_removed", ss.duplicates_removed}});

  if (cfg.augment && !synthetic.examples.empty()) {
    art.augmented_path = Join(cfg.output_dir, "augmented.tsv");
    Corpus mixed = MixBalanced(train, synthetic, MixSeed(cfg.seed, 4));
    SaveCorpus(art.augmented_path, mixed);
    log.Write({{"event", "augment"}, {"examples", mixed.size()}});
  }

  if (!cfg.test_path.empty()) {
    Corpus test = LoadCorpus(cfg.test_path);
    Predictions pred = Predict(model, test, ocfg, cfg.workers);
    art.eval = ExactMatchEval(pred.outputs, test, &pred.covered);
    art.eval_path = Join(cfg.output_dir, "eval.json");
    art.predictions_path = Join(cfg.output_dir, "predictions.txt");
    WriteFileOrThrow(art.eval_path, art.eval.ToJson());
    std::string lines;
    for (const auto& p : pred.outputs) lines += (p ? ToString(*p) : std::string("ABSTAIN")) + "\n";
    WriteFileOrThrow(art.predictions_path, lines);
    log.Write({{"event", "eval"},
               {"test", cfg.test_path},
               {"total", art.eval.total},
               {"accuracy", art.eval.accuracy()},
               {"covered", art.eval.covered},
               {"covered_accuracy", art.eval.covered_accuracy()},
               {"uncovered", art.eval.uncovered}});
    note("test accuracy " + std::to_string(art.eval.accuracy()));
  }
  log.Write({{"event", "done"}});
  return art;
}

}  // namespace qcfg
