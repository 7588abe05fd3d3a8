#include "qcfg/cli.h"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "qcfg/augment.h"
#include "qcfg/config.h"
#include "qcfg/errors.h"
#include "qcfg/parallel.h"
#include "qcfg/pipeline.h"
#include "qcfg/sampler.h"
#include "qcfg/scan.h"
#include "qcfg/text_io.h"

namespace qcfg {
namespace {

double ParseTemperature(const std::string& text) {
  if (text == "inf" || text == "infinity") return kInfiniteTemperature;
  try {
    size_t used = 0;
    double t = std::stod(text, &used);
    if (used == text.size() && t > 0) return t;
  } catch (const std::exception&) {
  }
  throw UsageError("--temperature: expected a positive number or 'inf', got '" + text + "'");
}

std::optional<OutputCfg> MaybeCfg(const std::string& path) {
  if (path.empty()) return std::nullopt;
  return OutputCfg::Load(path);
}

LatentModel LoadModel(const std::string& grammar_path, const std::string& params_path) {
  Grammar g = LoadGrammar(grammar_path);
  ModelParams p = LoadParams(params_path);
  try {
    return LatentModel(std::move(g), std::move(p));
  } catch (const LookupError& e) {
    throw DataError(params_path + ": " + e.what());
  }
}

}  // namespace

int RunCli(int argc, const char* const* argv, std::istream& in, std::ostream& out,
           std::ostream& err) {
  CLI::App app{"Grammar induction, latent-state modeling and sampling for QCFGs", "qcfg"};
  app.require_subcommand(1);
  int workers = 0;
  app.add_option("--workers", workers, "Maximum worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);

  // induce
  auto* induce = app.add_subcommand("induce", "Induce a grammar from a training TSV");
  std::string ind_train, ind_out, ind_preset = "default", ind_cfg, ind_seed_rules, ind_log, ind_config;
  InductionConfig icfg;
  bool no_shared_seeds = false;
  double k_alpha = NAN, k_beta = NAN, k_t = NAN, k_nt = NAN;
  int partitions = 0, max_steps = 0, max_nts = 0;
  int64_t phat_sample = kAutoPhatSample;
  uint64_t ind_seed = 0;
  bool consistent = false, verify = false, no_repeated = false;
  induce->add_option("--train", ind_train, "Training TSV")->required();
  induce->add_option("--out", ind_out, "Output grammar file")->required();
  auto* preset_opt = induce->add_option("--preset", ind_preset, "default, scan, cogs, geoquery or smcalflow");
  induce->add_option("--config", ind_config, "JSON induction settings; flags override it");
  induce->add_option("--k-alpha", k_alpha);
  induce->add_option("--k-beta", k_beta);
  induce->add_option("--terminal-weight", k_t);
  induce->add_option("--nonterminal-weight", k_nt);
  induce->add_option("--partitions", partitions)->check(CLI::PositiveNumber);
  induce->add_option("--max-steps", max_steps)->check(CLI::PositiveNumber);
  induce->add_option("--max-nonterminals", max_nts)->check(CLI::PositiveNumber);
  induce->add_flag("--no-repeated-indices", no_repeated);
  auto* phat_opt = induce->add_option("--phat-sample", phat_sample, "-1 auto, 0 exact, otherwise sample size");
  auto* seed_opt = induce->add_option("--seed", ind_seed);
  induce->add_option("--output-cfg", ind_cfg);
  induce->add_flag("--consistent-cfg-categories", consistent);
  induce->add_flag("--verify-coverage", verify);
  induce->add_flag("--no-shared-token-seeds", no_shared_seeds);
  induce->add_option("--seeds,--seed-rules", ind_seed_rules, "Grammar file of extra seed rules");
  induce->add_option("--log", ind_log, "JSONL iteration log");

  // fit
  auto* fit = app.add_subcommand("fit", "Fit latent-state parameters for a grammar");
  std::string fit_grammar, fit_train, fit_out;
  int states = 2, restarts = 1;
  std::vector<double> lrs;
  TrainConfig tcfg;
  fit->add_option("--grammar", fit_grammar)->required();
  fit->add_option("--train", fit_train)->required();
  fit->add_option("--states", states)->check(CLI::PositiveNumber);
  fit->add_option("--lr", lrs, "Learning rate; several values select the best")->expected(1, -1);
  fit->add_option("--steps", tcfg.steps)->check(CLI::NonNegativeNumber);
  fit->add_option("--batch-size", tcfg.batch_size)->check(CLI::PositiveNumber);
  fit->add_option("--restarts", restarts)->check(CLI::PositiveNumber);
  fit->add_option("--init-scale", tcfg.init_scale)->check(CLI::NonNegativeNumber);
  fit->add_flag("--batch-restricted", tcfg.batch_restricted_normalization);
  fit->add_option("--seed", tcfg.rng_seed);
  std::string selection = "joint";
  fit->add_option("--select", selection, "Rank restarts by training joint or conditional likelihood")
      ->check(CLI::IsMember({"joint", "conditional"}));
  fit->add_option("--out", fit_out)->required();

  // parse
  auto* parse = app.add_subcommand("parse", "Viterbi-parse inputs; prints y or ABSTAIN per line");
  std::string p_grammar, p_params, p_input = "-", p_cfg, p_out;
  parse->add_option("--grammar", p_grammar)->required();
  parse->add_option("--params", p_params)->required();
  parse->add_option("--input", p_input, "TSV or one input per line; - for stdin");
  parse->add_option("--output-cfg", p_cfg);
  parse->add_option("--out", p_out, "Write predictions here instead of stdout");

  // sample
  auto* sample = app.add_subcommand("sample", "Sample synthetic examples");
  std::string s_grammar, s_params, s_cfg, s_out, s_temp = "1";
  SamplerConfig scfg;
  sample->add_option("--grammar", s_grammar)->required();
  sample->add_option("--params", s_params)->required();
  sample->add_option("--count", scfg.count);
  sample->add_option("--temperature", s_temp, "Positive number or inf");
  sample->add_option("--delta", scfg.nt_bias_delta)->check(CLI::NonNegativeNumber);
  sample->add_option("--delta-threshold", scfg.nt_bias_threshold)->check(CLI::NonNegativeNumber);
  sample->add_option("--max-depth", scfg.max_depth)->check(CLI::PositiveNumber);
  sample->add_option("--output-cfg", s_cfg);
  sample->add_option("--seed", scfg.rng_seed);
  sample->add_option("--out", s_out)->required();
  sample->add_flag("--dedup", scfg.dedup);

  // augment
  auto* augment = app.add_subcommand("augment", "Mix original and synthetic data 1:1");
  std::string a_train, a_syn, a_out;
  uint64_t a_seed = 0;
  augment->add_option("--train", a_train)->required();
  augment->add_option("--synthetic", a_syn)->required();
  augment->add_option("--out", a_out)->required();
  augment->add_option("--seed", a_seed);

  // relabel
  auto* relabel = app.add_subcommand("relabel", "Pseudo-label unlabeled inputs with Viterbi parses");
  std::string r_grammar, r_params, r_unlabeled, r_out, r_cfg;
  int dup = 1;
  relabel->add_option("--grammar", r_grammar)->required();
  relabel->add_option("--params", r_params)->required();
  relabel->add_option("--unlabeled", r_unlabeled)->required();
  relabel->add_option("--out", r_out)->required();
  relabel->add_option("--dup", dup, "Copies of each pseudo-labeled example")->check(CLI::PositiveNumber);
  relabel->add_option("--output-cfg", r_cfg);

  // eval
  auto* eval = app.add_subcommand("eval", "Exact-match evaluation with coverage breakdown");
  std::string e_grammar, e_params, e_test, e_report, e_cfg;
  eval->add_option("--grammar", e_grammar)->required();
  eval->add_option("--params", e_params)->required();
  eval->add_option("--test", e_test)->required();
  eval->add_option("--report", e_report)->required();
  eval->add_option("--output-cfg", e_cfg);

  // run
  auto* run = app.add_subcommand("run", "Run induce, fit, sample, augment and eval from a JSON config");
  std::string run_config;
  run->add_option("--config", run_config)->required();

  // scan-splits
  auto* splits = app.add_subcommand("scan-splits", "Write generated SCAN splits as TSV files");
  std::string sp_out;
  std::vector<std::string> sp_names;
  uint64_t sp_seed = 0;
  splits->add_option("--out-dir", sp_out)->required();
  splits->add_option("--split", sp_names, "Split names (default: all)");
  splits->add_option("--seed", sp_seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*induce) {
      if (!ind_config.empty()) {
        InductionSection sec = LoadInductionSection(ind_config);
        icfg = sec.config;
        if (!sec.shared_token_seeds) no_shared_seeds = true;
        if (ind_seed_rules.empty()) ind_seed_rules = sec.seed_rules_path;
        if (preset_opt->count()) throw UsageError("--preset and --config are exclusive");
      } else {
        icfg = InductionPreset(ind_preset);
      }
      if (!std::isnan(k_alpha)) icfg.k_alpha = k_alpha;
      if (!std::isnan(k_beta)) icfg.k_beta = k_beta;
      if (!std::isnan(k_t)) icfg.terminal_weight = k_t;
      if (!std::isnan(k_nt)) icfg.nonterminal_weight = k_nt;
      if (partitions) icfg.partitions = partitions;
      if (max_steps) icfg.max_steps = max_steps;
      if (max_nts) icfg.max_nonterminals = max_nts;
      if (no_repeated) icfg.allow_repeated_indices = false;
      if (phat_opt->count()) icfg.sample_size_for_phat = phat_sample;
      if (seed_opt->count()) icfg.rng_seed = ind_seed;
      if (consistent) icfg.consistent_cfg_categories = true;
      if (verify) icfg.verify_coverage = true;
      icfg.workers = workers;
      Corpus train = LoadCorpus(ind_train);
      auto ocfg = MaybeCfg(ind_cfg);
      std::vector<Rule> seeds;
      if (!no_shared_seeds) seeds = SeedRulesSharedTokens(train);
      if (!ind_seed_rules.empty()) {
        Grammar extra = LoadGrammar(ind_seed_rules);
        seeds.insert(seeds.end(), extra.rules().begin(), extra.rules().end());
      }
      std::unique_ptr<std::ofstream> log;
      if (!ind_log.empty()) {
        log = std::make_unique<std::ofstream>(ind_log);
        if (!*log) throw DataError(ind_log + ": cannot open log file");
      }
      auto result = Induce(train, seeds, ocfg ? &*ocfg : nullptr, icfg,
                           [&](const IterationRecord& r, const Grammar&) {
                             if (!log) return;
                             nlohmann::ordered_json j{{"partition", r.partition},
                                                      {"step", r.step},
                                                      {"objective", r.objective},
                                                      {"grammar_size", r.grammar_size},
                                                      {"active_examples", r.active_examples},
                                                      {"added", r.added},
                                                      {"removed", r.removed}};
                             *log << j.dump() << "\n";
                           });
      SaveGrammar(ind_out, result.grammar);
      err << "induced " << result.grammar.size() << " rules, objective " << result.objective
          << (result.step_budget_exhausted ? " (step budget exhausted)" : "") << "\n";
    } else if (*fit) {
      if (lrs.empty()) lrs.push_back(tcfg.learning_rate);
      if (selection == "conditional") tcfg.selection = FitSelection::kConditional;
      tcfg.workers = workers;
      Grammar g = LoadGrammar(fit_grammar);
      Corpus train = LoadCorpus(fit_train);
      FitStats stats;
      ModelParams p = FitSearch(g, train, states, tcfg, lrs, restarts, &stats);
      SaveParams(fit_out, p);
      err << "fitted " << p.ParameterCount() << " parameters on " << stats.examples - stats.skipped
          << " examples (" << stats.skipped << " skipped), lr " << stats.learning_rate
          << ", mean joint log-likelihood " << stats.train_mean_joint << "\n";
    } else if (*parse) {
      LatentModel model = LoadModel(p_grammar, p_params);
      auto ocfg = MaybeCfg(p_cfg);
      std::vector<Sequence> inputs = p_input == "-" ? ReadInputs(in, "<stdin>") : LoadInputs(p_input);
      std::vector<std::string> lines(inputs.size());
      ParallelFor(inputs.size(), workers, [&](size_t i) {
        auto best = model.ViterbiParse(inputs[i], ocfg ? &*ocfg : nullptr);
        lines[i] = best ? ToString(best->output) : "ABSTAIN";
      });
      std::ostringstream text;
      for (const auto& l : lines) text << l << "\n";
      if (p_out.empty()) out << text.str();
      else WriteFileOrThrow(p_out, text.str());
    } else if (*sample) {
      LatentModel model = LoadModel(s_grammar, s_params);
      auto ocfg = MaybeCfg(s_cfg);
      scfg.temperature = ParseTemperature(s_temp);
      scfg.workers = workers;
      SampleStats stats;
      Corpus c = SampleDataset(model, ocfg ? &*ocfg : nullptr, scfg, &stats);
      SaveCorpus(s_out, c);
      err << "sampled " << c.size() << " examples, acceptance rate " << stats.acceptance_rate() << "\n";
    } else if (*augment) {
      Corpus train = LoadCorpus(a_train);
      Corpus syn = LoadCorpus(a_syn);
      if (train.examples.empty()) throw DataError(a_train + ": empty corpus");
      if (syn.examples.empty()) throw DataError(a_syn + ": empty corpus");
      SaveCorpus(a_out, MixBalanced(train, syn, a_seed));
    } else if (*relabel) {
      LatentModel model = LoadModel(r_grammar, r_params);
      auto ocfg = MaybeCfg(r_cfg);
      auto inputs = LoadInputs(r_unlabeled);
      RelabelStats rs;
      Corpus labeled = HardEmRelabel(model, inputs, ocfg ? &*ocfg : nullptr, &rs, workers);
      Corpus dupd;
      for (int d = 0; d < dup; ++d)
        dupd.examples.insert(dupd.examples.end(), labeled.examples.begin(), labeled.examples.end());
      SaveCorpus(r_out, dupd);
      err << "labeled " << rs.labeled << " of " << rs.inputs << " inputs (" << rs.discarded_not_derivable
          << " not derivable, " << rs.discarded_cfg << " rejected by the output CFG)\n";
    } else if (*eval) {
      LatentModel model = LoadModel(e_grammar, e_params);
      auto ocfg = MaybeCfg(e_cfg);
      Corpus test = LoadCorpus(e_test);
      Predictions pred = Predict(model, test, ocfg ? &*ocfg : nullptr, workers);
      EvalReport report = ExactMatchEval(pred.outputs, test, &pred.covered);
      WriteFileOrThrow(e_report, report.ToJson());
      err << "accuracy " << report.accuracy() << " (" << report.correct << "/" << report.total << ")\n";
    } else if (*run) {
      RunConfig cfg = LoadRunConfig(run_config);
      if (workers) {
        cfg.workers = workers;
        cfg.induction.workers = cfg.train.workers = cfg.sampler.workers = workers;
      }
      RunPipeline(cfg, &err);
    } else if (*splits) {
      if (sp_names.empty()) sp_names = ScanSplitNames();
      std::filesystem::create_directories(sp_out);
      for (const auto& name : sp_names) {
        ScanSplit s = MakeScanSplit(name, sp_seed);
        auto path = [&](const char* part) {
          return (std::filesystem::path(sp_out) / (name + "_" + part + ".tsv")).string();
        };
        SaveCorpus(path("train"), s.train);
        SaveCorpus(path("test"), s.test);
        if (!s.dev.examples.empty()) SaveCorpus(path("dev"), s.dev);
      }
    }
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const CapacityError& e) {
    err << "capacity error: " << e.what() << "\n";
    return kExitCapacity;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::invalid_argument& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitOk;
}

}  // namespace qcfg
