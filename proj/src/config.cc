#include "qcfg/config.h"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "qcfg/errors.h"
#include "qcfg/rng.h"

namespace qcfg {
namespace {

using Json = nlohmann::json;

class Reader {
 public:
  Reader(const Json& obj, std::string path, const std::string& source)
      : obj_(obj), path_(std::move(path)), source_(source) {
    if (!obj_.is_object()) Fail(path_.empty() ? "top level must be an object" : "must be an object");
  }

  void Allow(std::initializer_list<const char*> keys) const {
    std::set<std::string> allowed(keys.begin(), keys.end());
    for (const auto& [key, value] : obj_.items())
      if (!allowed.count(key)) throw UsageError(source_ + ": unknown key '" + Key(key) + "'");
  }

  bool Has(const char* key) const { return obj_.contains(key); }

  Reader Child(const char* key) const { return Reader(obj_.at(key), Key(key), source_); }

  template <typename T>
  void Get(const char* key, T* out) const {
    if (!Has(key)) return;
    const Json& v = obj_.at(key);
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw std::invalid_argument("boolean");
      } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) throw std::invalid_argument("integer");
        if constexpr (std::is_unsigned_v<T>) {
          if (!v.is_number_unsigned()) throw std::invalid_argument("non-negative integer");
        }
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) throw std::invalid_argument("number");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw std::invalid_argument("string");
      }
      *out = v.get<T>();
    } catch (const std::invalid_argument& e) {
      throw UsageError(source_ + ": key '" + Key(key) + "' must be a " + e.what());
    }
  }

  void Require(const char* key) const {
    if (!Has(key)) throw UsageError(source_ + ": missing required key '" + Key(key) + "'");
  }

  double Temperature(const char* key, double fallback) const {
    if (!Has(key)) return fallback;
    const Json& v = obj_.at(key);
    if (v.is_string() && (v == "inf" || v == "infinity")) return kInfiniteTemperature;
    if (v.is_number() && v.get<double>() > 0) return v.get<double>();
    throw UsageError(source_ + ": key '" + Key(key) + "' must be a positive number or \"inf\"");
  }

  std::vector<double> Numbers(const char* key) const {
    std::vector<double> out;
    if (!Has(key)) return out;
    const Json& v = obj_.at(key);
    if (!v.is_array()) throw UsageError(source_ + ": key '" + Key(key) + "' must be an array");
    for (const auto& x : v) {
      if (!x.is_number()) throw UsageError(source_ + ": key '" + Key(key) + "' must hold numbers");
      out.push_back(x.get<double>());
    }
    return out;
  }

  [[noreturn]] void Fail(const std::string& what) const {
    throw UsageError(source_ + ": " + (path_.empty() ? "" : "'" + path_ + "' ") + what);
  }

 private:
  std::string Key(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const Json& obj_;
  std::string path_;
  const std::string& source_;
};

InductionSection ReadInduction(const Reader& ind, uint64_t seed) {
  ind.Allow({"preset", "k_alpha", "k_beta", "terminal_weight", "nonterminal_weight",
             "max_nonterminals", "allow_repeated_indices", "partitions", "max_steps",
             "sample_size_for_phat", "seed", "consistent_cfg_categories", "verify_coverage",
             "shared_token_seeds", "seed_rules"});
  std::string preset = "default";
  ind.Get("preset", &preset);
  InductionSection sec;
  sec.config = InductionPreset(preset);
  InductionConfig& i = sec.config;
  i.rng_seed = seed;
  ind.Get("k_alpha", &i.k_alpha);
  ind.Get("k_beta", &i.k_beta);
  ind.Get("terminal_weight", &i.terminal_weight);
  ind.Get("nonterminal_weight", &i.nonterminal_weight);
  ind.Get("max_nonterminals", &i.max_nonterminals);
  ind.Get("allow_repeated_indices", &i.allow_repeated_indices);
  ind.Get("partitions", &i.partitions);
  ind.Get("max_steps", &i.max_steps);
  ind.Get("sample_size_for_phat", &i.sample_size_for_phat);
  ind.Get("seed", &i.rng_seed);
  ind.Get("consistent_cfg_categories", &i.consistent_cfg_categories);
  ind.Get("verify_coverage", &i.verify_coverage);
  ind.Get("shared_token_seeds", &sec.shared_token_seeds);
  ind.Get("seed_rules", &sec.seed_rules_path);
  return sec;
}

Json ParseJson(const std::string& text, const std::string& source) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw UsageError(source + ": invalid JSON: " + e.what());
  }
}

}  // namespace

InductionConfig InductionPreset(const std::string& name) {
  if (name == "default") return InductionConfig{};
  if (name == "scan") return ScanInductionConfig();
  if (name == "cogs") return CogsInductionConfig();
  if (name == "geoquery") return GeoQueryInductionConfig();
  if (name == "smcalflow") return SmcalflowInductionConfig();
  throw UsageError("unknown induction preset '" + name + "'");
}

RunConfig ParseRunConfig(const std::string& text, const std::string& source) {
  Json j = ParseJson(text, source);
  if (j.is_object() && j.empty()) throw UsageError(source + ": empty configuration");
  Reader top(j, "", source);
  top.Allow({"seed", "workers", "output_dir", "data", "induction", "model", "sampler", "augment"});
  top.Require("seed");
  top.Require("output_dir");
  top.Require("data");
  RunConfig c;
  top.Get("seed", &c.seed);
  top.Get("workers", &c.workers);
  top.Get("output_dir", &c.output_dir);
  c.induction.rng_seed = MixSeed(c.seed, 1);
  c.train.rng_seed = MixSeed(c.seed, 2);
  c.sampler.rng_seed = MixSeed(c.seed, 3);

  Reader data = top.Child("data");
  data.Allow({"train", "test", "unlabeled", "output_cfg"});
  data.Require("train");
  data.Get("train", &c.train_path);
  data.Get("test", &c.test_path);
  data.Get("unlabeled", &c.unlabeled_path);
  data.Get("output_cfg", &c.output_cfg_path);

  if (top.Has("induction")) {
    InductionSection sec = ReadInduction(top.Child("induction"), c.induction.rng_seed);
    c.induction = sec.config;
    c.shared_token_seeds = sec.shared_token_seeds;
    c.seed_rules_path = sec.seed_rules_path;
  }

  if (top.Has("model")) {
    Reader m = top.Child("model");
    m.Allow({"num_states", "learning_rate", "learning_rates", "steps", "batch_size",
             "batch_restricted_normalization", "seed", "init_scale", "restarts", "selection"});
    m.Get("num_states", &c.num_states);
    m.Get("learning_rate", &c.train.learning_rate);
    c.learning_rates = m.Numbers("learning_rates");
    m.Get("steps", &c.train.steps);
    m.Get("batch_size", &c.train.batch_size);
    m.Get("batch_restricted_normalization", &c.train.batch_restricted_normalization);
    m.Get("seed", &c.train.rng_seed);
    m.Get("init_scale", &c.train.init_scale);
    m.Get("restarts", &c.restarts);
    std::string selection = "joint";
    m.Get("selection", &selection);
    if (selection == "joint") c.train.selection = FitSelection::kJoint;
    else if (selection == "conditional") c.train.selection = FitSelection::kConditional;
    else throw UsageError(source + ": key 'model.selection' must be \"joint\" or \"conditional\"");
  }

  if (top.Has("sampler")) {
    Reader s = top.Child("sampler");
    s.Allow({"count", "temperature", "delta", "delta_threshold", "max_depth", "seed", "dedup",
             "min_acceptance_rate", "acceptance_window"});
    s.Get("count", &c.sampler.count);
    c.sampler.temperature = s.Temperature("temperature", c.sampler.temperature);
    s.Get("delta", &c.sampler.nt_bias_delta);
    s.Get("delta_threshold", &c.sampler.nt_bias_threshold);
    s.Get("max_depth", &c.sampler.max_depth);
    s.Get("seed", &c.sampler.rng_seed);
    s.Get("dedup", &c.sampler.dedup);
    s.Get("min_acceptance_rate", &c.sampler.min_acceptance_rate);
    s.Get("acceptance_window", &c.sampler.acceptance_window);
  }

  if (top.Has("augment")) {
    Reader a = top.Child("augment");
    a.Allow({"enabled", "dup_factor", "reinduce"});
    a.Get("enabled", &c.augment);
    a.Get("dup_factor", &c.dup_factor);
    a.Get("reinduce", &c.reinduce);
  }

  auto positive = [&](bool ok, const char* what) {
    if (!ok) throw UsageError(source + ": " + what);
  };
  positive(c.num_states >= 1, "model.num_states must be >= 1");
  positive(c.restarts >= 1, "model.restarts must be >= 1");
  positive(c.train.steps >= 0, "model.steps must be >= 0");
  positive(c.train.batch_size >= 1, "model.batch_size must be >= 1");
  positive(c.train.learning_rate > 0, "model.learning_rate must be positive");
  for (double lr : c.learning_rates) positive(lr > 0, "model.learning_rates must be positive");
  positive(c.induction.partitions >= 1, "induction.partitions must be >= 1");
  positive(c.induction.max_steps >= 1, "induction.max_steps must be >= 1");
  positive(c.sampler.max_depth >= 1, "sampler.max_depth must be >= 1");
  positive(c.sampler.nt_bias_delta >= 0, "sampler.delta must be non-negative");
  positive(c.dup_factor >= 1, "augment.dup_factor must be >= 1");
  positive(c.workers >= 0, "workers must be >= 0");
  c.induction.workers = c.train.workers = c.sampler.workers = c.workers;
  return c;
}

namespace {

std::string ReadConfigFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError(path + ": cannot open config file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

RunConfig LoadRunConfig(const std::string& path) { return ParseRunConfig(ReadConfigFile(path), path); }

InductionSection ParseInductionSection(const std::string& text, const std::string& source) {
  Json j = ParseJson(text, source);
  InductionSection sec = ReadInduction(Reader(j, "", source), 0);
  if (sec.config.partitions < 1) throw UsageError(source + ": partitions must be >= 1");
  if (sec.config.max_steps < 1) throw UsageError(source + ": max_steps must be >= 1");
  return sec;
}

InductionSection LoadInductionSection(const std::string& path) {
  return ParseInductionSection(ReadConfigFile(path), path);
}

}  // namespace qcfg
