#pragma once

#include <cstdint>
#include <optional>
#include <unordered_map>
#include <vector>

#include "qcfg/rule.h"

namespace qcfg {

struct GrammarConfig {
  int max_nonterminals = kDefaultMaxNonterminals;
  bool allow_repeated_indices = true;
};

// Insertion-ordered, duplicate-free rule set. Rules are stored canonically.
class Grammar {
 public:
  Grammar() = default;
  explicit Grammar(GrammarConfig config) : config_(config) {}

  // Validates and canonicalizes; returns false for duplicates. Throws
  // DataError for invalid rules and for the identity rule <NT_1, NT_1>,
  // which would make every derivation set infinite.
  bool Add(const Rule& rule);
  bool Remove(const Rule& rule);
  bool Contains(const Rule& rule) const { return Find(rule).has_value(); }
  std::optional<size_t> Find(const Rule& rule) const;

  const std::vector<Rule>& rules() const { return rules_; }
  const Rule& rule(size_t i) const { return rules_[i]; }
  size_t size() const { return rules_.size(); }
  bool empty() const { return rules_.empty(); }
  const GrammarConfig& config() const { return config_; }

  // FNV-1a over the text serialization, so it is stable across processes.
  uint64_t Fingerprint() const;

 private:
  GrammarConfig config_;
  std::vector<Rule> rules_;
  std::unordered_map<Rule, size_t, RuleHash> index_;
};

std::string FingerprintHex(uint64_t fingerprint);

}  // namespace qcfg
