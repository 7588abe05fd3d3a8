#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "qcfg/corpus.h"
#include "qcfg/forest.h"
#include "qcfg/grammar.h"

namespace qcfg {

struct ParserOptions {
  size_t max_chart_items = 10'000'000;
  // Input-only parsing: bound on chains of rules whose input side is a single
  // nonterminal (e.g. <NT_1, a NT_1>), which would otherwise loop.
  int max_input_unary_chain = 2;
};

// Per-call adjustments to the parser's rule set.
struct RuleFilter {
  std::span<const uint32_t> disabled;  // sorted ids
  std::span<const Rule> extra;         // get ids num_rules(), num_rules()+1, ...
};

class ChartParser {
 public:
  explicit ChartParser(const Grammar& grammar, ParserOptions options = {});
  explicit ChartParser(std::span<const Rule> rules, ParserOptions options = {});
  ~ChartParser();
  ChartParser(ChartParser&&) noexcept;
  ChartParser& operator=(ChartParser&&) noexcept;

  // Mutation is not thread-safe; queries are.
  uint32_t AddRule(const Rule& rule);
  void SetEnabled(uint32_t id, bool enabled);
  bool enabled(uint32_t id) const;

  size_t num_rules() const;
  const Rule& rule(uint32_t id) const;
  std::vector<Rule> rules() const;
  const ParserOptions& options() const { return options_; }

  // nullopt when no derivation exists; CapacityError when the item budget
  // runs out.
  std::optional<DerivationForest> ParsePair(const ExamplePair& pair) const;
  std::optional<DerivationForest> ParseInput(std::span<const Symbol> input) const;

  bool CanDerive(const ExamplePair& pair) const;
  bool CanDerive(std::span<const Symbol> input, std::span<const Symbol> output,
                 const RuleFilter& filter) const;

  // Whether the rule's string pair is derivable when its nonterminals are
  // read as variables that only match themselves.
  bool DerivesRule(const Rule& rule, const RuleFilter& filter) const;

  struct CompiledRule;

 private:
  void Compile(const Rule& rule, CompiledRule* out) const;
  void Candidates(std::span<const Symbol> x, std::span<const Symbol> y, bool pair,
                  const RuleFilter& filter, const std::vector<CompiledRule>& extra,
                  std::vector<const CompiledRule*>* out) const;

  ParserOptions options_;
  std::vector<std::unique_ptr<CompiledRule>> rules_;
  std::vector<char> enabled_;
  std::unordered_map<TokenId, std::vector<uint32_t>> input_postings_;
  std::vector<uint32_t> no_input_terminals_;
};

// True iff some substitution of the pattern's nonterminals by non-empty
// symbol sequences makes it a contiguous substring of text. Repeated indices
// must receive identical substitutions; they are only accepted when
// allow_repeated_indices is set (output sides), otherwise invalid_argument.
bool OccursIn(std::span<const Symbol> pattern, std::span<const Symbol> text,
              bool allow_repeated_indices = false);

}  // namespace qcfg
