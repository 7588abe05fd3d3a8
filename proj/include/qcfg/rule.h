#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "qcfg/symbol.h"

namespace qcfg {

inline constexpr int kDefaultMaxNonterminals = 4;

// NT -> <input, output>. Input-side nonterminal indices are distinct; output
// side may repeat an index (one-to-many alignment).
struct Rule {
  Sequence input;
  Sequence output;

  Rule() = default;
  Rule(Sequence in, Sequence out) : input(std::move(in)), output(std::move(out)) {}

  // Number of nonterminals on the input side.
  int Arity() const { return CountNonterminals(input); }
  bool IsIdentity() const;

  // "a NT_1 ### A NT_1"
  std::string ToString() const;
  static Rule Parse(std::string_view text);

  friend bool operator==(const Rule&, const Rule&) = default;
};

struct RuleHash {
  size_t operator()(const Rule& r) const;
};

// Ordering by text serialization; used wherever the output order must not
// depend on token interning order.
bool SerializationLess(const Rule& a, const Rule& b);

// nullopt when the rule is well formed.
std::optional<std::string> ValidateRule(const Rule& rule, int max_nonterminals,
                                        bool allow_repeated_indices);

bool IsCanonical(const Rule& rule);

// Renumbers nonterminals 1..k by first occurrence on the input side.
Rule Canonicalize(const Rule& rule);

// Substitutes inner for NT_index of outer (on both sides, every output
// occurrence), then canonicalizes. Throws CompositionOverflow if the result
// has more than max_nonterminals nonterminals.
Rule Compose(const Rule& outer, const Rule& inner, int index,
             int max_nonterminals = kDefaultMaxNonterminals);

}  // namespace qcfg
