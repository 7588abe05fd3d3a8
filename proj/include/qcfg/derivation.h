#pragma once

#include <vector>

#include "qcfg/corpus.h"
#include "qcfg/rule.h"

namespace qcfg {

// A tree of rule applications; children[i - 1] expands NT_i of rule.
struct Derivation {
  Rule rule;
  std::vector<Derivation> children;

  Derivation() = default;
  explicit Derivation(Rule r, std::vector<Derivation> kids = {})
      : rule(std::move(r)), children(std::move(kids)) {}

  bool WellFormed() const;
  // Height in rule applications; a leaf has height 1.
  int Height() const;
  size_t Size() const;
  std::string ToString() const;

  friend bool operator==(const Derivation&, const Derivation&) = default;
};

ExamplePair DerivationYield(const Derivation& z);

}  // namespace qcfg
