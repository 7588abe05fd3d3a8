#pragma once

#include <string>
#include <vector>

#include "qcfg/symbol.h"

namespace qcfg {

struct ExamplePair {
  Sequence input;
  Sequence output;

  friend bool operator==(const ExamplePair&, const ExamplePair&) = default;
};

struct ExamplePairHash {
  size_t operator()(const ExamplePair& e) const {
    return static_cast<size_t>(HashSymbols(e.output, HashSymbols(e.input) * 31 + 7));
  }
};

struct Corpus {
  std::string name;
  std::vector<ExamplePair> examples;

  size_t size() const { return examples.size(); }
  bool empty() const { return examples.empty(); }
};

ExamplePair MakePair(std::string_view input, std::string_view output);

}  // namespace qcfg
