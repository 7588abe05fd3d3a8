#include "qcfg/derivation.h"

#include <algorithm>
#include <stdexcept>

namespace qcfg {

bool Derivation::WellFormed() const {
  if (static_cast<int>(children.size()) != rule.Arity()) return false;
  return std::all_of(children.begin(), children.end(),
                     [](const Derivation& c) { return c.WellFormed(); });
}

int Derivation::Height() const {
  int h = 0;
  for (const auto& c : children) h = std::max(h, c.Height());
  return h + 1;
}

size_t Derivation::Size() const {
  size_t n = 1;
  for (const auto& c : children) n += c.Size();
  return n;
}

std::string Derivation::ToString() const {
  std::string out = "[" + rule.ToString();
  for (const auto& c : children) out += " " + c.ToString();
  return out + "]";
}

ExamplePair DerivationYield(const Derivation& z) {
  if (static_cast<int>(z.children.size()) != z.rule.Arity())
    throw std::invalid_argument("derivation children do not match rule arity: " +
                                z.rule.ToString());
  std::vector<ExamplePair> kids;
  kids.reserve(z.children.size());
  for (const auto& c : z.children) kids.push_back(DerivationYield(c));
  ExamplePair out;
  for (Symbol s : z.rule.input) {
    if (s.is_terminal()) {
      out.input.push_back(s);
    } else {
      const auto& sub = kids.at(s.index() - 1).input;
      out.input.insert(out.input.end(), sub.begin(), sub.end());
    }
  }
  for (Symbol s : z.rule.output) {
    if (s.is_terminal()) {
      out.output.push_back(s);
    } else {
      const auto& sub = kids.at(s.index() - 1).output;
      out.output.insert(out.output.end(), sub.begin(), sub.end());
    }
  }
  return out;
}

ExamplePair MakePair(std::string_view input, std::string_view output) {
  return ExamplePair{Tokens(input), Tokens(output)};
}

}  // namespace qcfg
