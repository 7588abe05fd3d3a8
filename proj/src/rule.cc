#include "qcfg/rule.h"

#include <algorithm>
#include <vector>

#include "qcfg/errors.h"

namespace qcfg {

bool Rule::IsIdentity() const {
  return input.size() == 1 && output.size() == 1 && input[0].is_nonterminal() &&
         input[0] == output[0];
}

std::string Rule::ToString() const {
  return qcfg::ToString(input) + " ### " + qcfg::ToString(output);
}

Rule Rule::Parse(std::string_view text) {
  auto pos = text.find("###");
  if (pos == std::string_view::npos) throw DataError("missing ### separator");
  if (text.find("###", pos + 3) != std::string_view::npos)
    throw DataError("more than one ### separator");
  return Rule(ParseSequence(text.substr(0, pos), true),
              ParseSequence(text.substr(pos + 3), true));
}

size_t RuleHash::operator()(const Rule& r) const {
  uint64_t h = HashSymbols(r.input);
  h ^= 0x9e3779b97f4a7c15ull;
  h *= 1099511628211ull;
  return static_cast<size_t>(HashSymbols(r.output, h));
}

bool SerializationLess(const Rule& a, const Rule& b) {
  return a.ToString() < b.ToString();
}

std::optional<std::string> ValidateRule(const Rule& rule, int max_nonterminals,
                                        bool allow_repeated_indices) {
  if (rule.input.empty()) return "empty input side";
  if (rule.output.empty()) return "empty output side";
  int k = 0;
  std::vector<int> seen_in;
  for (Symbol s : rule.input) {
    if (!s.is_nonterminal()) continue;
    ++k;
    if (std::find(seen_in.begin(), seen_in.end(), s.index()) != seen_in.end())
      return "input side repeats NT_" + std::to_string(s.index());
    seen_in.push_back(s.index());
  }
  for (int i : seen_in)
    if (i > k) return "input indices do not form {1.." + std::to_string(k) + "}";
  if (k > max_nonterminals)
    return std::to_string(k) + " nonterminals exceeds maximum " +
           std::to_string(max_nonterminals);
  std::vector<int> out_count(k + 1, 0);
  for (Symbol s : rule.output) {
    if (!s.is_nonterminal()) continue;
    if (s.index() > k) return "output NT_" + std::to_string(s.index()) + " not on input side";
    if (++out_count[s.index()] > 1 && !allow_repeated_indices)
      return "output side repeats NT_" + std::to_string(s.index());
  }
  for (int i = 1; i <= k; ++i)
    if (out_count[i] == 0) return "NT_" + std::to_string(i) + " missing from output side";
  return std::nullopt;
}

bool IsCanonical(const Rule& rule) {
  int next = 1;
  for (Symbol s : rule.input) {
    if (!s.is_nonterminal()) continue;
    if (s.index() != next) return false;
    ++next;
  }
  return true;
}

Rule Canonicalize(const Rule& rule) {
  int max_index = 0;
  for (Symbol s : rule.input)
    if (s.is_nonterminal()) max_index = std::max(max_index, s.index());
  for (Symbol s : rule.output)
    if (s.is_nonterminal()) max_index = std::max(max_index, s.index());
  std::vector<int> map(max_index + 1, 0);
  int next = 1;
  for (Symbol s : rule.input)
    if (s.is_nonterminal() && map[s.index()] == 0) map[s.index()] = next++;
  // Output-only indices (invalid rules) keep a stable mapping after the
  // input-side ones.
  for (Symbol s : rule.output)
    if (s.is_nonterminal() && map[s.index()] == 0) map[s.index()] = next++;
  Rule out = rule;
  for (Symbol& s : out.input)
    if (s.is_nonterminal()) s = Symbol::Nonterminal(map[s.index()]);
  for (Symbol& s : out.output)
    if (s.is_nonterminal()) s = Symbol::Nonterminal(map[s.index()]);
  return out;
}

Rule Compose(const Rule& outer, const Rule& inner, int index, int max_nonterminals) {
  bool found = false;
  int outer_max = 0;
  for (Symbol s : outer.input) {
    if (!s.is_nonterminal()) continue;
    outer_max = std::max(outer_max, s.index());
    found |= s.index() == index;
  }
  if (!found)
    throw std::invalid_argument("compose: NT_" + std::to_string(index) +
                                " not on outer input side");
  auto shifted = [&](Symbol s) {
    return s.is_nonterminal() ? Symbol::Nonterminal(s.index() + outer_max) : s;
  };
  auto substitute = [&](const Sequence& host, const Sequence& filler) {
    Sequence out;
    out.reserve(host.size() + filler.size());
    for (Symbol s : host) {
      if (s.is_nonterminal() && s.index() == index) {
        for (Symbol f : filler) out.push_back(shifted(f));
      } else {
        out.push_back(s);
      }
    }
    return out;
  };
  Rule result = Canonicalize(Rule(substitute(outer.input, inner.input),
                                  substitute(outer.output, inner.output)));
  int k = result.Arity();
  if (k > max_nonterminals)
    throw CompositionOverflow("composition has " + std::to_string(k) +
                              " nonterminals, maximum is " + std::to_string(max_nonterminals));
  return result;
}

}  // namespace qcfg
