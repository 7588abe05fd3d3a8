#include "qcfg/unify.h"

#include <algorithm>

namespace qcfg {
namespace {

constexpr int kNoLimit = 1 << 20;
// Cap on subsets of output occurrences tried when r2 is the inner rule.
constexpr size_t kMaxOccurrenceSubsets = 4096;

bool SameShape(Symbol a, Symbol b) {
  return a.is_terminal() ? a == b : b.is_nonterminal();
}

int MaxIndex(const Rule& r) {
  int m = 0;
  for (Symbol s : r.input)
    if (s.is_nonterminal()) m = std::max(m, s.index());
  for (Symbol s : r.output)
    if (s.is_nonterminal()) m = std::max(m, s.index());
  return m;
}

void Keep(const Rule& candidate, int max_nts, std::vector<Rule>* out,
          const auto& composes_to_r1) {
  Rule r3 = Canonicalize(candidate);
  if (ValidateRule(r3, kNoLimit, true)) return;
  if (r3.Arity() > max_nts) return;
  if (composes_to_r1(r3)) out->push_back(std::move(r3));
}

// r1 = compose(r2, r3, i).
void OuterCase(const Rule& r1, const Rule& r2, int max_nts, std::vector<Rule>* out) {
  const auto& a1 = r1.input;
  const auto& a2 = r2.input;
  if (a1.size() < a2.size() || r1.output.size() < r2.output.size()) return;
  size_t mid = a1.size() - a2.size() + 1;
  for (size_t p = 0; p < a2.size(); ++p) {
    if (!a2[p].is_nonterminal()) continue;
    int i = a2[p].index();
    bool ok = true;
    for (size_t t = 0; t < p && ok; ++t) ok = SameShape(a2[t], a1[t]);
    for (size_t t = p + 1; t < a2.size() && ok; ++t) ok = SameShape(a2[t], a1[t + mid - 1]);
    if (!ok) continue;
    Sequence m(a1.begin() + p, a1.begin() + p + mid);

    size_t copies = static_cast<size_t>(std::count(r2.output.begin(), r2.output.end(), a2[p]));
    if (copies == 0) continue;
    size_t rest = r2.output.size() - copies;
    size_t total = r1.output.size() - rest;
    if (total % copies != 0 || total / copies == 0) continue;
    size_t len = total / copies;
    Sequence block;
    bool have_block = false;
    size_t q = 0;
    for (Symbol s : r2.output) {
      if (s == a2[p]) {
        Sequence b(r1.output.begin() + q, r1.output.begin() + q + len);
        if (!have_block) {
          block = std::move(b);
          have_block = true;
        } else if (b != block) {
          ok = false;
          break;
        }
        q += len;
      } else {
        if (!SameShape(s, r1.output[q])) {
          ok = false;
          break;
        }
        ++q;
      }
    }
    if (!ok) continue;
    Keep(Rule(std::move(m), std::move(block)), max_nts, out, [&](const Rule& r3) {
      return Compose(r2, r3, i, kNoLimit) == r1;
    });
  }
}

// r1 = compose(r3, r2, j).
void InnerCase(const Rule& r1, const Rule& r2, int max_nts, std::vector<Rule>* out) {
  const auto& a1 = r1.input;
  const auto& a2 = r2.input;
  if (a1.size() < a2.size() || r1.output.size() < r2.output.size()) return;
  const Symbol fresh = Symbol::Nonterminal(MaxIndex(r1) + 1);
  for (size_t p = 0; p + a2.size() <= a1.size(); ++p) {
    std::vector<int> map(MaxIndex(r2) + 1, 0);
    bool ok = true;
    for (size_t t = 0; t < a2.size() && ok; ++t) {
      ok = SameShape(a2[t], a1[p + t]);
      if (ok && a2[t].is_nonterminal()) map[a2[t].index()] = a1[p + t].index();
    }
    if (!ok) continue;
    Sequence q;
    for (Symbol s : r2.output) {
      if (s.is_terminal()) {
        q.push_back(s);
      } else {
        if (map[s.index()] == 0) {
          ok = false;
          break;
        }
        q.push_back(Symbol::Nonterminal(map[s.index()]));
      }
    }
    if (!ok) continue;

    Sequence alpha(a1.begin(), a1.begin() + p);
    alpha.push_back(fresh);
    alpha.insert(alpha.end(), a1.begin() + p + a2.size(), a1.end());
    int j = 1 + CountNonterminals(std::span<const Symbol>(a1.data(), p));

    const auto& b1 = r1.output;
    std::vector<size_t> occ;
    for (size_t s = 0; s + q.size() <= b1.size(); ++s)
      if (std::equal(q.begin(), q.end(), b1.begin() + s)) occ.push_back(s);
    if (occ.empty()) continue;

    auto emit = [&](const std::vector<size_t>& chosen) {
      Sequence beta;
      size_t c = 0;
      for (size_t s = 0; s < b1.size();) {
        if (c < chosen.size() && chosen[c] == s) {
          beta.push_back(fresh);
          s += q.size();
          ++c;
        } else {
          beta.push_back(b1[s++]);
        }
      }
      Keep(Rule(alpha, std::move(beta)), max_nts, out, [&](const Rule& r3) {
        return Compose(r3, r2, j, kNoLimit) == r1;
      });
    };

    // Non-empty sets of pairwise non-overlapping occurrences.
    std::vector<size_t> chosen;
    size_t emitted = 0;
    auto rec = [&](auto&& self, size_t from) -> void {
      for (size_t o = from; o < occ.size() && emitted < kMaxOccurrenceSubsets; ++o) {
        if (!chosen.empty() && occ[o] < chosen.back() + q.size()) continue;
        chosen.push_back(occ[o]);
        emit(chosen);
        ++emitted;
        self(self, o + 1);
        chosen.pop_back();
      }
    };
    rec(rec, 0);
  }
}

}  // namespace

std::vector<Rule> Unify(const Rule& r1, const Rule& r2, int max_nonterminals) {
  std::vector<Rule> out;
  OuterCase(r1, r2, max_nonterminals, &out);
  InnerCase(r1, r2, max_nonterminals, &out);
  std::vector<std::pair<std::string, size_t>> keys;
  keys.reserve(out.size());
  for (size_t i = 0; i < out.size(); ++i) keys.emplace_back(out[i].ToString(), i);
  std::sort(keys.begin(), keys.end());
  std::vector<Rule> sorted;
  for (size_t i = 0; i < keys.size(); ++i) {
    if (i > 0 && keys[i].first == keys[i - 1].first) continue;
    sorted.push_back(out[keys[i].second]);
  }
  return sorted;
}

}  // namespace qcfg
