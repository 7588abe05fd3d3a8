#include "qcfg/output_cfg.h"

#include <algorithm>
#include <cctype>
#include <map>
#include <sstream>
#include <unordered_set>

#include "qcfg/errors.h"
#include "qcfg/text_io.h"

namespace qcfg {

CategorySet CategorySet::All(int n) {
  CategorySet s(n);
  for (int c = 0; c < n; ++c) s.Set(c);
  return s;
}

CategorySet CategorySet::Single(int n, int c) {
  CategorySet s(n);
  s.Set(c);
  return s;
}

bool CategorySet::Empty() const {
  for (uint64_t w : words_)
    if (w) return false;
  return true;
}

CategorySet CategorySet::Intersect(const CategorySet& o) const {
  CategorySet out(n_);
  for (size_t i = 0; i < words_.size(); ++i) out.words_[i] = words_[i] & o.words_[i];
  return out;
}

std::vector<int> CategorySet::Members() const {
  std::vector<int> out;
  for (int c = 0; c < n_; ++c)
    if (Test(c)) out.push_back(c);
  return out;
}

size_t CategorySet::Hash() const {
  uint64_t h = 1469598103934665603ull ^ static_cast<uint64_t>(n_);
  for (uint64_t w : words_) {
    h ^= w;
    h *= 1099511628211ull;
  }
  return static_cast<size_t>(h);
}

namespace {

bool IsIdentifier(std::string_view s) {
  if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
  for (char c : s)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.'))
      return false;
  return true;
}

std::vector<std::string> SplitWs(std::string_view line) {
  std::vector<std::string> out;
  std::istringstream in{std::string(line)};
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

}  // namespace

OutputCfg OutputCfg::Parse(std::string_view text, const std::string& source) {
  OutputCfg cfg;
  std::map<std::string, int, std::less<>> ids;
  auto category = [&](const std::string& name) {
    auto it = ids.find(name);
    if (it != ids.end()) return it->second;
    int id = static_cast<int>(cfg.names_.size());
    ids.emplace(name, id);
    cfg.names_.push_back(name);
    return id;
  };
  std::vector<char> has_production;
  std::map<int, size_t> first_use_line;
  std::string start_name;
  size_t start_line = 0;
  bool first = true;
  std::istringstream in{std::string(text)};
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto toks = SplitWs(line);
    if (toks.empty() || toks[0][0] == '#') continue;
    auto where = source + ":" + std::to_string(lineno) + ": ";
    if (toks[0] == "@start") {
      if (toks.size() != 2 || !IsIdentifier(toks[1]))
        throw DataError(where + "expected '@start NAME'");
      start_name = toks[1];
      start_line = lineno;
      continue;
    }
    if (toks.size() < 2 || toks[1] != "->" || !IsIdentifier(toks[0]))
      throw DataError(where + "expected 'LHS -> symbols'");
    int lhs = category(toks[0]);
    if (first) {
      cfg.start_ = lhs;
      first = false;
    }
    if (has_production.size() <= static_cast<size_t>(lhs)) has_production.resize(lhs + 1, 0);
    has_production[lhs] = 1;
    Production prod;
    prod.lhs = lhs;
    auto flush = [&] {
      cfg.productions_.push_back(prod);
      prod.rhs.clear();
    };
    for (size_t t = 2; t < toks.size(); ++t) {
      const std::string& tok = toks[t];
      if (tok == "|") {
        flush();
        continue;
      }
      Item item;
      if (tok.size() >= 3 && tok.front() == '\'' && tok.back() == '\'') {
        item.terminal = true;
        item.token = InternToken(tok.substr(1, tok.size() - 2));
      } else if (IsIdentifier(tok)) {
        item.category = category(tok);
        first_use_line.try_emplace(item.category, lineno);
      } else {
        throw DataError(where + "bad symbol '" + tok + "'");
      }
      prod.rhs.push_back(item);
    }
    flush();
  }
  if (cfg.productions_.empty()) throw DataError(source + ": no productions");
  has_production.resize(cfg.names_.size(), 0);
  for (auto [c, l] : first_use_line)
    if (!has_production[c])
      throw DataError(source + ":" + std::to_string(l) + ": category '" + cfg.names_[c] +
                      "' has no productions");
  if (!start_name.empty()) {
    auto it = ids.find(start_name);
    if (it == ids.end() || !has_production[it->second])
      throw DataError(source + ":" + std::to_string(start_line) + ": start category '" +
                      start_name + "' has no productions");
    cfg.start_ = it->second;
  }
  cfg.Finalize();
  return cfg;
}

OutputCfg OutputCfg::Load(const std::string& path) { return Parse(ReadFileOrThrow(path), path); }

std::optional<int> OutputCfg::FindCategory(std::string_view name) const {
  for (size_t c = 0; c < names_.size(); ++c)
    if (names_[c] == name) return static_cast<int>(c);
  return std::nullopt;
}

void OutputCfg::Finalize() {
  int n = num_categories();
  by_lhs_.assign(n, {});
  for (size_t p = 0; p < productions_.size(); ++p)
    by_lhs_[productions_[p].lhs].push_back(static_cast<int>(p));
  nullable_.assign(n, 0);
  bool changed = true;
  while (changed) {
    changed = false;
    for (const auto& p : productions_) {
      if (nullable_[p.lhs]) continue;
      bool all = std::all_of(p.rhs.begin(), p.rhs.end(), [&](const Item& it) {
        return !it.terminal && nullable_[it.category];
      });
      if (all) {
        nullable_[p.lhs] = 1;
        changed = true;
      }
    }
  }
}

bool OutputCfg::Recognize(std::span<const Slot> slots, const CategorySet& starts) const {
  // Earley recognition. Virtual productions TOP_c -> c (ids P + c) seed the
  // chart for every start category.
  const int P = static_cast<int>(productions_.size());
  const int n = static_cast<int>(slots.size());
  auto rhs_size = [&](int p) { return p < P ? static_cast<int>(productions_[p].rhs.size()) : 1; };
  auto rhs_at = [&](int p, int d) {
    if (p < P) return productions_[p].rhs[d];
    Item it;
    it.category = p - P;
    return it;
  };
  auto lhs_of = [&](int p) { return p < P ? productions_[p].lhs : -1; };

  struct State {
    int prod, dot, origin;
  };
  std::vector<std::vector<State>> chart(n + 1);
  std::vector<std::unordered_set<uint64_t>> seen(n + 1);
  auto add = [&](int k, State s) {
    uint64_t key = (static_cast<uint64_t>(s.prod) << 40) | (static_cast<uint64_t>(s.dot) << 20) |
                   static_cast<uint64_t>(s.origin);
    if (seen[k].insert(key).second) chart[k].push_back(s);
  };
  for (int c : starts.Members()) add(0, State{P + c, 0, 0});

  for (int k = 0; k <= n; ++k) {
    for (size_t idx = 0; idx < chart[k].size(); ++idx) {
      State s = chart[k][idx];
      if (s.dot == rhs_size(s.prod)) {
        int a = lhs_of(s.prod);
        if (a < 0) continue;
        for (size_t j = 0; j < chart[s.origin].size(); ++j) {
          State t = chart[s.origin][j];
          if (t.dot < rhs_size(t.prod)) {
            Item next = rhs_at(t.prod, t.dot);
            if (!next.terminal && next.category == a) add(k, State{t.prod, t.dot + 1, t.origin});
          }
        }
        continue;
      }
      Item next = rhs_at(s.prod, s.dot);
      if (next.terminal) {
        if (k < n && !slots[k].wildcard && slots[k].token == next.token)
          add(k + 1, State{s.prod, s.dot + 1, s.origin});
        continue;
      }
      int b = next.category;
      for (int p : by_lhs_[b]) add(k, State{p, 0, k});
      if (nullable_[b]) add(k, State{s.prod, s.dot + 1, s.origin});
      if (k < n && slots[k].wildcard && slots[k].categories.Test(b))
        add(k + 1, State{s.prod, s.dot + 1, s.origin});
    }
  }
  for (const State& s : chart[n])
    if (s.prod >= P && s.dot == 1 && s.origin == 0) return true;
  return false;
}

bool CfgAccepts(const OutputCfg& cfg, std::span<const Symbol> y) {
  std::vector<OutputCfg::Slot> slots(y.size());
  for (size_t i = 0; i < y.size(); ++i) {
    if (y[i].is_nonterminal()) return false;
    slots[i].token = y[i].token();
  }
  return cfg.Recognize(slots, CategorySet::Single(cfg.num_categories(), cfg.start()));
}

namespace {

std::vector<OutputCfg::Slot> SlotsFor(const OutputCfg& cfg, std::span<const Symbol> beta) {
  std::vector<OutputCfg::Slot> slots(beta.size());
  for (size_t i = 0; i < beta.size(); ++i) {
    if (beta[i].is_terminal()) {
      slots[i].token = beta[i].token();
    } else {
      slots[i].wildcard = true;
      slots[i].categories = CategorySet::All(cfg.num_categories());
    }
  }
  return slots;
}

}  // namespace

bool RuleOutputValid(const OutputCfg& cfg, std::span<const Symbol> beta, bool consistent_indices) {
  const int C = cfg.num_categories();
  auto slots = SlotsFor(cfg, beta);
  CategorySet all = CategorySet::All(C);
  if (!consistent_indices || CountNonterminals(beta) == 0) return cfg.Recognize(slots, all);
  int k = 0;
  for (Symbol s : beta)
    if (s.is_nonterminal()) k = std::max(k, s.index());
  std::vector<int> assign(k + 1, 0);
  while (true) {
    for (size_t i = 0; i < beta.size(); ++i)
      if (beta[i].is_nonterminal())
        slots[i].categories = CategorySet::Single(C, assign[beta[i].index()]);
    if (cfg.Recognize(slots, all)) return true;
    int a = 1;
    while (a <= k && ++assign[a] == C) assign[a++] = 0;
    if (a > k) return false;
  }
}

std::optional<std::vector<CategorySet>> CompatibleCategories(const OutputCfg& cfg,
                                                             std::span<const Symbol> beta,
                                                             const CategorySet& parents) {
  const int C = cfg.num_categories();
  auto slots = SlotsFor(cfg, beta);
  if (!cfg.Recognize(slots, parents)) return std::nullopt;
  int k = 0;
  for (Symbol s : beta)
    if (s.is_nonterminal()) k = std::max(k, s.index());
  std::vector<CategorySet> out(k + 1, CategorySet::All(C));
  for (size_t i = 0; i < beta.size(); ++i) {
    if (beta[i].is_terminal()) continue;
    CategorySet ok(C);
    for (int c = 0; c < C; ++c) {
      slots[i].categories = CategorySet::Single(C, c);
      if (cfg.Recognize(slots, parents)) ok.Set(c);
    }
    slots[i].categories = CategorySet::All(C);
    out[beta[i].index()] = out[beta[i].index()].Intersect(ok);
  }
  for (int a = 1; a <= k; ++a)
    if (out[a].Empty()) return std::nullopt;
  return out;
}

}  // namespace qcfg
