#include "qcfg/chart_parser.h"

#include <algorithm>
#include <array>
#include <stdexcept>
#include <string>

#include "qcfg/errors.h"

namespace qcfg {

struct ChartParser::CompiledRule {
  Rule rule;
  uint32_t id = 0;
  int arity = 0;
  bool input_unary = false;
  std::vector<TokenId> input_terminals;   // distinct, sorted
  std::vector<TokenId> output_terminals;  // distinct, sorted
};

namespace {

constexpr int32_t kFail = -1;
constexpr int32_t kPending = -2;
constexpr int kMaxArity = 15;
constexpr uint32_t kVariableRule = 0xffffffffu;

using CompiledRule = ChartParser::CompiledRule;

std::vector<TokenId> DistinctTerminals(std::span<const Symbol> seq) {
  std::vector<TokenId> out;
  for (Symbol s : seq)
    if (s.is_terminal()) out.push_back(s.token());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

bool Subset(const std::vector<TokenId>& small, const std::vector<TokenId>& big) {
  return std::includes(big.begin(), big.end(), small.begin(), small.end());
}

struct PendingEdge {
  uint32_t rule;
  uint8_t arity;
  std::array<int32_t, kMaxArity + 1> child;
};

}  // namespace

class ForestBuilder {
 public:
  explicit ForestBuilder(bool has_output) { forest_.has_output_ = has_output; }

  int32_t AddNode(Span in, Span out, const std::vector<PendingEdge>& edges) {
    DerivationForest::Node node;
    node.input = in;
    node.output = out;
    node.edge_begin = static_cast<uint32_t>(forest_.edges_.size());
    for (const auto& e : edges) {
      DerivationForest::Edge edge;
      edge.rule = e.rule;
      edge.child_begin = static_cast<uint32_t>(forest_.children_.size());
      for (int a = 1; a <= e.arity; ++a)
        forest_.children_.push_back(static_cast<uint32_t>(e.child[a]));
      edge.child_end = static_cast<uint32_t>(forest_.children_.size());
      forest_.edges_.push_back(edge);
    }
    node.edge_end = static_cast<uint32_t>(forest_.edges_.size());
    forest_.nodes_.push_back(node);
    return static_cast<int32_t>(forest_.nodes_.size() - 1);
  }

  // Drops nodes unreachable from root and renumbers; root ends up last.
  DerivationForest Finish(int32_t root) {
    const auto& nodes = forest_.nodes_;
    std::vector<char> keep(nodes.size(), 0);
    keep[root] = 1;
    for (size_t v = nodes.size(); v-- > 0;) {
      if (!keep[v]) continue;
      for (uint32_t e = nodes[v].edge_begin; e < nodes[v].edge_end; ++e) {
        const auto& edge = forest_.edges_[e];
        for (uint32_t c = edge.child_begin; c < edge.child_end; ++c)
          keep[forest_.children_[c]] = 1;
      }
    }
    DerivationForest out;
    out.has_output_ = forest_.has_output_;
    std::vector<uint32_t> remap(nodes.size(), 0);
    for (size_t v = 0; v <= static_cast<size_t>(root); ++v) {
      if (!keep[v]) continue;
      remap[v] = static_cast<uint32_t>(out.nodes_.size());
      DerivationForest::Node node = nodes[v];
      node.edge_begin = static_cast<uint32_t>(out.edges_.size());
      for (uint32_t e = nodes[v].edge_begin; e < nodes[v].edge_end; ++e) {
        DerivationForest::Edge edge = forest_.edges_[e];
        uint32_t begin = static_cast<uint32_t>(out.children_.size());
        for (uint32_t c = edge.child_begin; c < edge.child_end; ++c)
          out.children_.push_back(remap[forest_.children_[c]]);
        edge.child_begin = begin;
        edge.child_end = static_cast<uint32_t>(out.children_.size());
        out.edges_.push_back(edge);
      }
      node.edge_end = static_cast<uint32_t>(out.edges_.size());
      out.nodes_.push_back(node);
    }
    return out;
  }

 private:
  DerivationForest forest_;
};

namespace {

// Memoized top-down search over (input span, output span) items.
class PairSearch {
 public:
  PairSearch(std::span<const Symbol> x, std::span<const Symbol> y,
             const std::vector<const CompiledRule*>& rules, size_t max_items,
             bool recognize, bool variables)
      : x_(x), y_(y), rules_(rules), max_items_(max_items), recognize_(recognize),
        variables_(variables), builder_(true) {}

  int32_t Visit(int i, int j, int k, int l) {
    uint64_t key = (static_cast<uint64_t>(i) << 48) | (static_cast<uint64_t>(j) << 32) |
                   (static_cast<uint64_t>(k) << 16) | static_cast<uint64_t>(l);
    auto [it, inserted] = memo_.try_emplace(key, kPending);
    if (!inserted) return it->second == kPending ? kFail : it->second;
    if (memo_.size() > max_items_)
      throw CapacityError("chart item limit of " + std::to_string(max_items_) + " exceeded");

    std::vector<PendingEdge> edges;
    bool done = false;
    if (variables_ && j - i == 1 && l - k == 1 && x_[i].is_nonterminal() && x_[i] == y_[k]) {
      edges.push_back(PendingEdge{kVariableRule, 0, {}});
      done = recognize_;
    }
    for (size_t r = 0; r < rules_.size() && !done; ++r) {
      const CompiledRule& rule = *rules_[r];
      if (!Feasible(rule, i, j, k, l)) continue;
      Frame f{&rule, i, j, k, l, &edges, {}, {}, {}, {}};
      done = MatchInput(f, 0, i);
    }
    int32_t result = kFail;
    if (!edges.empty())
      result = recognize_ ? 0 : builder_.AddNode(Span{uint16_t(i), uint16_t(j)},
                                                 Span{uint16_t(k), uint16_t(l)}, edges);
    memo_[key] = result;
    return result;
  }

  DerivationForest Finish(int32_t root) { return builder_.Finish(root); }

 private:
  struct Frame {
    const CompiledRule* rule;
    int i, j, k, l;
    std::vector<PendingEdge>* edges;
    std::array<Span, kMaxArity + 1> in;
    std::array<Span, kMaxArity + 1> out;
    std::array<int32_t, kMaxArity + 1> child;
    std::array<bool, kMaxArity + 1> bound;
  };

  bool Feasible(const CompiledRule& r, int i, int j, int k, int l) const {
    const auto& a = r.rule.input;
    const auto& b = r.rule.output;
    int n = j - i, m = l - k;
    if (static_cast<int>(a.size()) > n || static_cast<int>(b.size()) > m) return false;
    if (r.arity == 0 && (static_cast<int>(a.size()) != n || static_cast<int>(b.size()) != m))
      return false;
    if (a.front().is_terminal() && x_[i] != a.front()) return false;
    if (a.back().is_terminal() && x_[j - 1] != a.back()) return false;
    if (b.front().is_terminal() && y_[k] != b.front()) return false;
    if (b.back().is_terminal() && y_[l - 1] != b.back()) return false;
    return true;
  }

  bool MatchInput(Frame& f, size_t p, int q) {
    const auto& a = f.rule->rule.input;
    if (p == a.size()) return q == f.j && MatchOutput(f, 0, f.k);
    Symbol s = a[p];
    if (s.is_terminal()) return q < f.j && x_[q] == s && MatchInput(f, p + 1, q + 1);
    int max_end = f.j - static_cast<int>(a.size() - p - 1);
    bool next_terminal = p + 1 < a.size() && a[p + 1].is_terminal();
    for (int e = q + 1; e <= max_end; ++e) {
      if (next_terminal && (e >= f.j || x_[e] != a[p + 1])) continue;
      f.in[s.index()] = Span{uint16_t(q), uint16_t(e)};
      if (MatchInput(f, p + 1, e)) return true;
    }
    return false;
  }

  bool MatchOutput(Frame& f, size_t p, int q) {
    const auto& b = f.rule->rule.output;
    if (p == b.size()) {
      if (q != f.l) return false;
      PendingEdge edge{f.rule->id, static_cast<uint8_t>(f.rule->arity), {}};
      for (int a = 1; a <= f.rule->arity; ++a) edge.child[a] = f.child[a];
      f.edges->push_back(edge);
      return recognize_;
    }
    Symbol s = b[p];
    if (s.is_terminal()) return q < f.l && y_[q] == s && MatchOutput(f, p + 1, q + 1);
    int idx = s.index();
    if (f.bound[idx]) {
      Span prev = f.out[idx];
      int len = prev.size();
      if (q + len > f.l) return false;
      if (!std::equal(y_.begin() + prev.begin, y_.begin() + prev.end, y_.begin() + q))
        return false;
      return MatchOutput(f, p + 1, q + len);
    }
    int max_end = f.l - static_cast<int>(b.size() - p - 1);
    bool next_terminal = p + 1 < b.size() && b[p + 1].is_terminal();
    Span in = f.in[idx];
    for (int e = q + 1; e <= max_end; ++e) {
      if (next_terminal && (e >= f.l || y_[e] != b[p + 1])) continue;
      int32_t c = Visit(in.begin, in.end, q, e);
      if (c < 0) continue;
      f.bound[idx] = true;
      f.out[idx] = Span{uint16_t(q), uint16_t(e)};
      f.child[idx] = c;
      bool stop = MatchOutput(f, p + 1, e);
      f.bound[idx] = false;
      if (stop) return true;
    }
    return false;
  }

  std::span<const Symbol> x_, y_;
  const std::vector<const CompiledRule*>& rules_;
  size_t max_items_;
  bool recognize_;
  bool variables_;
  std::unordered_map<uint64_t, int32_t> memo_;
  ForestBuilder builder_;
};

// Input-side items (span, remaining unary budget).
class InputSearch {
 public:
  InputSearch(std::span<const Symbol> x, const std::vector<const CompiledRule*>& rules,
              size_t max_items, int max_unary)
      : x_(x), rules_(rules), max_items_(max_items), max_unary_(max_unary), builder_(false) {}

  int32_t Visit(int i, int j, int budget) {
    uint64_t key = (static_cast<uint64_t>(i) << 40) | (static_cast<uint64_t>(j) << 20) |
                   static_cast<uint64_t>(budget);
    auto [it, inserted] = memo_.try_emplace(key, kPending);
    if (!inserted) return it->second == kPending ? kFail : it->second;
    if (memo_.size() > max_items_)
      throw CapacityError("chart item limit of " + std::to_string(max_items_) + " exceeded");

    std::vector<PendingEdge> edges;
    for (const CompiledRule* r : rules_) {
      const auto& a = r->rule.input;
      if (r->input_unary) {
        if (budget == 0) continue;
        int32_t c = Visit(i, j, budget - 1);
        if (c < 0) continue;
        PendingEdge edge{r->id, 1, {}};
        edge.child[1] = c;
        edges.push_back(edge);
        continue;
      }
      int n = j - i;
      if (static_cast<int>(a.size()) > n) continue;
      if (r->arity == 0 && static_cast<int>(a.size()) != n) continue;
      if (a.front().is_terminal() && x_[i] != a.front()) continue;
      if (a.back().is_terminal() && x_[j - 1] != a.back()) continue;
      Frame f{r, j, &edges, {}};
      Match(f, 0, i);
    }
    int32_t result = kFail;
    if (!edges.empty())
      result = builder_.AddNode(Span{uint16_t(i), uint16_t(j)}, Span{}, edges);
    memo_[key] = result;
    return result;
  }

  DerivationForest Finish(int32_t root) { return builder_.Finish(root); }
  int max_unary() const { return max_unary_; }

 private:
  struct Frame {
    const CompiledRule* rule;
    int j;
    std::vector<PendingEdge>* edges;
    std::array<Span, kMaxArity + 1> in;
  };

  void Match(Frame& f, size_t p, int q) {
    const auto& a = f.rule->rule.input;
    if (p == a.size()) {
      if (q != f.j) return;
      PendingEdge edge{f.rule->id, static_cast<uint8_t>(f.rule->arity), {}};
      for (int idx = 1; idx <= f.rule->arity; ++idx) {
        int32_t c = Visit(f.in[idx].begin, f.in[idx].end, max_unary_);
        if (c < 0) return;
        edge.child[idx] = c;
      }
      f.edges->push_back(edge);
      return;
    }
    Symbol s = a[p];
    if (s.is_terminal()) {
      if (q < f.j && x_[q] == s) Match(f, p + 1, q + 1);
      return;
    }
    int max_end = f.j - static_cast<int>(a.size() - p - 1);
    bool next_terminal = p + 1 < a.size() && a[p + 1].is_terminal();
    for (int e = q + 1; e <= max_end; ++e) {
      if (next_terminal && (e >= f.j || x_[e] != a[p + 1])) continue;
      f.in[s.index()] = Span{uint16_t(q), uint16_t(e)};
      Match(f, p + 1, e);
    }
  }

  std::span<const Symbol> x_;
  const std::vector<const CompiledRule*>& rules_;
  size_t max_items_;
  int max_unary_;
  std::unordered_map<uint64_t, int32_t> memo_;
  ForestBuilder builder_;
};

void CheckLength(size_t n) {
  if (n >= 0xffff) throw CapacityError("sequence of length " + std::to_string(n) + " is too long");
}

}  // namespace

ChartParser::ChartParser(const Grammar& grammar, ParserOptions options)
    : ChartParser(std::span<const Rule>(grammar.rules()), options) {}

ChartParser::ChartParser(std::span<const Rule> rules, ParserOptions options)
    : options_(options) {
  for (const Rule& r : rules) AddRule(r);
}

ChartParser::~ChartParser() = default;
ChartParser::ChartParser(ChartParser&&) noexcept = default;
ChartParser& ChartParser::operator=(ChartParser&&) noexcept = default;

void ChartParser::Compile(const Rule& rule, CompiledRule* out) const {
  out->rule = rule;
  out->arity = rule.Arity();
  if (out->arity > kMaxArity)
    throw std::invalid_argument("rule has more than " + std::to_string(kMaxArity) +
                                " nonterminals: " + rule.ToString());
  out->input_unary = rule.input.size() == 1 && rule.input[0].is_nonterminal();
  out->input_terminals = DistinctTerminals(rule.input);
  out->output_terminals = DistinctTerminals(rule.output);
}

uint32_t ChartParser::AddRule(const Rule& rule) {
  if (rule.input.empty() || rule.output.empty())
    throw std::invalid_argument("rule with an empty side: " + rule.ToString());
  auto compiled = std::make_unique<CompiledRule>();
  Compile(rule, compiled.get());
  uint32_t id = static_cast<uint32_t>(rules_.size());
  compiled->id = id;
  if (compiled->input_terminals.empty()) {
    no_input_terminals_.push_back(id);
  } else {
    for (TokenId t : compiled->input_terminals) input_postings_[t].push_back(id);
  }
  // The identity rule only adds cycles; it never contributes a new pair.
  enabled_.push_back(!rule.IsIdentity());
  rules_.push_back(std::move(compiled));
  return id;
}

void ChartParser::SetEnabled(uint32_t id, bool enabled) {
  enabled_.at(id) = enabled && !rules_[id]->rule.IsIdentity();
}

bool ChartParser::enabled(uint32_t id) const { return enabled_.at(id); }

size_t ChartParser::num_rules() const { return rules_.size(); }

const Rule& ChartParser::rule(uint32_t id) const { return rules_.at(id)->rule; }

std::vector<Rule> ChartParser::rules() const {
  std::vector<Rule> out;
  out.reserve(rules_.size());
  for (const auto& r : rules_) out.push_back(r->rule);
  return out;
}

void ChartParser::Candidates(std::span<const Symbol> x, std::span<const Symbol> y, bool pair,
                             const RuleFilter& filter, const std::vector<CompiledRule>& extra,
                             std::vector<const CompiledRule*>* out) const {
  std::vector<TokenId> xs = DistinctTerminals(x);
  std::vector<TokenId> ys = pair ? DistinctTerminals(y) : std::vector<TokenId>{};
  auto usable = [&](const CompiledRule& r) {
    if (r.rule.input.size() > x.size()) return false;
    if (pair && (r.rule.output.size() > y.size() || !Subset(r.output_terminals, ys)))
      return false;
    return Subset(r.input_terminals, xs);
  };
  auto disabled = [&](uint32_t id) {
    return !enabled_[id] ||
           std::binary_search(filter.disabled.begin(), filter.disabled.end(), id);
  };
  std::vector<uint32_t> ids(no_input_terminals_);
  for (TokenId t : xs) {
    auto it = input_postings_.find(t);
    if (it == input_postings_.end()) continue;
    for (uint32_t id : it->second) {
      // Visit each rule once: from the posting list of its smallest terminal.
      if (rules_[id]->input_terminals.front() == t) ids.push_back(id);
    }
  }
  std::sort(ids.begin(), ids.end());
  for (uint32_t id : ids) {
    if (disabled(id)) continue;
    const CompiledRule& r = *rules_[id];
    if (usable(r)) out->push_back(&r);
  }
  for (const CompiledRule& r : extra)
    if (!r.rule.IsIdentity() && usable(r)) out->push_back(&r);
}

std::optional<DerivationForest> ChartParser::ParsePair(const ExamplePair& pair) const {
  if (pair.input.empty() || pair.output.empty()) return std::nullopt;
  CheckLength(pair.input.size());
  CheckLength(pair.output.size());
  std::vector<const CompiledRule*> cands;
  std::vector<CompiledRule> none;
  Candidates(pair.input, pair.output, true, RuleFilter{}, none, &cands);
  PairSearch search(pair.input, pair.output, cands, options_.max_chart_items, false, false);
  int32_t root = search.Visit(0, int(pair.input.size()), 0, int(pair.output.size()));
  if (root < 0) return std::nullopt;
  return search.Finish(root);
}

std::optional<DerivationForest> ChartParser::ParseInput(std::span<const Symbol> input) const {
  if (input.empty()) return std::nullopt;
  CheckLength(input.size());
  std::vector<const CompiledRule*> cands;
  std::vector<CompiledRule> none;
  Candidates(input, {}, false, RuleFilter{}, none, &cands);
  InputSearch search(input, cands, options_.max_chart_items, options_.max_input_unary_chain);
  int32_t root = search.Visit(0, int(input.size()), search.max_unary());
  if (root < 0) return std::nullopt;
  return search.Finish(root);
}

bool ChartParser::CanDerive(const ExamplePair& pair) const {
  return CanDerive(pair.input, pair.output, RuleFilter{});
}

bool ChartParser::CanDerive(std::span<const Symbol> input, std::span<const Symbol> output,
                            const RuleFilter& filter) const {
  if (input.empty() || output.empty()) return false;
  CheckLength(input.size());
  CheckLength(output.size());
  std::vector<CompiledRule> extra(filter.extra.size());
  for (size_t e = 0; e < filter.extra.size(); ++e) {
    Compile(filter.extra[e], &extra[e]);
    extra[e].id = static_cast<uint32_t>(rules_.size() + e);
  }
  std::vector<const CompiledRule*> cands;
  Candidates(input, output, true, filter, extra, &cands);
  bool variables = CountNonterminals(input) > 0;
  PairSearch search(input, output, cands, options_.max_chart_items, true, variables);
  return search.Visit(0, int(input.size()), 0, int(output.size())) >= 0;
}

bool ChartParser::DerivesRule(const Rule& rule, const RuleFilter& filter) const {
  return CanDerive(rule.input, rule.output, filter);
}

double DerivationForest::CountDerivations() const {
  std::vector<double> count(nodes_.size(), 0.0);
  for (size_t v = 0; v < nodes_.size(); ++v) {
    double total = 0;
    for (const Edge& e : NodeEdges(static_cast<uint32_t>(v))) {
      double prod = 1;
      for (uint32_t c : EdgeChildren(e)) prod *= count[c];
      total += prod;
    }
    count[v] = total;
  }
  return nodes_.empty() ? 0.0 : count[root()];
}

std::vector<Derivation> DerivationForest::Enumerate(std::span<const Rule> rules,
                                                    size_t limit) const {
  std::vector<std::vector<Derivation>> memo(nodes_.size());
  for (size_t v = 0; v < nodes_.size(); ++v) {
    auto& out = memo[v];
    for (const Edge& e : NodeEdges(static_cast<uint32_t>(v))) {
      auto kids = EdgeChildren(e);
      std::vector<size_t> pos(kids.size(), 0);
      bool empty = false;
      for (uint32_t c : kids) empty |= memo[c].empty();
      if (empty) continue;
      while (out.size() < limit) {
        Derivation d(rules[e.rule]);
        for (size_t a = 0; a < kids.size(); ++a) d.children.push_back(memo[kids[a]][pos[a]]);
        out.push_back(std::move(d));
        size_t a = 0;
        while (a < kids.size() && ++pos[a] == memo[kids[a]].size()) pos[a++] = 0;
        if (a == kids.size()) break;
      }
    }
  }
  return nodes_.empty() ? std::vector<Derivation>{} : memo[root()];
}

namespace {

bool MatchAt(std::span<const Symbol> pattern, size_t p, std::span<const Symbol> text, size_t q,
             std::vector<Span>& bound) {
  if (p == pattern.size()) return true;
  Symbol s = pattern[p];
  if (s.is_terminal()) return q < text.size() && text[q] == s && MatchAt(pattern, p + 1, text, q + 1, bound);
  int idx = s.index();
  if (bound[idx].size() > 0) {
    Span b = bound[idx];
    if (q + b.size() > text.size()) return false;
    if (!std::equal(text.begin() + b.begin, text.begin() + b.end, text.begin() + q)) return false;
    return MatchAt(pattern, p + 1, text, q + b.size(), bound);
  }
  size_t remaining = pattern.size() - p - 1;
  for (size_t e = q + 1; e + remaining <= text.size(); ++e) {
    bound[idx] = Span{uint16_t(q), uint16_t(e)};
    if (MatchAt(pattern, p + 1, text, e, bound)) return true;
  }
  bound[idx] = Span{};
  return false;
}

}  // namespace

bool OccursIn(std::span<const Symbol> pattern, std::span<const Symbol> text,
              bool allow_repeated_indices) {
  if (pattern.empty()) throw std::invalid_argument("occurs_in: empty pattern");
  int max_index = 0;
  bool repeated = false;
  {
    std::vector<int> seen;
    for (Symbol s : pattern) {
      if (!s.is_nonterminal()) continue;
      max_index = std::max(max_index, s.index());
      if (std::find(seen.begin(), seen.end(), s.index()) != seen.end()) repeated = true;
      seen.push_back(s.index());
    }
  }
  if (repeated && !allow_repeated_indices)
    throw std::invalid_argument("occurs_in: input-side pattern repeats a nonterminal index");
  if (pattern.size() > text.size()) return false;

  if (!repeated) {
    // Terminal segments separated by nonterminal gaps; each gap needs at
    // least as many symbols as nonterminals in it. Leftmost placement of
    // every segment is optimal.
    size_t p = 0, q = 0;
    size_t gap = 0;
    while (p < pattern.size()) {
      if (pattern[p].is_nonterminal()) {
        ++gap;
        ++p;
        continue;
      }
      size_t seg_end = p;
      while (seg_end < pattern.size() && pattern[seg_end].is_terminal()) ++seg_end;
      size_t len = seg_end - p;
      size_t start = q + gap;
      bool found = false;
      for (; start + len <= text.size(); ++start) {
        if (std::equal(pattern.begin() + p, pattern.begin() + seg_end, text.begin() + start)) {
          found = true;
          break;
        }
      }
      if (!found) return false;
      q = start + len;
      gap = 0;
      p = seg_end;
    }
    return q + gap <= text.size();
  }

  std::vector<Span> bound(max_index + 1);
  for (size_t start = 0; start + pattern.size() <= text.size(); ++start) {
    std::fill(bound.begin(), bound.end(), Span{});
    if (MatchAt(pattern, 0, text, start, bound)) return true;
  }
  return false;
}

}  // namespace qcfg
