#include "qcfg/symbol.h"

#include <charconv>
#include <deque>
#include <mutex>
#include <shared_mutex>
#include <unordered_map>

#include "qcfg/errors.h"

namespace qcfg {
namespace {

struct TokenTable {
  std::shared_mutex mu;
  std::unordered_map<std::string, TokenId> ids;
  std::deque<std::string> texts;
};

TokenTable& Table() {
  static TokenTable* table = new TokenTable;
  return *table;
}

}  // namespace

TokenId InternToken(std::string_view text) {
  TokenTable& t = Table();
  {
    std::shared_lock lock(t.mu);
    auto it = t.ids.find(std::string(text));
    if (it != t.ids.end()) return it->second;
  }
  std::unique_lock lock(t.mu);
  auto [it, inserted] = t.ids.try_emplace(std::string(text), 0);
  if (inserted) {
    it->second = static_cast<TokenId>(t.texts.size());
    t.texts.emplace_back(text);
  }
  return it->second;
}

const std::string& TokenText(TokenId id) {
  TokenTable& t = Table();
  std::shared_lock lock(t.mu);
  return t.texts.at(static_cast<size_t>(id));
}

int ParseNonterminalName(std::string_view text) {
  if (text.size() < 4 || text.substr(0, 3) != "NT_") return 0;
  int value = 0;
  auto digits = text.substr(3);
  auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
  if (ec != std::errc() || ptr != digits.data() + digits.size() || value < 1) return 0;
  return value;
}

std::string SymbolText(Symbol s) {
  if (s.is_nonterminal()) return "NT_" + std::to_string(s.index());
  return TokenText(s.token());
}

std::string ToString(std::span<const Symbol> seq) {
  std::string out;
  for (size_t i = 0; i < seq.size(); ++i) {
    if (i) out += ' ';
    out += SymbolText(seq[i]);
  }
  return out;
}

Sequence ParseSequence(std::string_view text, bool allow_nonterminals) {
  Sequence out;
  size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && (text[i] == ' ' || text[i] == '\t' || text[i] == '\r' || text[i] == '\n')) ++i;
    size_t j = i;
    while (j < text.size() && text[j] != ' ' && text[j] != '\t' && text[j] != '\r' && text[j] != '\n') ++j;
    if (j > i) {
      auto tok = text.substr(i, j - i);
      int nt = allow_nonterminals ? ParseNonterminalName(tok) : 0;
      out.push_back(nt ? Symbol::Nonterminal(nt) : Symbol::Terminal(tok));
    }
    i = j;
  }
  return out;
}

Sequence Tokens(std::string_view text) { return ParseSequence(text, false); }

int CountNonterminals(std::span<const Symbol> seq) {
  int n = 0;
  for (Symbol s : seq) n += s.is_nonterminal();
  return n;
}

int CountTerminals(std::span<const Symbol> seq) {
  return static_cast<int>(seq.size()) - CountNonterminals(seq);
}

uint64_t HashSymbols(std::span<const Symbol> seq, uint64_t h) {
  for (Symbol s : seq) {
    h ^= static_cast<uint32_t>(s.raw());
    h *= 1099511628211ull;
  }
  return h;
}

size_t SequenceHash::operator()(std::span<const Symbol> seq) const {
  return static_cast<size_t>(HashSymbols(seq));
}

}  // namespace qcfg
