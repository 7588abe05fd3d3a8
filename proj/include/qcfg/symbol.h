#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace qcfg {

using TokenId = int32_t;

// Process-wide token table. Interning is thread-safe and ids are stable.
TokenId InternToken(std::string_view text);
const std::string& TokenText(TokenId id);

// A terminal token or a linked nonterminal NT_k (k >= 1). There is a single
// nonterminal category, so the index is all a nonterminal carries.
class Symbol {
 public:
  constexpr Symbol() : value_(0) {}

  static Symbol Terminal(TokenId id) { return Symbol(id); }
  static Symbol Terminal(std::string_view text) {
    return Symbol(InternToken(text));
  }
  static constexpr Symbol Nonterminal(int index) { return Symbol(-index); }

  constexpr bool is_terminal() const { return value_ >= 0; }
  constexpr bool is_nonterminal() const { return value_ < 0; }
  constexpr TokenId token() const { return value_; }
  constexpr int index() const { return -value_; }
  constexpr int32_t raw() const { return value_; }

  friend constexpr auto operator<=>(Symbol, Symbol) = default;

 private:
  constexpr explicit Symbol(int32_t value) : value_(value) {}
  int32_t value_;
};

using Sequence = std::vector<Symbol>;

// "NT_3" -> 3, anything else -> 0.
int ParseNonterminalName(std::string_view text);
std::string SymbolText(Symbol s);

// Space-joined rendering; nonterminals print as NT_k.
std::string ToString(std::span<const Symbol> seq);

// Splits on whitespace. With allow_nonterminals, NT_k tokens become
// nonterminals; otherwise every token is a terminal.
Sequence ParseSequence(std::string_view text, bool allow_nonterminals);

Sequence Tokens(std::string_view text);

int CountNonterminals(std::span<const Symbol> seq);
int CountTerminals(std::span<const Symbol> seq);

struct SequenceHash {
  size_t operator()(std::span<const Symbol> seq) const;
  size_t operator()(const Sequence& seq) const {
    return (*this)(std::span<const Symbol>(seq));
  }
};

uint64_t HashSymbols(std::span<const Symbol> seq, uint64_t h = 1469598103934665603ull);

}  // namespace qcfg
