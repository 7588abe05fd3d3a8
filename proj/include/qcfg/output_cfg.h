#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qcfg/symbol.h"

namespace qcfg {

class CategorySet {
 public:
  CategorySet() = default;
  explicit CategorySet(int n) : n_(n), words_((n + 63) / 64, 0) {}
  static CategorySet All(int n);
  static CategorySet Single(int n, int c);

  void Set(int c) { words_[c >> 6] |= uint64_t{1} << (c & 63); }
  bool Test(int c) const { return (words_[c >> 6] >> (c & 63)) & 1; }
  bool Empty() const;
  int size() const { return n_; }
  CategorySet Intersect(const CategorySet& o) const;
  std::vector<int> Members() const;

  friend bool operator==(const CategorySet&, const CategorySet&) = default;
  size_t Hash() const;

 private:
  int n_ = 0;
  std::vector<uint64_t> words_;
};

// Plain CFG over output tokens. Text format, one production per line:
//   LHS -> sym sym ... | sym ...
// Categories are bare identifiers, terminals are single-quoted. The first
// LHS is the start symbol unless "@start NAME" appears.
class OutputCfg {
 public:
  struct Item {
    bool terminal = false;
    int category = -1;
    TokenId token = -1;
  };
  struct Production {
    int lhs = 0;
    std::vector<Item> rhs;
  };
  // One position of the string being recognized: a terminal, or a
  // placeholder that may stand for any complete phrase of the listed
  // categories.
  struct Slot {
    bool wildcard = false;
    TokenId token = -1;
    CategorySet categories;
  };

  static OutputCfg Parse(std::string_view text, const std::string& source);
  static OutputCfg Load(const std::string& path);

  int num_categories() const { return static_cast<int>(names_.size()); }
  const std::string& category_name(int c) const { return names_[c]; }
  std::optional<int> FindCategory(std::string_view name) const;
  int start() const { return start_; }
  const std::vector<Production>& productions() const { return productions_; }

  bool Recognize(std::span<const Slot> slots, const CategorySet& starts) const;

 private:
  void Finalize();

  std::vector<std::string> names_;
  std::vector<Production> productions_;
  std::vector<std::vector<int>> by_lhs_;
  std::vector<char> nullable_;
  int start_ = 0;
};

// Recognition from the start symbol; nonterminal symbols in y never match.
bool CfgAccepts(const OutputCfg& cfg, std::span<const Symbol> y);

// Whether some assignment of categories to beta's nonterminal occurrences
// makes beta derivable from some category. By default occurrences sharing an
// index are assigned independently.
bool RuleOutputValid(const OutputCfg& cfg, std::span<const Symbol> beta,
                     bool consistent_indices = false);

// For each nonterminal index 1..k of beta, the categories that index can take
// in some parse of beta from a category in `parents` (intersected across the
// index's occurrences). nullopt when beta is not derivable at all.
std::optional<std::vector<CategorySet>> CompatibleCategories(const OutputCfg& cfg,
                                                             std::span<const Symbol> beta,
                                                             const CategorySet& parents);

}  // namespace qcfg
