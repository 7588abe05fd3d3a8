#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <span>
#include <unordered_map>
#include <vector>

#include "qcfg/corpus.h"

namespace qcfg {

enum class Side { kInput, kOutput };

class Bitset {
 public:
  Bitset() = default;
  explicit Bitset(size_t n) : n_(n), words_((n + 63) / 64, 0) {}

  void Set(size_t i) { words_[i >> 6] |= uint64_t{1} << (i & 63); }
  bool Test(size_t i) const { return (words_[i >> 6] >> (i & 63)) & 1; }
  size_t size() const { return n_; }
  size_t Count() const;
  Bitset& operator&=(const Bitset& o);
  static size_t AndCount(const Bitset& a, const Bitset& b);

  template <typename Fn>
  void ForEach(Fn fn) const {
    for (size_t w = 0; w < words_.size(); ++w) {
      uint64_t bits = words_[w];
      while (bits) {
        fn(w * 64 + static_cast<size_t>(__builtin_ctzll(bits)));
        bits &= bits - 1;
      }
    }
  }

 private:
  size_t n_ = 0;
  std::vector<uint64_t> words_;
};

// Token-postings index over a fixed list of corpus rows, answering "in which
// rows does this pattern occur" (OccursIn semantics).
class OccurrenceIndex {
 public:
  OccurrenceIndex(const Corpus& corpus, std::vector<size_t> rows);

  size_t size() const { return rows_.size(); }
  size_t example(size_t row) const { return rows_[row]; }
  Bitset Occurrences(std::span<const Symbol> pattern, Side side) const;

 private:
  const Corpus* corpus_;
  std::vector<size_t> rows_;
  std::unordered_map<TokenId, Bitset> postings_[2];
};

// Occurrence counts behind p-hat, over the whole corpus or a uniform sample
// of it. Query results are cached; safe for concurrent use.
class OccurrenceStats {
 public:
  // sample_size == 0 or >= corpus size: exact.
  OccurrenceStats(const Corpus& corpus, size_t sample_size, uint64_t seed);

  size_t num_examples() const { return index_.size(); }
  const Bitset& Occurrences(std::span<const Symbol> pattern, Side side) const;
  size_t Count(std::span<const Symbol> pattern, Side side) const {
    return Occurrences(pattern, side).Count();
  }

 private:
  OccurrenceIndex index_;
  mutable std::mutex mu_;
  mutable std::unordered_map<Sequence, std::unique_ptr<Bitset>, SequenceHash> cache_[2];
};

// Fraction of examples where sigma_a occurs on side_a among those where
// sigma_b occurs on side_b; 0 when sigma_b never occurs.
double Phat(std::span<const Symbol> sigma_a, Side side_a, std::span<const Symbol> sigma_b,
            Side side_b, const OccurrenceStats& stats);

}  // namespace qcfg
