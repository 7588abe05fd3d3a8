#include "qcfg/occurrence.h"

#include <algorithm>
#include <numeric>

#include "qcfg/chart_parser.h"
#include "qcfg/rng.h"

namespace qcfg {

size_t Bitset::Count() const {
  size_t n = 0;
  for (uint64_t w : words_) n += static_cast<size_t>(__builtin_popcountll(w));
  return n;
}

Bitset& Bitset::operator&=(const Bitset& o) {
  for (size_t i = 0; i < words_.size(); ++i) words_[i] &= o.words_[i];
  return *this;
}

size_t Bitset::AndCount(const Bitset& a, const Bitset& b) {
  size_t n = 0;
  for (size_t i = 0; i < a.words_.size(); ++i)
    n += static_cast<size_t>(__builtin_popcountll(a.words_[i] & b.words_[i]));
  return n;
}

namespace {

const Sequence& SideOf(const ExamplePair& e, Side side) {
  return side == Side::kInput ? e.input : e.output;
}

}  // namespace

OccurrenceIndex::OccurrenceIndex(const Corpus& corpus, std::vector<size_t> rows)
    : corpus_(&corpus), rows_(std::move(rows)) {
  for (int s = 0; s < 2; ++s) {
    for (size_t r = 0; r < rows_.size(); ++r) {
      for (Symbol sym : SideOf(corpus.examples[rows_[r]], static_cast<Side>(s))) {
        auto [it, inserted] = postings_[s].try_emplace(sym.token(), rows_.size());
        it->second.Set(r);
      }
    }
  }
}

Bitset OccurrenceIndex::Occurrences(std::span<const Symbol> pattern, Side side) const {
  const auto& postings = postings_[static_cast<int>(side)];
  Bitset candidates(rows_.size());
  bool constrained = false;
  for (Symbol s : pattern) {
    if (!s.is_terminal()) continue;
    auto it = postings.find(s.token());
    if (it == postings.end()) return Bitset(rows_.size());
    if (!constrained) {
      candidates = it->second;
      constrained = true;
    } else {
      candidates &= it->second;
    }
  }
  Bitset out(rows_.size());
  auto check = [&](size_t r) {
    if (OccursIn(pattern, SideOf(corpus_->examples[rows_[r]], side), true)) out.Set(r);
  };
  if (constrained) {
    candidates.ForEach(check);
  } else {
    for (size_t r = 0; r < rows_.size(); ++r) check(r);
  }
  return out;
}

namespace {

std::vector<size_t> SampleRows(size_t n, size_t sample_size, uint64_t seed) {
  std::vector<size_t> rows(n);
  std::iota(rows.begin(), rows.end(), size_t{0});
  if (sample_size == 0 || sample_size >= n) return rows;
  // Partial Fisher-Yates, then restore corpus order for locality.
  Rng rng(seed);
  for (size_t i = 0; i < sample_size; ++i) std::swap(rows[i], rows[i + rng.Below(n - i)]);
  rows.resize(sample_size);
  std::sort(rows.begin(), rows.end());
  return rows;
}

}  // namespace

OccurrenceStats::OccurrenceStats(const Corpus& corpus, size_t sample_size, uint64_t seed)
    : index_(corpus, SampleRows(corpus.size(), sample_size, seed)) {}

const Bitset& OccurrenceStats::Occurrences(std::span<const Symbol> pattern, Side side) const {
  auto& cache = cache_[static_cast<int>(side)];
  Sequence key(pattern.begin(), pattern.end());
  {
    std::lock_guard lock(mu_);
    auto it = cache.find(key);
    if (it != cache.end()) return *it->second;
  }
  auto computed = std::make_unique<Bitset>(index_.Occurrences(pattern, side));
  std::lock_guard lock(mu_);
  auto [it, inserted] = cache.try_emplace(std::move(key), std::move(computed));
  return *it->second;
}

double Phat(std::span<const Symbol> sigma_a, Side side_a, std::span<const Symbol> sigma_b,
            Side side_b, const OccurrenceStats& stats) {
  const Bitset& b = stats.Occurrences(sigma_b, side_b);
  size_t denom = b.Count();
  if (denom == 0) return 0.0;
  const Bitset& a = stats.Occurrences(sigma_a, side_a);
  return static_cast<double>(Bitset::AndCount(a, b)) / static_cast<double>(denom);
}

}  // namespace qcfg
