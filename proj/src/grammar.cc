#include "qcfg/grammar.h"

#include <cstdio>

#include "qcfg/errors.h"

namespace qcfg {

bool Grammar::Add(const Rule& rule) {
  if (auto err = ValidateRule(rule, config_.max_nonterminals, config_.allow_repeated_indices))
    throw DataError("invalid rule '" + rule.ToString() + "': " + *err);
  if (rule.IsIdentity()) throw DataError("identity rule NT_1 ### NT_1 is not allowed");
  Rule canonical = Canonicalize(rule);
  if (index_.count(canonical)) return false;
  index_.emplace(canonical, rules_.size());
  rules_.push_back(std::move(canonical));
  return true;
}

bool Grammar::Remove(const Rule& rule) {
  auto found = Find(rule);
  if (!found) return false;
  size_t pos = *found;
  index_.erase(rules_[pos]);
  rules_.erase(rules_.begin() + static_cast<ptrdiff_t>(pos));
  for (size_t i = pos; i < rules_.size(); ++i) index_[rules_[i]] = i;
  return true;
}

std::optional<size_t> Grammar::Find(const Rule& rule) const {
  auto it = index_.find(rule);
  if (it == index_.end() && !IsCanonical(rule)) it = index_.find(Canonicalize(rule));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

uint64_t Grammar::Fingerprint() const {
  uint64_t h = 1469598103934665603ull;
  for (const Rule& r : rules_) {
    for (char c : r.ToString()) {
      h ^= static_cast<unsigned char>(c);
      h *= 1099511628211ull;
    }
    h ^= '\n';
    h *= 1099511628211ull;
  }
  return h;
}

std::string FingerprintHex(uint64_t fingerprint) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fingerprint));
  return buf;
}

}  // namespace qcfg
