#pragma once

#include <vector>

#include "qcfg/rule.h"

namespace qcfg {

// All canonical r3 with at most max_nonterminals nonterminals such that
// compose(r2, r3, i) == r1 or compose(r3, r2, j) == r1 for some index.
// Sorted by text serialization.
std::vector<Rule> Unify(const Rule& r1, const Rule& r2, int max_nonterminals);

}  // namespace qcfg
