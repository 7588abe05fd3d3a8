#pragma once

#include <string>
#include <vector>

#include "qcfg/corpus.h"

namespace qcfg {

// Every command of the SCAN phrase-structure grammar (20,910), sorted.
std::vector<std::string> ScanCommands();

// Action sequence of a command; DataError on malformed input.
std::string ScanInterpret(const std::string& command);

struct ScanSplit {
  Corpus train;
  Corpus dev;
  Corpus test;
};

// Split names: simple, addprim_jump, addprim_turn_left, length, mcd1, mcd2,
// mcd3. The mcd splits hold out fixed compound patterns (see scan.cc);
// dev is empty except for mcd splits.
std::vector<std::string> ScanSplitNames();
ScanSplit MakeScanSplit(const std::string& name, uint64_t seed = 0);

}  // namespace qcfg
