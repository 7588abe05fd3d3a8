#pragma once

#include <iosfwd>
#include <string>

#include "qcfg/corpus.h"
#include "qcfg/grammar.h"

namespace qcfg {

// TSV: "<x tokens>\t<y tokens>" per line. Errors name source:line.
Corpus ReadCorpus(std::istream& in, const std::string& source);
Corpus LoadCorpus(const std::string& path);
void WriteCorpus(std::ostream& out, const Corpus& corpus);
void SaveCorpus(const std::string& path, const Corpus& corpus);

// One input sequence per line (unlabeled data, parse input). A TSV line keeps
// only its first field.
std::vector<Sequence> ReadInputs(std::istream& in, const std::string& source);
std::vector<Sequence> LoadInputs(const std::string& path);

Grammar ReadGrammar(std::istream& in, const std::string& source, GrammarConfig config = {});
Grammar LoadGrammar(const std::string& path, GrammarConfig config = {});
void WriteGrammar(std::ostream& out, const Grammar& grammar);
void SaveGrammar(const std::string& path, const Grammar& grammar);

std::string ReadFileOrThrow(const std::string& path);
void WriteFileOrThrow(const std::string& path, const std::string& contents);

}  // namespace qcfg
