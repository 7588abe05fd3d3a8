#include "qcfg/text_io.h"

#include <fstream>
#include <sstream>

#include "qcfg/errors.h"

namespace qcfg {
namespace {

std::string Where(const std::string& source, size_t line) {
  return source + ":" + std::to_string(line) + ": ";
}

void StripCr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

bool Blank(const std::string& s) {
  return s.find_first_not_of(" \t") == std::string::npos;
}

}  // namespace

Corpus ReadCorpus(std::istream& in, const std::string& source) {
  Corpus corpus;
  corpus.name = source;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    StripCr(line);
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw DataError(Where(source, lineno) + "expected 2 tab-separated fields, found 1");
    if (line.find('\t', tab + 1) != std::string::npos)
      throw DataError(Where(source, lineno) +
                      "expected 2 tab-separated fields, found more (tab inside a token?)");
    std::string x = line.substr(0, tab), y = line.substr(tab + 1);
    if (Blank(x)) throw DataError(Where(source, lineno) + "empty input field");
    if (Blank(y)) throw DataError(Where(source, lineno) + "empty output field");
    corpus.examples.push_back(ExamplePair{Tokens(x), Tokens(y)});
  }
  return corpus;
}

Corpus LoadCorpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError(path + ": cannot open corpus file");
  return ReadCorpus(in, path);
}

void WriteCorpus(std::ostream& out, const Corpus& corpus) {
  for (const auto& e : corpus.examples)
    out << ToString(e.input) << '\t' << ToString(e.output) << '\n';
}

void SaveCorpus(const std::string& path, const Corpus& corpus) {
  std::ostringstream out;
  WriteCorpus(out, corpus);
  WriteFileOrThrow(path, out.str());
}

std::vector<Sequence> ReadInputs(std::istream& in, const std::string& source) {
  std::vector<Sequence> inputs;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    StripCr(line);
    if (line.empty()) continue;
    auto field = line.substr(0, line.find('\t'));
    if (Blank(field)) throw DataError(Where(source, lineno) + "empty input field");
    inputs.push_back(Tokens(field));
  }
  return inputs;
}

std::vector<Sequence> LoadInputs(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError(path + ": cannot open input file");
  return ReadInputs(in, path);
}

Grammar ReadGrammar(std::istream& in, const std::string& source, GrammarConfig config) {
  Grammar grammar(config);
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    StripCr(line);
    if (Blank(line) || line[line.find_first_not_of(" \t")] == '#') continue;
    try {
      grammar.Add(Rule::Parse(line));
    } catch (const DataError& e) {
      throw DataError(Where(source, lineno) + e.what());
    }
  }
  return grammar;
}

Grammar LoadGrammar(const std::string& path, GrammarConfig config) {
  std::ifstream in(path);
  if (!in) throw DataError(path + ": cannot open grammar file");
  return ReadGrammar(in, path, config);
}

void WriteGrammar(std::ostream& out, const Grammar& grammar) {
  for (const auto& r : grammar.rules()) out << r.ToString() << '\n';
}

void SaveGrammar(const std::string& path, const Grammar& grammar) {
  std::ostringstream out;
  WriteGrammar(out, grammar);
  WriteFileOrThrow(path, out.str());
}

std::string ReadFileOrThrow(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path + ": cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteFileOrThrow(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(path + ": cannot open file for writing");
  out << contents;
  if (!out) throw DataError(path + ": write failed");
}

}  // namespace qcfg
