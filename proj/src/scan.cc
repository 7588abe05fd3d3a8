#include "qcfg/scan.h"

#include <algorithm>
#include <sstream>

#include "qcfg/errors.h"
#include "qcfg/rng.h"

namespace qcfg {
namespace {

const std::vector<std::string> kPrimitives = {"walk", "look", "run", "jump"};
const std::vector<std::string> kDirections = {"left", "right"};

std::vector<std::string> Verbs() {
  std::vector<std::string> v = kPrimitives;
  for (std::string u : {"walk", "look", "run", "jump", "turn"})
    for (const auto& d : kDirections) {
      v.push_back(u + " " + d);
      v.push_back(u + " opposite " + d);
      v.push_back(u + " around " + d);
    }
  return v;
}

std::vector<std::string> Sentences() {
  std::vector<std::string> s;
  for (const auto& v : Verbs()) {
    s.push_back(v);
    s.push_back(v + " twice");
    s.push_back(v + " thrice");
  }
  return s;
}

std::vector<std::string> Split(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

std::vector<std::string> Verb(const std::vector<std::string>& w) {
  auto fail = [&]() -> std::vector<std::string> {
    std::string t;
    for (const auto& x : w) t += (t.empty() ? "" : " ") + x;
    throw DataError("not a SCAN verb phrase: '" + t + "'");
  };
  auto prim = [&](const std::string& u) -> std::string {
    if (u == "walk") return "WALK";
    if (u == "look") return "LOOK";
    if (u == "run") return "RUN";
    if (u == "jump") return "JUMP";
    fail();
    return {};
  };
  if (w.size() == 1) return {prim(w[0])};
  std::string dir;
  if (w.back() == "left") dir = "LTURN";
  else if (w.back() == "right") dir = "RTURN";
  else fail();
  std::vector<std::string> unit{dir};
  if (w[0] != "turn") unit.push_back(prim(w[0]));
  if (w.size() == 2) return unit;
  if (w.size() != 3) fail();
  std::vector<std::string> out;
  if (w[1] == "opposite") {
    out.push_back(dir);
    out.insert(out.end(), unit.begin(), unit.end());
  } else if (w[1] == "around") {
    for (int i = 0; i < 4; ++i) out.insert(out.end(), unit.begin(), unit.end());
  } else {
    fail();
  }
  return out;
}

std::vector<std::string> Sentence(std::vector<std::string> w) {
  int reps = 1;
  if (!w.empty() && w.back() == "twice") reps = 2;
  if (!w.empty() && w.back() == "thrice") reps = 3;
  if (reps > 1) w.pop_back();
  auto v = Verb(w);
  std::vector<std::string> out;
  for (int i = 0; i < reps; ++i) out.insert(out.end(), v.begin(), v.end());
  return out;
}

Corpus MakeCorpus(const std::string& name, const std::vector<std::string>& commands) {
  Corpus c;
  c.name = name;
  for (const auto& cmd : commands) c.examples.push_back(MakePair(cmd, ScanInterpret(cmd)));
  return c;
}

bool HasPhrase(const std::string& cmd, const std::string& phrase) {
  std::string padded = " " + cmd + " ";
  return padded.find(" " + phrase + " ") != std::string::npos;
}

// Sentence-level constituents of a command.
std::vector<std::string> Constituents(const std::string& cmd) {
  for (std::string conj : {" and ", " after "}) {
    auto p = cmd.find(conj);
    if (p != std::string::npos) return {cmd.substr(0, p), cmd.substr(p + conj.size())};
  }
  return {cmd};
}

bool McdHeldOut(int which, const std::string& cmd) {
  auto parts = Constituents(cmd);
  bool conj_and = HasPhrase(cmd, "and"), conj_after = HasPhrase(cmd, "after");
  auto any = [&](auto pred) { return std::any_of(parts.begin(), parts.end(), pred); };
  switch (which) {
    case 1:
      // "around right" under a repetition, and "opposite left" thrice.
      return any([](const std::string& s) {
        return (HasPhrase(s, "around right") && (HasPhrase(s, "twice") || HasPhrase(s, "thrice"))) ||
               (HasPhrase(s, "opposite left") && HasPhrase(s, "thrice"));
      });
    case 2:
      // "after" whose first constituent turns around, or "and" joining two
      // opposite phrases.
      if (conj_after && parts.size() == 2 && HasPhrase(parts[0], "around")) return true;
      return conj_and && parts.size() == 2 && HasPhrase(parts[0], "opposite") &&
             HasPhrase(parts[1], "opposite");
    case 3:
      // "twice" in the second constituent of "and", and "turn" phrases
      // repeated thrice after anything.
      if (conj_and && parts.size() == 2 && HasPhrase(parts[1], "twice")) return true;
      return conj_after && parts.size() == 2 && HasPhrase(parts[1], "turn") &&
             HasPhrase(parts[1], "thrice");
  }
  return false;
}

}  // namespace

std::vector<std::string> ScanCommands() {
  auto s = Sentences();
  std::vector<std::string> out = s;
  for (const auto& a : s)
    for (const auto& b : s) {
      out.push_back(a + " and " + b);
      out.push_back(a + " after " + b);
    }
  std::sort(out.begin(), out.end());
  return out;
}

std::string ScanInterpret(const std::string& command) {
  auto words = Split(command);
  std::vector<std::string> out;
  auto it_and = std::find(words.begin(), words.end(), "and");
  auto it_after = std::find(words.begin(), words.end(), "after");
  if (it_and != words.end() && it_after != words.end())
    throw DataError("not a SCAN command: '" + command + "'");
  if (it_and != words.end() || it_after != words.end()) {
    auto it = it_and != words.end() ? it_and : it_after;
    auto a = Sentence({words.begin(), it});
    auto b = Sentence({it + 1, words.end()});
    if (it_after != words.end()) std::swap(a, b);
    out = a;
    out.insert(out.end(), b.begin(), b.end());
  } else {
    out = Sentence(words);
  }
  std::string text;
  for (const auto& t : out) text += (text.empty() ? "" : " ") + t;
  return text;
}

std::vector<std::string> ScanSplitNames() {
  return {"simple", "addprim_jump", "addprim_turn_left", "length", "mcd1", "mcd2", "mcd3"};
}

ScanSplit MakeScanSplit(const std::string& name, uint64_t seed) {
  auto all = ScanCommands();
  std::vector<std::string> train, dev, test;
  auto oversampled = [&](const std::string& prim, size_t copies) {
    for (const auto& c : all) {
      if (c == prim) continue;
      (HasPhrase(c, prim) ? test : train).push_back(c);
    }
    train.insert(train.end(), copies, prim);
  };
  if (name == "simple") {
    Rng rng(seed);
    std::vector<std::string> shuffled = all;
    std::shuffle(shuffled.begin(), shuffled.end(), rng.engine());
    size_t cut = shuffled.size() * 8 / 10;
    train.assign(shuffled.begin(), shuffled.begin() + cut);
    test.assign(shuffled.begin() + cut, shuffled.end());
  } else if (name == "addprim_jump") {
    oversampled("jump", 1467);
  } else if (name == "addprim_turn_left") {
    oversampled("turn left", 2189);
  } else if (name == "length") {
    for (const auto& c : all) {
      size_t len = Split(ScanInterpret(c)).size();
      (len <= 22 ? train : test).push_back(c);
    }
  } else if (name == "mcd1" || name == "mcd2" || name == "mcd3") {
    int which = name.back() - '0';
    std::vector<std::string> held;
    for (const auto& c : all) (McdHeldOut(which, c) ? held : train).push_back(c);
    Rng rng(MixSeed(seed, static_cast<uint64_t>(which)));
    std::shuffle(train.begin(), train.end(), rng.engine());
    std::shuffle(held.begin(), held.end(), rng.engine());
    if (train.size() > 8000) train.resize(8000);
    if (held.size() > 2000) held.resize(2000);
    dev.assign(held.begin(), held.begin() + held.size() / 2);
    test.assign(held.begin() + held.size() / 2, held.end());
  } else {
    throw UsageError("unknown SCAN split: " + name);
  }
  return {MakeCorpus(name + "_train", train), MakeCorpus(name + "_dev", dev),
          MakeCorpus(name + "_test", test)};
}

}  // namespace qcfg
