#include "autr/vocab.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

namespace autr {

std::vector<std::string> split_tokens(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream is(line);
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

void Vocabulary::push(const std::string& tok) {
  tok2id_[tok] = static_cast<int>(id2tok_.size());
  id2tok_.push_back(tok);
}

Vocabulary Vocabulary::build(const std::vector<std::string>& sentences, int max_size) {
  if (sentences.empty()) throw DataError("build_vocab: empty corpus");
  if (max_size < kNumReserved)
    throw DataError("build_vocab: max_size " + std::to_string(max_size) + " below reserved count");

  // std::map keeps tokens sorted, which settles frequency ties lexicographically
  std::map<std::string, int64_t> counts;
  for (const auto& line : sentences)
    for (auto& tok : split_tokens(line)) counts[tok] += 1;

  std::vector<std::pair<std::string, int64_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });

  Vocabulary v;
  v.max_size_ = max_size;
  v.push("<pad>");
  v.push("<eos>");
  v.push("<unk>");
  for (const auto& [tok, cnt] : ranked) {
    if (v.size() >= max_size) break;
    if (v.tok2id_.count(tok)) continue;  // token spelled like a reserved entry
    v.push(tok);
  }
  return v;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || id >= size())
    throw DataError("vocabulary: id " + std::to_string(id) + " outside size " + std::to_string(size()));
  return id2tok_[static_cast<size_t>(id)];
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write vocabulary file: " + path);
  for (int i = 0; i < size(); ++i) os << id2tok_[static_cast<size_t>(i)] << '\t' << i << '\n';
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot read vocabulary file: " + path);
  Vocabulary v;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw DataError(path + ":" + std::to_string(lineno) + ": expected token<TAB>id");
    std::string tok = line.substr(0, tab);
    int id = std::stoi(line.substr(tab + 1));
    if (id != v.size())
      throw DataError(path + ":" + std::to_string(lineno) + ": ids must be dense and sorted");
    if (v.tok2id_.count(tok))
      throw DataError(path + ":" + std::to_string(lineno) + ": duplicate token " + tok);
    v.push(tok);
  }
  if (v.size() < kNumReserved || v.id2tok_[0] != "<pad>" || v.id2tok_[1] != "<eos>" ||
      v.id2tok_[2] != "<unk>")
    throw DataError(path + ": reserved rows <pad>/<eos>/<unk> must come first");
  v.max_size_ = v.size();
  return v;
}

std::vector<std::string> read_corpus(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot read corpus file: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

void write_corpus(const std::string& path, const std::vector<std::string>& lines) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write corpus file: " + path);
  for (const auto& l : lines) os << l << '\n';
}

}  // namespace autr
