#pragma once

#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace autr {

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bidirectional token<->id map with reserved PAD/EOS/UNK ids. Immutable
// after build.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kEos = 1;
  static constexpr int kUnk = 2;
  static constexpr int kNumReserved = 3;

  // Most-frequent tokens kept, ties broken lexicographically; everything
  // else maps to UNK at encode time.
  static Vocabulary build(const std::vector<std::string>& sentences, int max_size);

  static Vocabulary load(const std::string& path);
  void save(const std::string& path) const;

  int id(const std::string& token) const {
    auto it = tok2id_.find(token);
    return it == tok2id_.end() ? kUnk : it->second;
  }
  const std::string& token(int id) const;
  bool contains(const std::string& token) const { return tok2id_.count(token) > 0; }

  int size() const { return static_cast<int>(id2tok_.size()); }
  int max_size() const { return max_size_; }

 private:
  Vocabulary() = default;
  std::vector<std::string> id2tok_;
  std::unordered_map<std::string, int> tok2id_;
  int max_size_ = 0;

  void push(const std::string& tok);
};

// whitespace tokenizer for pre-tokenized one-sentence-per-line input
std::vector<std::string> split_tokens(const std::string& line);

std::vector<std::string> read_corpus(const std::string& path);
void write_corpus(const std::string& path, const std::vector<std::string>& lines);

}  // namespace autr
