#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "autr/rng.hpp"
#include "autr/vocab.hpp"

namespace autr {

// Fixed-length id sequence: tokens, then EOS, then PAD up to L.
struct EncodedSentence {
  std::vector<int> ids;
  int true_length = 0;  // tokens up to and including EOS

  int length() const { return static_cast<int>(ids.size()); }
  bool operator==(const EncodedSentence& o) const { return ids == o.ids; }
};

EncodedSentence encode(const std::vector<std::string>& tokens, const Vocabulary& vocab, int L);
std::vector<std::string> decode(const EncodedSentence& x, const Vocabulary& vocab);
std::string decode_str(const EncodedSentence& x, const Vocabulary& vocab);

// Encodes every line that fits the length cap; too-long lines are counted,
// not kept.
std::pair<std::vector<EncodedSentence>, int> encode_corpus(const std::vector<std::string>& lines,
                                                           const Vocabulary& vocab, int L);

struct Batch {
  std::vector<EncodedSentence> sentences;
  uint64_t rng_seed = 0;  // per-batch stream for eps draws and dropout masks
};

// Seeded epoch shuffles, deterministic given the seed; the final partial
// batch of each epoch is emitted.
class BatchStream {
 public:
  BatchStream(std::vector<EncodedSentence> data, int batch_size, uint64_t seed);
  Batch next();
  int64_t batches_per_epoch() const;

 private:
  void start_epoch();
  std::vector<EncodedSentence> data_;
  std::vector<size_t> order_;
  int batch_size_;
  uint64_t seed_;
  int64_t epoch_ = -1;
  size_t cursor_ = 0;
  int64_t batch_index_ = 0;
};

// disjoint, exhaustive split after a seeded shuffle
std::pair<std::vector<std::string>, std::vector<std::string>> split_train_test(
    const std::vector<std::string>& lines, double train_frac, uint64_t seed);

// Seeded subject-verb-object template grammar; gives overfit tests
// learnable structure without an external corpus.
std::vector<std::string> synth_corpus(uint64_t grammar_seed, int n, int vocab_size, int max_len);

}  // namespace autr
