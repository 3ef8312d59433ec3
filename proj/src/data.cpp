#include "autr/data.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

namespace autr {

EncodedSentence encode(const std::vector<std::string>& tokens, const Vocabulary& vocab, int L) {
  if (static_cast<int>(tokens.size()) > L - 1)
    throw DataError("encode: sentence of " + std::to_string(tokens.size()) +
                    " tokens does not fit length cap L=" + std::to_string(L) +
                    " (needs room for <eos>)");
  EncodedSentence x;
  x.ids.reserve(static_cast<size_t>(L));
  for (const auto& tok : tokens) x.ids.push_back(vocab.id(tok));
  x.ids.push_back(Vocabulary::kEos);
  x.true_length = static_cast<int>(x.ids.size());
  x.ids.resize(static_cast<size_t>(L), Vocabulary::kPad);
  return x;
}

std::vector<std::string> decode(const EncodedSentence& x, const Vocabulary& vocab) {
  std::vector<std::string> toks;
  for (int id : x.ids) {
    if (id == Vocabulary::kEos) break;
    toks.push_back(vocab.token(id));
  }
  return toks;
}

std::string decode_str(const EncodedSentence& x, const Vocabulary& vocab) {
  auto toks = decode(x, vocab);
  std::ostringstream os;
  for (size_t i = 0; i < toks.size(); ++i) os << (i ? " " : "") << toks[i];
  return os.str();
}

std::pair<std::vector<EncodedSentence>, int> encode_corpus(const std::vector<std::string>& lines,
                                                           const Vocabulary& vocab, int L) {
  std::vector<EncodedSentence> out;
  int skipped = 0;
  for (const auto& line : lines) {
    auto toks = split_tokens(line);
    if (static_cast<int>(toks.size()) > L - 1) {
      ++skipped;
      continue;
    }
    out.push_back(encode(toks, vocab, L));
  }
  return {std::move(out), skipped};
}

BatchStream::BatchStream(std::vector<EncodedSentence> data, int batch_size, uint64_t seed)
    : data_(std::move(data)), batch_size_(batch_size), seed_(seed) {
  if (data_.empty()) throw DataError("batch stream: empty corpus");
  if (batch_size_ < 1) throw DataError("batch stream: batch_size must be >= 1");
  order_.resize(data_.size());
  std::iota(order_.begin(), order_.end(), size_t{0});
  start_epoch();
}

void BatchStream::start_epoch() {
  ++epoch_;
  cursor_ = 0;
  Rng rng(seed_, "shuffle", static_cast<uint64_t>(epoch_));
  rng.shuffle(order_);
}

int64_t BatchStream::batches_per_epoch() const {
  return (static_cast<int64_t>(data_.size()) + batch_size_ - 1) / batch_size_;
}

Batch BatchStream::next() {
  if (cursor_ >= data_.size()) start_epoch();
  Batch b;
  size_t end = std::min(cursor_ + static_cast<size_t>(batch_size_), data_.size());
  for (size_t i = cursor_; i < end; ++i) b.sentences.push_back(data_[order_[i]]);
  cursor_ = end;
  b.rng_seed = mix64(mix64(seed_, fnv1a("batch")), static_cast<uint64_t>(batch_index_++));
  return b;
}

std::pair<std::vector<std::string>, std::vector<std::string>> split_train_test(
    const std::vector<std::string>& lines, double train_frac, uint64_t seed) {
  std::vector<size_t> order(lines.size());
  std::iota(order.begin(), order.end(), size_t{0});
  Rng rng(seed, "split");
  rng.shuffle(order);
  size_t n_train = static_cast<size_t>(train_frac * static_cast<double>(lines.size()));
  std::pair<std::vector<std::string>, std::vector<std::string>> out;
  for (size_t i = 0; i < order.size(); ++i)
    (i < n_train ? out.first : out.second).push_back(lines[order[i]]);
  return out;
}

namespace {

std::vector<std::string> word_pool(const std::vector<std::string>& base, int n) {
  std::vector<std::string> pool;
  for (int i = 0; i < n; ++i) {
    if (i < static_cast<int>(base.size()))
      pool.push_back(base[static_cast<size_t>(i)]);
    else
      pool.push_back(base[static_cast<size_t>(i) % base.size()] + std::to_string(i / static_cast<int>(base.size()) + 1));
  }
  return pool;
}

}  // namespace

std::vector<std::string> synth_corpus(uint64_t grammar_seed, int n, int vocab_size, int max_len) {
  if (vocab_size < 5) throw DataError("synth_corpus: vocab_size must be >= 5");
  if (max_len < 4) throw DataError("synth_corpus: max_len must be >= 4");
  int dets = std::min(2, vocab_size - 4);
  int rest = vocab_size - dets;
  int nouns = std::max(1, rest * 2 / 5);
  int verbs = std::max(1, rest / 4);
  int adjs = std::max(1, rest / 5);
  int advs = std::max(1, rest - nouns - verbs - adjs);

  auto det = word_pool({"the", "a"}, dets);
  auto noun = word_pool({"cat", "dog", "bird", "fox", "owl", "fish", "mouse", "wolf", "bear", "deer"}, nouns);
  auto verb = word_pool({"sees", "likes", "chases", "finds", "follows", "hears", "greets", "watches"}, verbs);
  auto adj = word_pool({"big", "small", "old", "young", "quick", "quiet", "brave", "sly"}, adjs);
  auto adv = word_pool({"quietly", "quickly", "slowly", "gladly", "barely", "boldly"}, advs);

  enum Part { D, N, V, A, B };  // determiner, noun, verb, adjective, adverb
  const std::vector<std::vector<Part>> templates = {
      {N, V, N},
      {D, N, V, D, N},
      {D, A, N, V, D, N},
      {D, N, V, D, A, N},
      {D, N, B, V, D, N},
      {D, A, N, B, V, D, A, N},
  };

  Rng rng(grammar_seed, "synth");
  std::vector<std::string> out;
  out.reserve(static_cast<size_t>(std::max(n, 0)));
  while (static_cast<int>(out.size()) < n) {
    const auto& tpl = templates[rng.below(templates.size())];
    if (static_cast<int>(tpl.size()) > max_len - 1) continue;  // leave room for <eos>
    std::ostringstream os;
    for (size_t i = 0; i < tpl.size(); ++i) {
      const std::vector<std::string>* pool = nullptr;
      switch (tpl[i]) {
        case D: pool = &det; break;
        case N: pool = &noun; break;
        case V: pool = &verb; break;
        case A: pool = &adj; break;
        case B: pool = &adv; break;
      }
      os << (i ? " " : "") << (*pool)[rng.below(pool->size())];
    }
    out.push_back(os.str());
  }
  return out;
}

}  // namespace autr
