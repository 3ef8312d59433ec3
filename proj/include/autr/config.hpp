#pragma once

#include <cstdint>
#include <string>

#include "autr/hyper.hpp"

namespace autr {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Everything a training run needs, loadable from a flat `key = value` file.
struct TrainConfig {
  DecoderKind decoder = DecoderKind::Autr;
  int L = 10, E = 32, T = 8, H = 64, Dz = 16, R = 64;
  int vocab_max = 20000;
  bool share_embeddings = false;
  double lr = 1e-4;
  int batch_size = 200;
  int64_t iterations = 10000;
  int64_t anneal_end = 20000;
  double dropout = 0.0;
  uint64_t seed = 1;
  int eval_samples = 1000;
  double grad_clip = 0.0;  // global-norm clip threshold, 0 disables
  int64_t log_every = 100;
  int64_t ckpt_every = 5000;
  std::string corpus;  // optional, flags may override
  std::string vocab;   // optional pre-built vocabulary

  // Model dimensions with the vocabulary size resolved.
  Hyper hyper(int vocab_size) const {
    Hyper h;
    h.L = L;
    h.E = E;
    h.T = T;
    h.H = H;
    h.Dz = Dz;
    h.R = R;
    h.V = vocab_size;
    h.share_embeddings = share_embeddings;
    return h;
  }

  void validate() const;
};

TrainConfig parse_config_text(const std::string& text, const std::string& origin = "<config>");
TrainConfig parse_config_file(const std::string& path);
std::string serialize_config(const TrainConfig& cfg);

}  // namespace autr
