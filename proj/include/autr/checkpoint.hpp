#pragma once

#include <cstdint>
#include <string>

#include "autr/adam.hpp"
#include "autr/config.hpp"
#include "autr/params.hpp"

namespace autr {

struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr uint32_t kCheckpointVersion = 1;

// Versioned training snapshot; round-trips bit-exactly.
struct Checkpoint {
  TrainConfig config;
  int64_t iteration = 0;
  int vocab_size = 0;
  std::string vocab_path;
  ModelParamsT<float> params;
  AdamStateT<float> opt;

  Hyper hyper() const { return config.hyper(vocab_size); }
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace autr
