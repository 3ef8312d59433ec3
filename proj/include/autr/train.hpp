#pragma once

#include <functional>
#include <string>
#include <vector>

#include "autr/checkpoint.hpp"
#include "autr/data.hpp"
#include "autr/elbo.hpp"

namespace autr {

struct TrainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TrainHooks {
  // called after each logged iteration with the CSV row values
  std::function<void(int64_t iter, const BatchMetrics&, double anneal)> on_log;
};

// Runs the configured number of iterations and writes metrics.csv plus
// periodic and final checkpoints into out_dir. Deterministic given the
// config seed. Throws TrainError (naming iteration and batch index) if the
// loss goes non-finite.
Checkpoint train(const TrainConfig& cfg, const std::vector<EncodedSentence>& corpus,
                 const std::string& vocab_path, int vocab_size, const std::string& out_dir,
                 const TrainHooks& hooks = {});

// One optimizer step on an existing state; exposed for resumable loops and
// tests.
BatchMetrics train_step(ModelParamsT<float>& params, AdamStateT<float>& opt, const Hyper& h,
                        const TrainConfig& cfg, const Batch& batch, int64_t iter,
                        int64_t batch_index = -1);

struct EvalResult {
  double elbo = 0;  // mean per-sentence multi-sample ELBO
  double kl = 0;    // mean per-sentence KL
  double ppl = 0;   // exp(-total elbo / total true-length tokens)
  int64_t sentences = 0;
};

// Multi-sample ELBO estimate: mean over n_samples of the single-sample
// bound. Perplexity counts tokens up to and including EOS; PAD positions
// stay inside the ELBO but outside the token count.
EvalResult evaluate(const ModelParamsT<float>& params, const Hyper& h, DecoderKind kind,
                    const std::vector<EncodedSentence>& corpus, int n_samples, uint64_t seed);

double perplexity(double total_elbo, int64_t total_tokens);

std::string format_eval_line(const EvalResult& r);

}  // namespace autr
