#pragma once

#include <string>
#include <utility>
#include <vector>

#include "autr/data.hpp"
#include "autr/infer.hpp"

namespace autr {

struct DecodeResult {
  EncodedSentence sentence;
  double logprob = 0;
};

// Width-K search over valid sentences (content tokens, one EOS, PAD tail).
// Hypotheses that emit EOS continue by forcing PAD so the score covers all
// L slots. Ties order by lower token id (lexicographic on the id sequence),
// which also makes the kept set at each step monotone in K.
class BeamDecoder {
 public:
  BeamDecoder(const ModelParamsT<float>& params, const Hyper& h, DecoderKind kind);

  // most likely sentence for one z; the AUTR canvas is computed once from z
  DecodeResult decode(const Tensor& z, int K) const;

  // AUTR only: decode an intermediate canvas as if it were final
  DecodeResult decode_canvas(const Tensor& z, const Tensor& canvas, int K) const;

  // forced[l] >= 0 pins position l; free positions range over UNK and
  // content ids; scored by the mean log-prob over the given z samples
  DecodeResult decode_constrained(const std::vector<Tensor>& zs, const std::vector<int>& forced,
                                  int K) const;

  // full-sentence log-prob (all L positions) under one z / mean over many
  double score(const Tensor& z, const EncodedSentence& x) const;
  double score_mean(const std::vector<Tensor>& zs, const EncodedSentence& x) const;

  const Infer& infer() const { return infer_; }
  DecoderKind kind() const { return kind_; }

 private:
  Infer infer_;
  DecoderKind kind_;

  struct ZContext {
    Tensor z;
    Tensor canvas;  // AUTR only
  };
  ZContext make_ctx(const Tensor& z) const;
  DecodeResult run_beam(const std::vector<ZContext>& zs, const std::vector<int>& forced, int K,
                        bool constrained) const;
};

std::vector<EncodedSentence> sample_prior(const BeamDecoder& dec, int n, int K, uint64_t seed);

enum class ReconstructMode { PosteriorMean, PosteriorSample };

EncodedSentence reconstruct(const BeamDecoder& dec, const EncodedSentence& x, ReconstructMode mode,
                            int K, uint64_t seed);

struct ImputationTask {
  EncodedSentence observed;      // placeholder ids at missing positions
  std::vector<uint8_t> missing;  // length L, true = position to fill
  int samples = 5;               // z draws per M-like step
  int max_iters = 20;
  int restarts = 10;
  uint64_t seed = 0;
};

struct ImputeResult {
  EncodedSentence completed;
  double bound = 0;  // mean log-likelihood over the final z samples
  // per accepted M-like step: bound on the incumbent vs the new completion,
  // both under that step's z samples
  std::vector<std::pair<double, double>> m_step_bounds;
};

// EM-style imputation: E-like step samples z from the posterior at the
// current completion, M-like step beam-searches the missing positions.
// Keeps the incumbent whenever the beam proposal does not improve the
// bound, so the bound never decreases under fixed z samples. Restarts
// re-initialize the missing words; the highest-bound completion wins.
ImputeResult impute(const BeamDecoder& dec, const ImputationTask& task, int K);

std::vector<std::pair<double, EncodedSentence>> interpolate(const BeamDecoder& dec,
                                                            const Tensor& z1, const Tensor& z2,
                                                            const std::vector<double>& alphas,
                                                            int K);

// argmax over the pool of log p(x | z = mu(query)); exclude_index skips the
// query's own pool entry when the query was drawn from the pool
EncodedSentence nearest_sentence(const BeamDecoder& dec, const EncodedSentence& query,
                                 const std::vector<EncodedSentence>& pool, int exclude_index = -1);

struct TraceRow {
  int t = 0;
  EncodedSentence sentence;
  std::vector<float> cum;
};

// one row per writer step: the canvas decoded as if final plus the
// cumulative attention over slots
std::vector<TraceRow> export_trace(const BeamDecoder& dec, const Tensor& z, int K);

void write_trace_tsv(const std::string& path, const std::vector<TraceRow>& rows,
                     const Vocabulary& vocab);
// binary portable graymap, width L, height T, pixel = round(255 * cum)
void write_heatmap_pgm(const std::string& path, const std::vector<TraceRow>& rows);

}  // namespace autr
