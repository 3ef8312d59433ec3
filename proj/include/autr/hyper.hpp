#pragma once

#include <string>

#include "autr/tensor.hpp"

namespace autr {

enum class DecoderKind { Autr, Baseline };

// encoder log-variance clamp, keeps the KL finite early in training
inline constexpr double kLogvarClamp = 10.0;

inline std::string to_string(DecoderKind k) { return k == DecoderKind::Autr ? "autr" : "baseline"; }
inline DecoderKind decoder_from_string(const std::string& s) {
  if (s == "autr") return DecoderKind::Autr;
  if (s == "baseline") return DecoderKind::Baseline;
  throw ContractError("unknown decoder kind: " + s + " (expected autr|baseline)");
}

// Model dimensions. L = canvas slots / sentence length, E = embedding width,
// T = writer steps, H = LSTM width (writer, encoder and baseline), Dz =
// latent width, R = width of the canvas read projection fed back into the
// writer LSTM, V = vocabulary size.
struct Hyper {
  int L = 10;
  int E = 32;
  int T = 8;
  int H = 64;
  int Dz = 16;
  int R = 64;
  int V = 0;
  bool share_embeddings = false;

  void validate() const {
    if (L < 1 || E < 1 || T < 1 || H < 1 || Dz < 1 || R < 1 || V < 4)
      throw ContractError("hyper: all dimensions must be positive and V >= 4");
  }
};

// Full-scale reference configuration and the results measured at that scale
// (53M-sentence corpus, 1M iterations). Desk-scale runs cannot reproduce
// these numbers; they are recorded as metadata and the test suite checks
// properties instead.
namespace fullscale {
inline constexpr int kVocabSize = 20000;
inline constexpr int kMaxLen = 40;
inline constexpr int kEmbed = 300;
inline constexpr int kHidden = 500;
inline constexpr int kLatent = 50;
inline constexpr int kWriterStepsShort = 30;  // T < L regime
inline constexpr int kWriterStepsLong = 40;
inline constexpr int kBatch = 200;
inline constexpr double kLearningRate = 1e-4;
inline constexpr long long kIterations = 1'000'000;
inline constexpr long long kAnnealIterations = 20'000;
inline constexpr double kWordDropout = 0.3;
inline constexpr int kEvalSamples = 1000;
inline constexpr int kBeamSize = 15;
inline constexpr int kImputationRestarts = 50;
inline constexpr double kTrainFraction = 0.9;

struct RefResult {
  double elbo, kl, ppl;
};
inline constexpr RefResult kGenRnnDropout{-52.3, 7.1, 41.9};
inline constexpr RefResult kAutrT30{-50.7, 8.0, 37.4};
inline constexpr RefResult kAutrT40{-50.7, 7.8, 37.4};
inline constexpr RefResult kAutrT30Dropout{-51.6, 14.0, 39.9};
inline constexpr RefResult kAutrT40Dropout{-51.5, 13.8, 39.6};
inline constexpr double kImputeRecoveryAutr = 0.341;
inline constexpr double kImputeRecoveryGenRnn = 0.319;
inline constexpr double kParamsAutr = 10.9e6;
inline constexpr double kParamsGenRnn = 10.3e6;
}  // namespace fullscale

}  // namespace autr
