#pragma once

#include <cstdint>
#include <vector>

#include "autr/model.hpp"
#include "autr/rng.hpp"

namespace autr {

// Per-parameter gradient buffers aligned with a ModelParams collection.
template <class Real>
struct GradsT {
  std::vector<TensorT<Real>> g;

  static GradsT like(const ModelParamsT<Real>& p) {
    GradsT out;
    out.g.reserve(p.tensors.size());
    for (const auto& t : p.tensors) out.g.push_back(TensorT<Real>::zeros(t.shape));
    return out;
  }
  void add(const GradsT& o) {
    for (size_t i = 0; i < g.size(); ++i)
      for (size_t j = 0; j < g[i].data.size(); ++j) g[i].data[j] += o.g[i].data[j];
  }
  void scale(Real s) {
    for (auto& t : g)
      for (auto& v : t.data) v *= s;
  }
  double sq_norm() const {
    double n = 0;
    for (const auto& t : g)
      for (Real v : t.data) n += static_cast<double>(v) * static_cast<double>(v);
    return n;
  }
};

inline std::vector<uint8_t> draw_dropout_mask(const EncodedSentence& x, double rate, Rng& rng) {
  std::vector<uint8_t> mask(x.ids.size(), 0);
  if (rate <= 0) return mask;
  for (int i = 0; i + 1 < x.true_length; ++i)  // content words only, EOS/PAD never dropped
    mask[static_cast<size_t>(i)] = rng.uniform01() < rate ? 1 : 0;
  return mask;
}

template <class Real>
TensorT<Real> draw_eps(int dz, Rng& rng) {
  auto eps = TensorT<Real>::zeros({dz});
  for (auto& v : eps.data) v = static_cast<Real>(rng.normal());
  return eps;
}

template <class Real>
struct SentenceElboNodes {
  int loss, recon, kl;
};

// loss = anneal·KL − log p(x|z): the per-sentence negative ELBO with the
// KL weight applied.
template <class Real>
SentenceElboNodes<Real> elbo_sentence_graph(TapeT<Real>& t, const BoundParams<Real>& P,
                                            const Hyper& h, DecoderKind kind,
                                            const EncodedSentence& x, const TensorT<Real>& eps,
                                            Real anneal_weight,
                                            const std::vector<uint8_t>* dropout = nullptr) {
  PosteriorNodes<Real> post = encoder_graph(t, P, h, x);
  int z = sample_z_node(t, post, eps);
  int kl = kl_node(t, post);
  int recon = decoder_logprob_graph(t, P, h, kind, z, x, dropout);
  int loss = t.sub(t.mul_c(kl, anneal_weight), recon);
  return {loss, recon, kl};
}

// forward-only ELBO value for one sentence and one eps draw
template <class Real>
Real elbo_sentence_value(const ModelParamsT<Real>& params, const Hyper& h, DecoderKind kind,
                         const EncodedSentence& x, const TensorT<Real>& eps) {
  TapeT<Real> t;
  BoundParams<Real> P = bind_params(t, params, false);
  auto nodes = elbo_sentence_graph(t, P, h, kind, x, eps, Real(1));
  return -t.val(nodes.loss).data[0];
}

struct BatchMetrics {
  double loss = 0, recon = 0, kl = 0;
};

// Mean negative weighted ELBO over the batch, one eps draw and one dropout
// mask per sentence, both from the batch's own stream. Sentences evaluate
// on independent tapes (parallelizable); gradients are summed in sentence
// order so the result does not depend on the thread count.
template <class Real>
BatchMetrics elbo_batch(const ModelParamsT<Real>& params, const Hyper& h, DecoderKind kind,
                        const Batch& batch, Real anneal_weight, double dropout_rate,
                        GradsT<Real>* grads_out) {
  int n = static_cast<int>(batch.sentences.size());
  if (n == 0) throw ContractError("elbo_batch: empty batch");
  std::vector<BatchMetrics> per(static_cast<size_t>(n));
  std::vector<GradsT<Real>> grads;
  if (grads_out) grads.resize(static_cast<size_t>(n));

#pragma omp parallel for schedule(static) num_threads(kernels::max_threads())
  for (int i = 0; i < n; ++i) {
    const EncodedSentence& x = batch.sentences[static_cast<size_t>(i)];
    Rng eps_rng(batch.rng_seed, "eps", static_cast<uint64_t>(i));
    Rng drop_rng(batch.rng_seed, "dropout", static_cast<uint64_t>(i));
    auto eps = draw_eps<Real>(h.Dz, eps_rng);
    auto mask = draw_dropout_mask(x, dropout_rate, drop_rng);

    TapeT<Real> t;
    BoundParams<Real> P = bind_params(t, params, grads_out != nullptr);
    auto nodes = elbo_sentence_graph(t, P, h, kind, x, eps, anneal_weight,
                                     dropout_rate > 0 ? &mask : nullptr);
    per[static_cast<size_t>(i)] = {static_cast<double>(t.val(nodes.loss).data[0]),
                                   static_cast<double>(t.val(nodes.recon).data[0]),
                                   static_cast<double>(t.val(nodes.kl).data[0])};
    if (grads_out) {
      t.backward(nodes.loss);
      GradsT<Real>& gi = grads[static_cast<size_t>(i)];
      gi.g.reserve(P.node.size());
      for (int pn : P.node) gi.g.push_back(t.grad(pn));
    }
  }

  BatchMetrics m;
  for (const auto& s : per) {
    m.loss += s.loss;
    m.recon += s.recon;
    m.kl += s.kl;
  }
  m.loss /= n;
  m.recon /= n;
  m.kl /= n;
  if (grads_out) {
    *grads_out = GradsT<Real>::like(params);
    for (const auto& gi : grads) grads_out->add(gi);
    grads_out->scale(Real(1) / Real(n));
  }
  return m;
}

}  // namespace autr
