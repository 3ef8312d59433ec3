#pragma once

#include <vector>

#include "autr/data.hpp"
#include "autr/hyper.hpp"
#include "autr/params.hpp"
#include "autr/tape.hpp"

namespace autr {

// Leaf node ids for every parameter tensor on one tape.
template <class Real>
struct BoundParams {
  const ModelParamsT<Real>* src = nullptr;
  std::vector<int> node;

  int operator()(const std::string& name) const {
    return node[static_cast<size_t>(src->idx(name))];
  }
};

template <class Real>
BoundParams<Real> bind_params(TapeT<Real>& t, const ModelParamsT<Real>& p, bool needs_grad) {
  BoundParams<Real> b;
  b.src = &p;
  b.node.reserve(p.tensors.size());
  for (const auto& tensor : p.tensors) b.node.push_back(t.leaf(tensor, needs_grad));
  return b;
}

template <class Real>
struct LstmState {
  int h, c;
};

template <class Real>
LstmState<Real> lstm_step(TapeT<Real>& t, int W, int b, int input, LstmState<Real> prev, int H) {
  int xh = t.concat({input, prev.h});
  int pre = t.add(t.matmul(W, xh), b);
  int gi = t.sigmoid(t.slice(pre, kGateI * H, H));
  int gf = t.sigmoid(t.slice(pre, kGateF * H, H));
  int gg = t.tanh(t.slice(pre, kGateG * H, H));
  int go = t.sigmoid(t.slice(pre, kGateO * H, H));
  int c = t.add(t.mul(gf, prev.c), t.mul(gi, gg));
  int h = t.mul(go, t.tanh(c));
  return {h, c};
}

// ---- variational encoder ----

template <class Real>
struct PosteriorNodes {
  int mu, logvar;
};

// LSTM over the embeddings of all L positions (PAD included), then a
// one-hidden-layer head with mean and log-variance outputs.
template <class Real>
PosteriorNodes<Real> encoder_graph(TapeT<Real>& t, const BoundParams<Real>& P, const Hyper& h,
                                   const EncodedSentence& x) {
  int embs = t.gather_rows(P("emb"), x.ids);
  LstmState<Real> s{t.constant(TensorT<Real>::zeros({h.H})), t.constant(TensorT<Real>::zeros({h.H}))};
  for (int l = 0; l < h.L; ++l)
    s = lstm_step(t, P("enc.lstm.W"), P("enc.lstm.b"), t.row(embs, l), s, h.H);
  int f = t.tanh(t.add(t.matmul(P("enc.ff.W"), s.h), P("enc.ff.b")));
  int mu = t.add(t.matmul(P("enc.mu.W"), f), P("enc.mu.b"));
  int lv = t.clamp(t.add(t.matmul(P("enc.lv.W"), f), P("enc.lv.b")), Real(-kLogvarClamp),
                   Real(kLogvarClamp));
  return {mu, lv};
}

// z = mu + exp(logvar/2) ⊙ eps, differentiable through mu and logvar
template <class Real>
int sample_z_node(TapeT<Real>& t, PosteriorNodes<Real> p, const TensorT<Real>& eps) {
  int sigma = t.exp(t.mul_c(p.logvar, Real(0.5)));
  return t.add(p.mu, t.mul(sigma, t.constant(eps)));
}

// KL(q || N(0,I)) = 1/2 Σ (mu² + σ² − 1 − log σ²)
template <class Real>
int kl_node(TapeT<Real>& t, PosteriorNodes<Real> p) {
  int inner = t.sub(t.add_c(t.add(t.mul(p.mu, p.mu), t.exp(p.logvar)), Real(-1)), p.logvar);
  return t.mul_c(t.sum(inner), Real(0.5));
}

// ---- writer ----

// Modified attention: g_l = [exp(a_l) s_l / (Σ_k exp(a_k) s_k + 1e-12)] · s_l
// with s_l the remaining headroom 1 − Σ_{t'<t} g_l. A fully saturated slot
// gets an exact-zero gate; an all-saturated canvas yields an all-zero gate.
template <class Real>
int gate_attention_graph(TapeT<Real>& t, int logits, int cumulative) {
  int s = t.headroom(cumulative);
  Real m = t.val(logits).data[0];
  for (Real v : t.val(logits).data) m = std::max(m, v);
  int e = t.exp(t.add_c(logits, -m));
  int w = t.mul(e, s);
  int denom = t.add_c(t.sum(w), Real(kernels::kEps));
  return t.mul(t.mul(w, s), t.recip(denom));
}

template <class Real>
struct WriterGraph {
  int canvas;  // final canvas [L×E]
  int cum;     // final cumulative attention [L]
  std::vector<int> gates, canvases, cums, hiddens;  // per step, only when traced
};

template <class Real>
struct WriterStep {
  LstmState<Real> lstm;
  int canvas, cum, gate;
};

// One writer step: LSTM on [z ; read(canvas)], gate, gated canvas update.
template <class Real>
WriterStep<Real> writer_step(TapeT<Real>& t, const BoundParams<Real>& P, const Hyper& h, int z,
                             LstmState<Real> lstm, int canvas, int cum) {
  int read = t.matmul(P("wr.read.W"), t.reshape(canvas, {h.L * h.E}));
  LstmState<Real> s = lstm_step(t, P("wr.lstm.W"), P("wr.lstm.b"), t.concat({z, read}), lstm, h.H);
  int gate = gate_attention_graph(t, t.matmul(P("wr.gate.W"), s.h), cum);
  int update = t.reshape(t.matmul(P("wr.update.W"), s.h), {h.L, h.E});
  int next_canvas = t.canvas_update(canvas, gate, update);
  int next_cum = t.add(cum, gate);
  return {s, next_canvas, next_cum, gate};
}

template <class Real>
WriterGraph<Real> writer_graph(TapeT<Real>& t, const BoundParams<Real>& P, const Hyper& h, int z,
                               int steps, bool trace = false) {
  if (steps < 1) throw ContractError("writer: need at least one step");
  LstmState<Real> lstm{t.constant(TensorT<Real>::zeros({h.H})),
                       t.constant(TensorT<Real>::zeros({h.H}))};
  WriterGraph<Real> g;
  g.canvas = t.constant(TensorT<Real>::zeros({h.L, h.E}));
  g.cum = t.constant(TensorT<Real>::zeros({h.L}));
  for (int step = 0; step < steps; ++step) {
    WriterStep<Real> w = writer_step(t, P, h, z, lstm, g.canvas, g.cum);
    lstm = w.lstm;
    g.canvas = w.canvas;
    g.cum = w.cum;
    if (trace) {
      g.gates.push_back(w.gate);
      g.canvases.push_back(w.canvas);
      g.cums.push_back(w.cum);
      g.hiddens.push_back(w.lstm.h);
    }
  }
  return g;
}

// ---- emission ----

// Softmax over the first l−1 entries of W_ctx·z. Callers must use a zero
// context at l = 1 instead.
template <class Real>
int context_weights_graph(TapeT<Real>& t, const BoundParams<Real>& P, const Hyper& h, int z, int l) {
  if (l < 2) throw ContractError("context_weights: defined for l >= 2, got l=" + std::to_string(l));
  if (l > h.L) throw ContractError("context_weights: l=" + std::to_string(l) + " beyond L");
  int logits = t.matmul(P("emis.ctx.W"), z);
  std::vector<uint8_t> mask(static_cast<size_t>(h.L), 0);
  for (int i = 0; i < l - 1; ++i) mask[static_cast<size_t>(i)] = 1;
  return t.slice(t.softmax(logits, std::move(mask)), 0, l - 1);
}

// Log-probabilities over the full vocabulary at position l (1-based):
// b_l = C_l + W_x·x̃_l + W_z·z, logits = emb · b_l. prev_ids are the context
// ids (dropout already applied by the caller).
template <class Real>
int emission_logprobs_graph(TapeT<Real>& t, const BoundParams<Real>& P, const Hyper& h, int z,
                            int canvas, int l, const std::vector<int>& prev_ids) {
  if (static_cast<int>(prev_ids.size()) != l - 1)
    throw ContractError("emission: need l-1 context ids, got " + std::to_string(prev_ids.size()));
  int zproj = t.matmul(P("emis.z.W"), z);
  int b = t.add(t.row(canvas, l - 1), zproj);
  if (l >= 2) {
    int w = context_weights_graph(t, P, h, z, l);
    int prev = t.gather_rows(P("emb"), prev_ids);
    int ctx = t.matmul(t.transpose(prev), w);
    b = t.add(b, t.matmul(P("emis.x.W"), ctx));
  }
  return t.log_softmax(t.matmul(P("emb"), b));
}

// Applies the word-dropout mask to the ids a position sees as context:
// dropped positions contribute e(<unk>) instead of their own embedding.
inline std::vector<int> context_ids(const EncodedSentence& x, const std::vector<uint8_t>* dropout) {
  std::vector<int> ids = x.ids;
  if (dropout)
    for (size_t i = 0; i < ids.size() && i < dropout->size(); ++i)
      if ((*dropout)[i]) ids[i] = Vocabulary::kUnk;
  return ids;
}

// log p(x | z, C^T): sum of emission log-probs of the observed ids over all
// L positions, PAD included as an ordinary vocabulary item.
template <class Real>
int autr_logprob_graph(TapeT<Real>& t, const BoundParams<Real>& P, const Hyper& h, int z,
                       int canvas, const EncodedSentence& x,
                       const std::vector<uint8_t>* dropout = nullptr) {
  std::vector<int> ctx = context_ids(x, dropout);
  int total = -1;
  for (int l = 1; l <= h.L; ++l) {
    std::vector<int> prev(ctx.begin(), ctx.begin() + (l - 1));
    int logp = emission_logprobs_graph(t, P, h, z, canvas, l, prev);
    int term = t.pick(logp, x.ids[static_cast<size_t>(l - 1)]);
    total = total < 0 ? term : t.add(total, term);
  }
  return total;
}

// ---- baseline decoder (one word per LSTM step, z concatenated to the input) ----

template <class Real>
int baseline_logprob_graph(TapeT<Real>& t, const BoundParams<Real>& P, const Hyper& h, int z,
                           const EncodedSentence& x, const std::vector<uint8_t>* dropout = nullptr) {
  int table = P(h.share_embeddings ? "emb" : "bl.emb");
  std::vector<int> ctx = context_ids(x, dropout);
  int embs = t.gather_rows(table, ctx);
  LstmState<Real> s{t.constant(TensorT<Real>::zeros({h.H})), t.constant(TensorT<Real>::zeros({h.H}))};
  int zero_emb = t.constant(TensorT<Real>::zeros({h.E}));
  int total = -1;
  for (int l = 1; l <= h.L; ++l) {
    int prev_emb = l == 1 ? zero_emb : t.row(embs, l - 2);
    s = lstm_step(t, P("bl.lstm.W"), P("bl.lstm.b"), t.concat({z, prev_emb}), s, h.H);
    int logp = t.log_softmax(t.add(t.matmul(P("bl.out.W"), s.h), P("bl.out.b")));
    int term = t.pick(logp, x.ids[static_cast<size_t>(l - 1)]);
    total = total < 0 ? term : t.add(total, term);
  }
  return total;
}

// recon log-prob for either decoder from a given z node
template <class Real>
int decoder_logprob_graph(TapeT<Real>& t, const BoundParams<Real>& P, const Hyper& h,
                          DecoderKind kind, int z, const EncodedSentence& x,
                          const std::vector<uint8_t>* dropout = nullptr) {
  if (kind == DecoderKind::Autr) {
    WriterGraph<Real> w = writer_graph(t, P, h, z, h.T);
    return autr_logprob_graph(t, P, h, z, w.canvas, x, dropout);
  }
  return baseline_logprob_graph(t, P, h, z, x, dropout);
}

}  // namespace autr
