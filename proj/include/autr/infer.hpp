#pragma once

#include <vector>

#include "autr/data.hpp"
#include "autr/hyper.hpp"
#include "autr/kernels.hpp"
#include "autr/params.hpp"

namespace autr {

// Tape-free forward evaluation for decoding. Applies the same kernels in
// the same order as the tape graphs, so outputs are bit-identical to a
// no-grad tape run (the test suite asserts this).
template <class Real>
class InferT {
 public:
  using Tensor = TensorT<Real>;

  InferT(const ModelParamsT<Real>& params, const Hyper& hyper) : p_(&params), h_(hyper) {}

  const Hyper& hyper() const { return h_; }
  const ModelParamsT<Real>& params() const { return *p_; }

  struct Posterior {
    Tensor mu, logvar;
  };

  Posterior encode(const EncodedSentence& x) const {
    const Tensor& emb = p_->get("emb");
    const Tensor& W = p_->get("enc.lstm.W");
    const Tensor& b = p_->get("enc.lstm.b");
    Tensor hs = Tensor::zeros({h_.H});
    Tensor cs = Tensor::zeros({h_.H});
    std::vector<Real> input(static_cast<size_t>(h_.E));
    for (int l = 0; l < h_.L; ++l) {
      const Real* row = emb.data.data() + static_cast<size_t>(x.ids[static_cast<size_t>(l)]) * h_.E;
      std::copy(row, row + h_.E, input.begin());
      lstm_step(W, b, input, hs, cs);
    }
    Tensor f = affine(p_->get("enc.ff.W"), hs, &p_->get("enc.ff.b"));
    for (auto& v : f.data) v = std::tanh(v);
    Posterior post;
    post.mu = affine(p_->get("enc.mu.W"), f, &p_->get("enc.mu.b"));
    post.logvar = affine(p_->get("enc.lv.W"), f, &p_->get("enc.lv.b"));
    for (auto& v : post.logvar.data)
      v = std::min(Real(kLogvarClamp), std::max(Real(-kLogvarClamp), v));
    return post;
  }

  static Tensor sample_z(const Posterior& post, const Tensor& eps) {
    Tensor z = Tensor::zeros(post.mu.shape);
    for (size_t i = 0; i < z.data.size(); ++i) {
      Real sigma = std::exp(post.logvar.data[i] * Real(0.5));
      z.data[i] = post.mu.data[i] + sigma * eps.data[i];
    }
    return z;
  }

  static Real kl(const Posterior& post) {
    Real s = Real(0);
    for (size_t i = 0; i < post.mu.data.size(); ++i) {
      Real mu = post.mu.data[i], lv = post.logvar.data[i];
      s += (mu * mu + std::exp(lv)) + Real(-1) - lv;
    }
    return s * Real(0.5);
  }

  // ---- writer ----

  struct WriterRun {
    Tensor canvas, cum;
    std::vector<Tensor> step_canvases, step_cums, step_gates;
  };

  // Same arithmetic as the tape gate: headroom with snap-to-zero, stabilized
  // exp, epsilon-guarded denominator.
  static void gate_attention(const Real* logits, const Real* cum, Real* gate, int L) {
    std::vector<Real> s(static_cast<size_t>(L));
    for (int i = 0; i < L; ++i) {
      Real v = Real(1) - cum[i];
      if (!(v >= Real(1e-9))) v = Real(0);
      if (v > Real(1)) v = Real(1);
      s[static_cast<size_t>(i)] = v;
    }
    Real m = logits[0];
    for (int i = 1; i < L; ++i) m = std::max(m, logits[i]);
    std::vector<Real> w(static_cast<size_t>(L));
    Real denom = Real(0);
    for (int i = 0; i < L; ++i) {
      w[static_cast<size_t>(i)] = std::exp(logits[i] - m) * s[static_cast<size_t>(i)];
      denom += w[static_cast<size_t>(i)];
    }
    denom += Real(kernels::kEps);
    Real inv = Real(1) / std::max(denom, Real(kernels::kEps));
    for (int i = 0; i < L; ++i)
      gate[i] = (w[static_cast<size_t>(i)] * s[static_cast<size_t>(i)]) * inv;
  }

  WriterRun run_writer(const Tensor& z, int steps, bool trace = false) const {
    if (steps < 1) throw ContractError("writer: need at least one step");
    const Tensor& W = p_->get("wr.lstm.W");
    const Tensor& b = p_->get("wr.lstm.b");
    const Tensor& Wread = p_->get("wr.read.W");
    const Tensor& Wgate = p_->get("wr.gate.W");
    const Tensor& Wup = p_->get("wr.update.W");
    WriterRun run;
    run.canvas = Tensor::zeros({h_.L, h_.E});
    run.cum = Tensor::zeros({h_.L});
    Tensor hs = Tensor::zeros({h_.H});
    Tensor cs = Tensor::zeros({h_.H});
    std::vector<Real> read(static_cast<size_t>(h_.R));
    std::vector<Real> input(static_cast<size_t>(h_.Dz + h_.R));
    std::vector<Real> logits(static_cast<size_t>(h_.L));
    std::vector<Real> gate(static_cast<size_t>(h_.L));
    std::vector<Real> update(static_cast<size_t>(h_.L) * h_.E);
    for (int step = 0; step < steps; ++step) {
      kernels::matmul(Wread.data.data(), run.canvas.data.data(), read.data(), h_.R, h_.L * h_.E, 1);
      std::copy(z.data.begin(), z.data.end(), input.begin());
      std::copy(read.begin(), read.end(), input.begin() + h_.Dz);
      lstm_step(W, b, input, hs, cs);
      kernels::matmul(Wgate.data.data(), hs.data.data(), logits.data(), h_.L, h_.H, 1);
      gate_attention(logits.data(), run.cum.data.data(), gate.data(), h_.L);
      kernels::matmul(Wup.data.data(), hs.data.data(), update.data(), h_.L * h_.E, h_.H, 1);
      for (int l = 0; l < h_.L; ++l) {
        Real g = gate[static_cast<size_t>(l)];
        if (g != Real(0)) {
          Real keep = Real(1) - g;
          for (int j = 0; j < h_.E; ++j)
            run.canvas.at(l, j) = keep * run.canvas.at(l, j) + g * update[static_cast<size_t>(l) * h_.E + j];
        }
        run.cum.at(l) = run.cum.at(l) + g;
      }
      if (trace) {
        run.step_canvases.push_back(run.canvas);
        run.step_cums.push_back(run.cum);
        Tensor gt = Tensor::zeros({h_.L});
        std::copy(gate.begin(), gate.end(), gt.data.begin());
        run.step_gates.push_back(std::move(gt));
      }
    }
    return run;
  }

  // ---- emission ----

  // softmax over the first l−1 logits of W_ctx·z, returned at length l−1
  std::vector<Real> context_weights(const Tensor& z, int l) const {
    if (l < 2) throw ContractError("context_weights: defined for l >= 2, got l=" + std::to_string(l));
    std::vector<Real> logits(static_cast<size_t>(h_.L));
    kernels::matmul(p_->get("emis.ctx.W").data.data(), z.data.data(), logits.data(), h_.L, h_.Dz, 1);
    std::vector<uint8_t> mask(static_cast<size_t>(h_.L), 0);
    for (int i = 0; i < l - 1; ++i) mask[static_cast<size_t>(i)] = 1;
    std::vector<Real> w(static_cast<size_t>(h_.L));
    kernels::masked_softmax(logits.data(), mask.data(), w.data(), h_.L);
    w.resize(static_cast<size_t>(l - 1));
    return w;
  }

  // log p(x_l = · | z, prev, C_l) over the whole vocabulary
  std::vector<Real> emission_logprobs(const Tensor& z, const Tensor& canvas, int l,
                                      const std::vector<int>& prev_ids) const {
    if (static_cast<int>(prev_ids.size()) != l - 1)
      throw ContractError("emission: need l-1 context ids, got " + std::to_string(prev_ids.size()));
    const Tensor& emb = p_->get("emb");
    std::vector<Real> zproj(static_cast<size_t>(h_.E));
    kernels::matmul(p_->get("emis.z.W").data.data(), z.data.data(), zproj.data(), h_.E, h_.Dz, 1);
    std::vector<Real> b(static_cast<size_t>(h_.E));
    for (int j = 0; j < h_.E; ++j) b[static_cast<size_t>(j)] = canvas.at(l - 1, j) + zproj[static_cast<size_t>(j)];
    if (l >= 2) {
      std::vector<Real> w = context_weights(z, l);
      std::vector<Real> ctx(static_cast<size_t>(h_.E));
      for (int j = 0; j < h_.E; ++j) {
        Real s = Real(0);
        for (int i = 0; i < l - 1; ++i)
          s += emb.at(prev_ids[static_cast<size_t>(i)], j) * w[static_cast<size_t>(i)];
        ctx[static_cast<size_t>(j)] = s;
      }
      std::vector<Real> xproj(static_cast<size_t>(h_.E));
      kernels::matmul(p_->get("emis.x.W").data.data(), ctx.data(), xproj.data(), h_.E, h_.E, 1);
      for (int j = 0; j < h_.E; ++j) b[static_cast<size_t>(j)] += xproj[static_cast<size_t>(j)];
    }
    std::vector<Real> logits(static_cast<size_t>(h_.V));
    kernels::matmul(emb.data.data(), b.data(), logits.data(), h_.V, h_.E, 1);
    std::vector<Real> logp(static_cast<size_t>(h_.V));
    kernels::log_softmax(logits.data(), logp.data(), h_.V);
    return logp;
  }

  Real autr_logprob(const Tensor& z, const Tensor& canvas, const EncodedSentence& x) const {
    Real total = Real(0);
    for (int l = 1; l <= h_.L; ++l) {
      std::vector<int> prev(x.ids.begin(), x.ids.begin() + (l - 1));
      auto logp = emission_logprobs(z, canvas, l, prev);
      total += logp[static_cast<size_t>(x.ids[static_cast<size_t>(l - 1)])];
    }
    return total;
  }

  // ---- baseline decoder stepping ----

  struct BaselineState {
    Tensor h, c;
  };

  BaselineState baseline_init() const {
    return {Tensor::zeros({h_.H}), Tensor::zeros({h_.H})};
  }

  // Advances one step on prev_id (-1 = begin of sentence, zero embedding)
  // and returns log-probabilities over the vocabulary.
  std::vector<Real> baseline_step(const Tensor& z, int prev_id, BaselineState& s) const {
    const Tensor& table = p_->get(h_.share_embeddings ? "emb" : "bl.emb");
    std::vector<Real> input(static_cast<size_t>(h_.Dz + h_.E), Real(0));
    std::copy(z.data.begin(), z.data.end(), input.begin());
    if (prev_id >= 0) {
      const Real* row = table.data.data() + static_cast<size_t>(prev_id) * h_.E;
      std::copy(row, row + h_.E, input.begin() + h_.Dz);
    }
    lstm_step(p_->get("bl.lstm.W"), p_->get("bl.lstm.b"), input, s.h, s.c);
    Tensor logits = affine(p_->get("bl.out.W"), s.h, &p_->get("bl.out.b"));
    std::vector<Real> logp(static_cast<size_t>(h_.V));
    kernels::log_softmax(logits.data.data(), logp.data(), h_.V);
    return logp;
  }

  Real baseline_logprob(const Tensor& z, const EncodedSentence& x) const {
    BaselineState s = baseline_init();
    Real total = Real(0);
    for (int l = 1; l <= h_.L; ++l) {
      int prev = l == 1 ? -1 : x.ids[static_cast<size_t>(l - 2)];
      auto logp = baseline_step(z, prev, s);
      total += logp[static_cast<size_t>(x.ids[static_cast<size_t>(l - 1)])];
    }
    return total;
  }

  // sentence log-prob for either decoder; AUTR canvas recomputed from z
  Real sentence_logprob(DecoderKind kind, const Tensor& z, const EncodedSentence& x) const {
    if (kind == DecoderKind::Autr) {
      WriterRun run = run_writer(z, h_.T);
      return autr_logprob(z, run.canvas, x);
    }
    return baseline_logprob(z, x);
  }

 private:
  const ModelParamsT<Real>* p_;
  Hyper h_;

  Tensor affine(const Tensor& W, const Tensor& x, const Tensor* bias) const {
    Tensor y = Tensor::zeros({W.rows()});
    kernels::matmul(W.data.data(), x.data.data(), y.data.data(), W.rows(), W.cols(), 1);
    if (bias)
      for (int i = 0; i < W.rows(); ++i) y.at(i) = y.at(i) + bias->at(i);
    return y;
  }

  // fused preactivation then the same gate arithmetic as the tape builder
  void lstm_step(const Tensor& W, const Tensor& b, const std::vector<Real>& input, Tensor& hs,
                 Tensor& cs) const {
    int H = h_.H;
    std::vector<Real> xh(input.size() + static_cast<size_t>(H));
    std::copy(input.begin(), input.end(), xh.begin());
    std::copy(hs.data.begin(), hs.data.end(), xh.begin() + static_cast<long>(input.size()));
    std::vector<Real> pre(static_cast<size_t>(4 * H));
    kernels::matmul(W.data.data(), xh.data(), pre.data(), 4 * H, static_cast<int>(xh.size()), 1);
    for (int i = 0; i < 4 * H; ++i) pre[static_cast<size_t>(i)] += b.at(i);
    for (int i = 0; i < H; ++i) {
      Real gi = kernels::sigmoid(pre[static_cast<size_t>(kGateI * H + i)]);
      Real gf = kernels::sigmoid(pre[static_cast<size_t>(kGateF * H + i)]);
      Real gg = std::tanh(pre[static_cast<size_t>(kGateG * H + i)]);
      Real go = kernels::sigmoid(pre[static_cast<size_t>(kGateO * H + i)]);
      Real c = gf * cs.at(i) + gi * gg;
      cs.at(i) = c;
      hs.at(i) = go * std::tanh(c);
    }
  }
};

using Infer = InferT<float>;

}  // namespace autr
