#pragma once

#include <cmath>
#include <string>
#include <unordered_map>
#include <vector>

#include "autr/hyper.hpp"
#include "autr/rng.hpp"
#include "autr/tensor.hpp"

namespace autr {

// Named collection of every learnable tensor, in a stable order shared by
// gradients, the optimizer and the checkpoint format.
template <class Real>
struct ModelParamsT {
  std::vector<std::string> names;
  std::vector<TensorT<Real>> tensors;
  std::unordered_map<std::string, int> index;

  int add(const std::string& name, TensorT<Real> t) {
    if (index.count(name)) throw ContractError("duplicate parameter name: " + name);
    index[name] = static_cast<int>(tensors.size());
    names.push_back(name);
    tensors.push_back(std::move(t));
    return static_cast<int>(tensors.size()) - 1;
  }
  bool has(const std::string& name) const { return index.count(name) > 0; }
  int idx(const std::string& name) const {
    auto it = index.find(name);
    if (it == index.end()) throw ContractError("unknown parameter: " + name);
    return it->second;
  }
  TensorT<Real>& get(const std::string& name) { return tensors[static_cast<size_t>(idx(name))]; }
  const TensorT<Real>& get(const std::string& name) const {
    return tensors[static_cast<size_t>(idx(name))];
  }
  int count() const { return static_cast<int>(tensors.size()); }
  int64_t numel() const {
    int64_t n = 0;
    for (const auto& t : tensors) n += t.numel();
    return n;
  }
  bool all_finite() const {
    for (const auto& t : tensors)
      if (!t.all_finite()) return false;
    return true;
  }

  template <class Other>
  ModelParamsT<Other> cast() const {
    ModelParamsT<Other> out;
    for (int i = 0; i < count(); ++i)
      out.add(names[static_cast<size_t>(i)], tensors[static_cast<size_t>(i)].template cast<Other>());
    return out;
  }
};

namespace detail {

// uniform(-a, a), a = sqrt(6 / (fan_in + fan_out)); every tensor draws from
// its own named stream so initialization does not depend on insertion order
template <class Real>
TensorT<Real> glorot(std::vector<int> shape, uint64_t seed, const std::string& name) {
  int fan_out = shape[0];
  int fan_in = shape.size() > 1 ? shape[1] : shape[0];
  double a = std::sqrt(6.0 / (fan_in + fan_out));
  auto t = TensorT<Real>::zeros(std::move(shape));
  Rng rng(seed, "init/" + name);
  for (auto& v : t.data) v = static_cast<Real>(rng.uniform(-a, a));
  return t;
}

}  // namespace detail

// LSTM gate layout within the fused weight/bias: [input; forget; cell; output]
inline constexpr int kGateI = 0, kGateF = 1, kGateG = 2, kGateO = 3;

template <class Real>
ModelParamsT<Real> init_params(const Hyper& h, uint64_t seed) {
  h.validate();
  using detail::glorot;
  ModelParamsT<Real> p;
  auto weight = [&](const std::string& name, std::vector<int> shape) {
    p.add(name, glorot<Real>(std::move(shape), seed, name));
  };
  auto lstm_bias = [&](const std::string& name) {
    auto b = TensorT<Real>::zeros({4 * h.H});
    for (int i = 0; i < h.H; ++i) b.at(kGateF * h.H + i) = Real(1);  // forget gate opens at init
    p.add(name, std::move(b));
  };

  weight("emb", {h.V, h.E});

  // writer: LSTM over [z ; read projection of the flattened canvas]
  weight("wr.lstm.W", {4 * h.H, h.Dz + h.R + h.H});
  lstm_bias("wr.lstm.b");
  weight("wr.read.W", {h.R, h.L * h.E});
  weight("wr.gate.W", {h.L, h.H});
  weight("wr.update.W", {h.L * h.E, h.H});

  // emission heads
  weight("emis.ctx.W", {h.L, h.Dz});
  weight("emis.x.W", {h.E, h.E});
  weight("emis.z.W", {h.E, h.Dz});

  // variational encoder
  weight("enc.lstm.W", {4 * h.H, h.E + h.H});
  lstm_bias("enc.lstm.b");
  weight("enc.ff.W", {h.H, h.H});
  p.add("enc.ff.b", TensorT<Real>::zeros({h.H}));
  weight("enc.mu.W", {h.Dz, h.H});
  p.add("enc.mu.b", TensorT<Real>::zeros({h.Dz}));
  weight("enc.lv.W", {h.Dz, h.H});
  p.add("enc.lv.b", TensorT<Real>::zeros({h.Dz}));

  // baseline decoder: LSTM over [z ; previous word embedding]
  weight("bl.lstm.W", {4 * h.H, h.Dz + h.E + h.H});
  lstm_bias("bl.lstm.b");
  weight("bl.out.W", {h.V, h.H});
  p.add("bl.out.b", TensorT<Real>::zeros({h.V}));
  if (!h.share_embeddings) weight("bl.emb", {h.V, h.E});

  return p;
}

inline std::vector<std::string> encoder_param_names() {
  return {"enc.lstm.W", "enc.lstm.b", "enc.ff.W", "enc.ff.b",
          "enc.mu.W",  "enc.mu.b",  "enc.lv.W", "enc.lv.b"};
}

inline std::vector<std::string> decoder_param_names(DecoderKind kind, const Hyper& h) {
  if (kind == DecoderKind::Autr)
    return {"emb",        "wr.lstm.W",  "wr.lstm.b", "wr.read.W", "wr.gate.W",
            "wr.update.W", "emis.ctx.W", "emis.x.W",  "emis.z.W"};
  std::vector<std::string> n = {"bl.lstm.W", "bl.lstm.b", "bl.out.W", "bl.out.b"};
  n.push_back(h.share_embeddings ? "emb" : "bl.emb");
  return n;
}

// Parameter count for one decoder path (its weights, the shared encoder and
// the embeddings it uses), for proportional comparisons between the two.
template <class Real>
int64_t param_count(const ModelParamsT<Real>& p, DecoderKind kind, const Hyper& h) {
  int64_t n = 0;
  for (const auto& name : decoder_param_names(kind, h)) n += p.get(name).numel();
  for (const auto& name : encoder_param_names()) n += p.get(name).numel();
  if (kind == DecoderKind::Baseline && !h.share_embeddings) n += p.get("emb").numel();
  return n;
}

}  // namespace autr
