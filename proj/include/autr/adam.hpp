#pragma once

#include <cmath>
#include <cstdint>

#include "autr/elbo.hpp"
#include "autr/params.hpp"

namespace autr {

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEps = 1e-8;

template <class Real>
struct AdamStateT {
  std::vector<TensorT<Real>> m, v;
  int64_t step = 0;

  static AdamStateT like(const ModelParamsT<Real>& p) {
    AdamStateT s;
    for (const auto& t : p.tensors) {
      s.m.push_back(TensorT<Real>::zeros(t.shape));
      s.v.push_back(TensorT<Real>::zeros(t.shape));
    }
    return s;
  }
};

// Bias-corrected Adam with the reference constants.
template <class Real>
void adam_step(ModelParamsT<Real>& params, const GradsT<Real>& grads, AdamStateT<Real>& st,
               double lr) {
  st.step += 1;
  double bc1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(st.step));
  double bc2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(st.step));
  for (size_t i = 0; i < params.tensors.size(); ++i) {
    auto& p = params.tensors[i].data;
    const auto& g = grads.g[i].data;
    auto& m = st.m[i].data;
    auto& v = st.v[i].data;
    for (size_t j = 0; j < p.size(); ++j) {
      double gj = static_cast<double>(g[j]);
      double mj = kAdamBeta1 * static_cast<double>(m[j]) + (1.0 - kAdamBeta1) * gj;
      double vj = kAdamBeta2 * static_cast<double>(v[j]) + (1.0 - kAdamBeta2) * gj * gj;
      m[j] = static_cast<Real>(mj);
      v[j] = static_cast<Real>(vj);
      double update = lr * (mj / bc1) / (std::sqrt(vj / bc2) + kAdamEps);
      p[j] = static_cast<Real>(static_cast<double>(p[j]) - update);
    }
  }
}

// min(1, iter / anneal_end); anneal_end = 0 keeps the KL at full weight
inline double anneal_weight(int64_t iter, int64_t anneal_end) {
  if (iter < 0) throw ContractError("anneal_weight: negative iteration");
  if (anneal_end <= 0) return 1.0;
  if (iter >= anneal_end) return 1.0;
  return static_cast<double>(iter) / static_cast<double>(anneal_end);
}

}  // namespace autr
