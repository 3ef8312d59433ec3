#pragma once

#include <cmath>
#include <functional>
#include <string>

#include "autr/elbo.hpp"
#include "autr/model.hpp"

namespace autr::testing {

// Central finite differences against reverse-mode gradients over every
// parameter element. build must construct the loss on the given tape and
// return the loss node.
struct GradCheck {
  double max_rel_err = 0;
  std::string worst;  // "name[i]"
  bool ok(double tol = 1e-4) const { return max_rel_err < tol; }
};

template <class Build>
GradCheck gradcheck(ModelParamsT<double> params, Build build, double h = 1e-4) {
  GradCheck r;

  TapeT<double> tape;
  BoundParams<double> P = bind_params(tape, params, true);
  int loss = build(tape, P);
  tape.backward(loss);
  std::vector<TensorT<double>> analytic;
  for (int node : P.node) analytic.push_back(tape.grad(node));

  auto eval = [&]() {
    TapeT<double> t;
    BoundParams<double> bound = bind_params(t, params, false);
    return t.val(build(t, bound)).data[0];
  };

  for (size_t ti = 0; ti < params.tensors.size(); ++ti) {
    auto& data = params.tensors[ti].data;
    for (size_t j = 0; j < data.size(); ++j) {
      double saved = data[j];
      data[j] = saved + h;
      double up = eval();
      data[j] = saved - h;
      double down = eval();
      data[j] = saved;
      double numeric = (up - down) / (2 * h);
      double a = analytic[ti].data[j];
      double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
      if (rel > r.max_rel_err) {
        r.max_rel_err = rel;
        r.worst = params.names[ti] + "[" + std::to_string(j) + "]";
      }
    }
  }
  return r;
}

// toy dimensions used across the unit tests
inline Hyper tiny_hyper(int V = 12) {
  Hyper h;
  h.L = 5;
  h.E = 6;
  h.T = 3;
  h.H = 8;
  h.Dz = 4;
  h.R = 7;
  h.V = V;
  return h;
}

inline EncodedSentence ids_sentence(std::vector<int> ids) {
  EncodedSentence x;
  x.ids = std::move(ids);
  x.true_length = static_cast<int>(x.ids.size());
  for (size_t i = 0; i < x.ids.size(); ++i)
    if (x.ids[i] == Vocabulary::kEos) {
      x.true_length = static_cast<int>(i) + 1;
      break;
    }
  return x;
}

}  // namespace autr::testing
