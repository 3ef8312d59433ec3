#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "autr/tensor.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace autr::kernels {

// Worker cap shared by every parallel loop in the project. Settable once at
// startup from AUTR_THREADS; defaults to the OpenMP runtime value.
int max_threads();
void set_max_threads(int n);

// Every parallel kernel partitions output elements across threads and keeps
// each element's reduction serial, so results are bit-identical to the
// serial reference for any thread count.

// ---- matmul: C = A(m×k) · B(k×n), row-major ----

template <class Real>
void matmul_serial(const Real* a, const Real* b, Real* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    Real* ci = c + static_cast<size_t>(i) * n;
    const Real* ai = a + static_cast<size_t>(i) * k;
    for (int j = 0; j < n; ++j) ci[j] = Real(0);
    for (int p = 0; p < k; ++p) {
      Real aip = ai[p];
      const Real* bp = b + static_cast<size_t>(p) * n;
      for (int j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
  }
}

template <class Real>
void matmul_omp(const Real* a, const Real* b, Real* c, int m, int k, int n) {
#pragma omp parallel for schedule(static) num_threads(max_threads())
  for (int i = 0; i < m; ++i) {
    Real* ci = c + static_cast<size_t>(i) * n;
    const Real* ai = a + static_cast<size_t>(i) * k;
    for (int j = 0; j < n; ++j) ci[j] = Real(0);
    for (int p = 0; p < k; ++p) {
      Real aip = ai[p];
      const Real* bp = b + static_cast<size_t>(p) * n;
      for (int j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
  }
}

inline bool parallel_worthwhile(int64_t flops, int rows) {
  return max_threads() > 1 && rows > 1 && flops >= (1 << 16);
}

template <class Real>
void matmul(const Real* a, const Real* b, Real* c, int m, int k, int n) {
  if (parallel_worthwhile(int64_t{2} * m * k * n, m))
    matmul_omp(a, b, c, m, k, n);
  else
    matmul_serial(a, b, c, m, k, n);
}

// ---- matmul gradients ----
// dA += dC(m×n) · Bᵀ(n×k)
template <class Real>
void matmul_acc_da(const Real* dc, const Real* b, Real* da, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    Real* dai = da + static_cast<size_t>(i) * k;
    const Real* dci = dc + static_cast<size_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      const Real* bp = b + static_cast<size_t>(p) * n;
      Real s = Real(0);
      for (int j = 0; j < n; ++j) s += dci[j] * bp[j];
      dai[p] += s;
    }
  }
}

// dB += Aᵀ(k×m) · dC(m×n)
template <class Real>
void matmul_acc_db(const Real* a, const Real* dc, Real* db, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const Real* ai = a + static_cast<size_t>(i) * k;
    const Real* dci = dc + static_cast<size_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      Real aip = ai[p];
      Real* dbp = db + static_cast<size_t>(p) * n;
      for (int j = 0; j < n; ++j) dbp[j] += aip * dci[j];
    }
  }
}

// ---- shared scalar maps ----

template <class Real>
Real sigmoid(Real x) {
  return Real(1) / (Real(1) + std::exp(-x));
}

// ---- softmax family, shared by the tape ops and the inference path ----

inline constexpr double kEps = 1e-12;

// Stabilized masked softmax. mask may be null (all active). Zeros at masked
// positions. Throws MaskError when no position is active.
template <class Real>
void masked_softmax(const Real* x, const uint8_t* mask, Real* y, int n) {
  Real m = Real(0);
  bool any = false;
  for (int i = 0; i < n; ++i) {
    if (mask && !mask[i]) continue;
    if (!any || x[i] > m) m = x[i];
    any = true;
  }
  if (!any) throw MaskError("softmax: degenerate mask, all " + std::to_string(n) + " positions masked");
  Real denom = Real(0);
  for (int i = 0; i < n; ++i) {
    if (mask && !mask[i]) {
      y[i] = Real(0);
    } else {
      y[i] = std::exp(x[i] - m);
      denom += y[i];
    }
  }
  for (int i = 0; i < n; ++i) y[i] /= denom;
}

template <class Real>
void log_softmax(const Real* x, Real* y, int n) {
  Real m = x[0];
  for (int i = 1; i < n; ++i) m = std::max(m, x[i]);
  Real denom = Real(0);
  for (int i = 0; i < n; ++i) denom += std::exp(x[i] - m);
  Real lse = m + std::log(denom);
  for (int i = 0; i < n; ++i) y[i] = x[i] - lse;
}

}  // namespace autr::kernels
