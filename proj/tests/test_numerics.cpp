#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "autr/kernels.hpp"
#include "autr/rng.hpp"
#include "autr/tape.hpp"
#include "common.hpp"

using namespace autr;

namespace {

TensorT<double> random_tensor(std::vector<int> shape, Rng& rng, double scale = 1.0) {
  auto t = TensorT<double>::zeros(std::move(shape));
  for (auto& v : t.data) v = scale * rng.normal();
  return t;
}

// independent elementwise sum-of-products oracle
TensorT<double> matmul_oracle(const TensorT<double>& a, const TensorT<double>& b) {
  auto c = TensorT<double>::zeros({a.rows(), b.cols()});
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < b.cols(); ++j) {
      double s = 0;
      for (int k = 0; k < a.cols(); ++k) s += a.at(i, k) * b.at(k, j);
      c.at(i, j) = s;
    }
  return c;
}

}  // namespace

TEST_CASE("matmul identity and zero-row cases") {
  TapeT<double> t;
  int i2 = t.constant(TensorT<double>({2, 2}, {1, 0, 0, 1}));
  int m = t.constant(TensorT<double>({2, 2}, {1, 2, 3, 4}));
  int out = t.matmul(i2, m);
  CHECK(t.val(out).data == std::vector<double>{1, 2, 3, 4});

  int a = t.constant(TensorT<double>({1, 2}, {1, 0}));
  int b = t.constant(TensorT<double>({2, 1}, {0, 5}));
  CHECK(t.val(t.matmul(a, b)).data == std::vector<double>{0});
}

TEST_CASE("matmul matches brute-force oracle") {
  Rng rng(1, "matmul");
  TapeT<double> t;
  auto A = random_tensor({3, 4}, rng);
  auto B = random_tensor({4, 2}, rng);
  int out = t.matmul(t.constant(A), t.constant(B));
  auto expect = matmul_oracle(A, B);
  for (size_t i = 0; i < expect.data.size(); ++i)
    CHECK(t.val(out).data[i] == doctest::Approx(expect.data[i]).epsilon(1e-12));
}

TEST_CASE("matmul rejects mismatched inner dimensions, names both shapes") {
  TapeT<double> t;
  int a = t.constant(TensorT<double>::zeros({2, 3}));
  int b = t.constant(TensorT<double>::zeros({4, 2}));
  CHECK_THROWS_WITH_AS(t.matmul(a, b), doctest::Contains("[2x3]"), ShapeError);
  try {
    t.matmul(a, b);
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()).find("[4x2]") != std::string::npos);
  }
}

TEST_CASE("matmul associativity on random conforming triples") {
  Rng rng(2, "assoc");
  for (int rep = 0; rep < 20; ++rep) {
    TapeT<double> t;
    auto A = random_tensor({3, 5}, rng);
    auto B = random_tensor({5, 4}, rng);
    auto C = random_tensor({4, 2}, rng);
    int ab_c = t.matmul(t.matmul(t.constant(A), t.constant(B)), t.constant(C));
    int a_bc = t.matmul(t.constant(A), t.matmul(t.constant(B), t.constant(C)));
    for (size_t i = 0; i < t.val(ab_c).data.size(); ++i) {
      double x = t.val(ab_c).data[i], y = t.val(a_bc).data[i];
      CHECK(std::abs(x - y) / std::max({std::abs(x), std::abs(y), 1.0}) < 1e-4);
    }
  }
}

TEST_CASE("parallel matmul is bit-identical to the serial reference") {
  Rng rng(3, "omp");
  std::vector<float> a(96 * 80), b(80 * 64), c1(96 * 64), c2(96 * 64);
  for (auto& v : a) v = static_cast<float>(rng.normal());
  for (auto& v : b) v = static_cast<float>(rng.normal());
  kernels::matmul_serial(a.data(), b.data(), c1.data(), 96, 80, 64);
  int saved = kernels::max_threads();
  kernels::set_max_threads(4);
  kernels::matmul_omp(a.data(), b.data(), c2.data(), 96, 80, 64);
  kernels::set_max_threads(saved);
  CHECK(c1 == c2);
}

TEST_CASE("softmax trivial and stability cases") {
  TapeT<double> t;
  int even = t.softmax(t.constant(TensorT<double>({2}, {0, 0})));
  CHECK(t.val(even).data[0] == doctest::Approx(0.5));
  CHECK(t.val(even).data[1] == doctest::Approx(0.5));

  int spiky = t.softmax(t.constant(TensorT<double>({2}, {1000, 0})));
  CHECK(t.val(spiky).data[0] == doctest::Approx(1.0));
  CHECK(t.val(spiky).data[1] == doctest::Approx(0.0));
  CHECK(t.val(spiky).all_finite());
}

TEST_CASE("softmax matches direct exp/sum evaluation") {
  TapeT<double> t;
  int out = t.softmax(t.constant(TensorT<double>({3}, {1, 2, 3})));
  double denom = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
  for (int i = 0; i < 3; ++i)
    CHECK(t.val(out).data[static_cast<size_t>(i)] ==
          doctest::Approx(std::exp(1.0 + i) / denom).epsilon(1e-12));
}

TEST_CASE("softmax sums to one and is permutation-equivariant") {
  Rng rng(4, "perm");
  for (int rep = 0; rep < 25; ++rep) {
    int n = 2 + static_cast<int>(rng.below(6));
    auto x = random_tensor({n}, rng, 3.0);
    std::vector<int> perm(static_cast<size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);

    TapeT<double> t;
    auto y = t.val(t.softmax(t.constant(x)));
    double total = std::accumulate(y.data.begin(), y.data.end(), 0.0);
    CHECK(std::abs(total - 1.0) < 1e-6);

    auto px = TensorT<double>::zeros({n});
    for (int i = 0; i < n; ++i) px.at(i) = x.at(perm[static_cast<size_t>(i)]);
    auto py = t.val(t.softmax(t.constant(px)));
    for (int i = 0; i < n; ++i)
      CHECK(py.at(i) == doctest::Approx(y.at(perm[static_cast<size_t>(i)])).epsilon(1e-12));
  }
}

TEST_CASE("masked softmax zeros masked slots; degenerate mask throws") {
  TapeT<double> t;
  int x = t.constant(TensorT<double>({3}, {5, 1, 2}));
  int y = t.softmax(x, {0, 1, 1});
  CHECK(t.val(y).data[0] == 0.0);
  double denom = std::exp(1.0) + std::exp(2.0);
  CHECK(t.val(y).data[1] == doctest::Approx(std::exp(1.0) / denom));
  CHECK_THROWS_AS(t.softmax(x, {0, 0, 0}), MaskError);
}

TEST_CASE("elementwise basics") {
  TapeT<double> t;
  CHECK(t.val(t.sigmoid(t.scalar(0))).data[0] == doctest::Approx(0.5));
  CHECK(t.val(t.tanh(t.scalar(0))).data[0] == doctest::Approx(0.0));
  int prod = t.mul(t.constant(TensorT<double>({2}, {1, 2})), t.constant(TensorT<double>({2}, {3, 4})));
  CHECK(t.val(prod).data == std::vector<double>{3, 8});

  // scalar <-> tensor broadcasting is supported, unequal shapes are not
  int bcast = t.add(t.scalar(1), t.constant(TensorT<double>({2}, {3, 4})));
  CHECK(t.val(bcast).data == std::vector<double>{4, 5});
  CHECK_THROWS_AS(t.add(t.constant(TensorT<double>::zeros({2})), t.constant(TensorT<double>::zeros({3}))),
                  ShapeError);
}

TEST_CASE("log floors its argument at 1e-12") {
  TapeT<double> t;
  int y = t.log(t.constant(TensorT<double>({2}, {0.0, 1.0})));
  CHECK(t.val(y).data[0] == doctest::Approx(std::log(1e-12)));
  CHECK(t.val(y).data[1] == doctest::Approx(0.0));
  CHECK(t.val(y).all_finite());
}

TEST_CASE("gather_rows basics and gradient accumulation for duplicates") {
  TapeT<double> t;
  int table = t.leaf(TensorT<double>({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1}), true);
  int got = t.gather_rows(table, {0});
  CHECK(t.val(got).data == std::vector<double>{1, 0, 0});

  // two uses of the same row add both gradient contributions
  int both = t.gather_rows(table, {2, 2});
  int loss = t.sum(both);
  t.backward(loss);
  CHECK(t.grad(table).at(2, 0) == 2.0);
  CHECK(t.grad(table).at(0, 0) == 0.0);

  CHECK_THROWS_WITH_AS(t.gather_rows(table, {3}), doctest::Contains("3"), IndexError);
}

TEST_CASE("gather_rows matches a naive copy oracle") {
  Rng rng(5, "gather");
  auto table = random_tensor({7, 4}, rng);
  std::vector<int> ids = {3, 0, 6, 3, 2};
  TapeT<double> t;
  auto out = t.val(t.gather_rows(t.constant(table), ids));
  for (size_t r = 0; r < ids.size(); ++r)
    for (int j = 0; j < 4; ++j)
      CHECK(out.at(static_cast<int>(r), j) == table.at(ids[r], j));
}

TEST_CASE("backward basics") {
  TapeT<double> t;
  int x = t.leaf(TensorT<double>::scalar(3), true);
  int y = t.mul(x, x);
  t.backward(y);
  CHECK(t.grad(x).data[0] == doctest::Approx(6.0));

  // constant loss: untouched parameter keeps a zero gradient
  TapeT<double> t2;
  int p = t2.leaf(TensorT<double>::scalar(4), true);
  int c = t2.scalar(7);
  t2.backward(c);
  CHECK(t2.grad(p).data[0] == 0.0);

  TapeT<double> t3;
  int v = t3.leaf(TensorT<double>::zeros({3}), true);
  CHECK_THROWS_AS(t3.backward(v), ContractError);
}

namespace {

// finite differences for a scalar function of one input tensor
template <class Build>
void op_gradcheck(const char* label, const TensorT<double>& x0, Build build, double tol = 1e-4) {
  INFO(std::string(label));
  TapeT<double> tape;
  int x = tape.leaf(x0, true);
  tape.backward(build(tape, x));
  auto analytic = tape.grad(x);

  double h = 1e-5;
  TensorT<double> probe = x0;
  for (size_t j = 0; j < probe.data.size(); ++j) {
    double saved = probe.data[j];
    auto eval = [&](double v) {
      probe.data[j] = v;
      TapeT<double> t;
      return t.val(build(t, t.leaf(probe, false))).data[0];
    };
    double num = (eval(saved + h) - eval(saved - h)) / (2 * h);
    probe.data[j] = saved;
    double a = analytic.data[j];
    double rel = std::abs(a - num) / std::max({std::abs(a), std::abs(num), 1e-8});
    CHECK(rel < tol);
  }
}

}  // namespace

TEST_CASE("per-op gradients match finite differences") {
  Rng rng(6, "fd");
  auto vec = random_tensor({5}, rng, 0.8);
  auto mat = random_tensor({4, 5}, rng, 0.8);

  op_gradcheck("sigmoid", vec, [](TapeT<double>& t, int x) { return t.sum(t.sigmoid(x)); });
  op_gradcheck("tanh", vec, [](TapeT<double>& t, int x) { return t.sum(t.tanh(x)); });
  op_gradcheck("exp", vec, [](TapeT<double>& t, int x) { return t.sum(t.exp(x)); });
  op_gradcheck("softmax", vec, [](TapeT<double>& t, int x) { return t.pick(t.softmax(t.mul(x, x)), 1); });
  op_gradcheck("log_softmax", vec, [](TapeT<double>& t, int x) { return t.pick(t.log_softmax(x), 2); });
  op_gradcheck("scalar-const ops", vec, [](TapeT<double>& t, int x) {
    return t.sum(t.mul(t.add_c(x, 0.5), t.rsub_c(1.0, x)));
  });
  op_gradcheck("slice", vec, [](TapeT<double>& t, int x) { return t.sum(t.slice(x, 1, 3)); });
  op_gradcheck("recip", vec, [](TapeT<double>& t, int x) { return t.recip(t.add_c(t.sum(t.mul(x, x)), 1.0)); });
  op_gradcheck("transpose+row", mat, [](TapeT<double>& t, int x) { return t.sum(t.row(t.transpose(x), 2)); });
  auto fixed_vec = random_tensor({5}, rng, 0.5);
  op_gradcheck("matmul", mat, [&](TapeT<double>& t, int x) {
    return t.sum(t.matmul(x, t.constant(fixed_vec)));
  });
  op_gradcheck("concat", vec, [](TapeT<double>& t, int x) {
    // concat a slice of the vector with the vector itself, then a quadratic
    int c = t.concat({t.slice(x, 0, 2), x});
    return t.sum(t.mul(c, c));
  });

  // canvas update wrt all three inputs
  auto canvas = random_tensor({3, 4}, rng);
  auto gate0 = TensorT<double>({3}, {0.2, 0.7, 0.4});
  auto update = random_tensor({3, 4}, rng);
  op_gradcheck("canvas_update/canvas", canvas, [&](TapeT<double>& t, int x) {
    return t.sum(t.canvas_update(x, t.constant(gate0), t.constant(update)));
  });
  op_gradcheck("canvas_update/gate", gate0, [&](TapeT<double>& t, int x) {
    int cu = t.canvas_update(t.constant(canvas), x, t.constant(update));
    return t.sum(t.mul(cu, cu));
  });
  op_gradcheck("canvas_update/update", update, [&](TapeT<double>& t, int x) {
    return t.sum(t.canvas_update(t.constant(canvas), t.constant(gate0), x));
  });

  // headroom away from its kinks
  auto cum = TensorT<double>({4}, {0.05, 0.3, 0.6, 0.95});
  op_gradcheck("headroom", cum, [](TapeT<double>& t, int x) { return t.sum(t.mul(t.headroom(x), t.headroom(x))); });
}

TEST_CASE("finite outputs on finite inputs across composed ops") {
  Rng rng(7, "finite");
  for (int rep = 0; rep < 10; ++rep) {
    TapeT<double> t;
    auto x = random_tensor({6}, rng, 50.0);  // large magnitudes
    int n = t.constant(x);
    int y = t.softmax(n);
    int z = t.log_softmax(n);
    int w = t.exp(t.mul_c(n, 1e-3));
    CHECK(t.val(y).all_finite());
    CHECK(t.val(z).all_finite());
    CHECK(t.val(w).all_finite());
  }
}
