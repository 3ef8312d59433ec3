#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "autr/kernels.hpp"
#include "autr/tensor.hpp"

namespace autr {

// Dynamic reverse-mode tape. Ops evaluate eagerly, so creation order is a
// topological order and backward() is a single reverse sweep. One tape per
// forward pass; distinct tapes share nothing and may run on distinct threads.
template <class Real>
class TapeT {
 public:
  using Tensor = TensorT<Real>;

  int leaf(Tensor value, bool needs_grad = false) {
    Node n;
    n.op = Op::Leaf;
    n.val = std::move(value);
    n.ng = needs_grad;
    return push(std::move(n));
  }
  int constant(Tensor value) { return leaf(std::move(value), false); }
  int scalar(Real v) { return constant(Tensor::scalar(v)); }

  // ---- elementwise (equal shapes, or either side a 1-element scalar) ----
  int add(int a, int b) { return binary(Op::Add, a, b); }
  int sub(int a, int b) { return binary(Op::Sub, a, b); }
  int mul(int a, int b) { return binary(Op::Mul, a, b); }
  int neg(int a) { return unary(Op::Neg, a); }
  int sigmoid(int a) { return unary(Op::Sigmoid, a); }
  int tanh(int a) { return unary(Op::Tanh, a); }
  int exp(int a) { return unary(Op::Exp, a); }
  int log(int a) { return unary(Op::Log, a); }    // floor 1e-12
  int recip(int a) { return unary(Op::Recip, a); }  // floor 1e-12

  int add_c(int a, Real c) { return unary_c(Op::AddC, a, c); }
  int mul_c(int a, Real c) { return unary_c(Op::MulC, a, c); }
  int rsub_c(Real c, int a) { return unary_c(Op::RSubC, a, c); }

  int clamp(int a, Real lo, Real hi) {
    Node n = make_unary(Op::Clamp, a);
    n.k0 = lo;
    n.k1 = hi;
    for (size_t i = 0; i < n.val.data.size(); ++i)
      n.val.data[i] = std::min(hi, std::max(lo, at(a).data[i]));
    return push(std::move(n));
  }

  // s = 1 - x clipped to [0,1], snapped to exact 0 below 1e-9 so that a
  // saturated canvas slot freezes bit-for-bit.
  int headroom(int a) {
    Node n = make_unary(Op::Headroom, a);
    for (size_t i = 0; i < n.val.data.size(); ++i) {
      Real s = Real(1) - at(a).data[i];
      if (!(s >= Real(kSnap))) s = Real(0);
      if (s > Real(1)) s = Real(1);
      n.val.data[i] = s;
    }
    return push(std::move(n));
  }

  int sum(int a) {
    Node n;
    n.op = Op::Sum;
    n.a = a;
    n.ng = at_node(a).ng;
    Real s = Real(0);
    for (Real v : at(a).data) s += v;
    n.val = Tensor::scalar(s);
    return push(std::move(n));
  }

  // ---- matmul: (m×k)·(k×n) -> (m×n), or (m×k)·(k) -> (m) ----
  int matmul(int a, int b) {
    const Tensor& A = at(a);
    const Tensor& B = at(b);
    if (A.rank() != 2)
      throw ShapeError("matmul: lhs must be rank 2, got " + shape_str(A.shape));
    bool vec = B.rank() == 1;
    if (!vec && B.rank() != 2)
      throw ShapeError("matmul: rhs must be rank 1 or 2, got " + shape_str(B.shape));
    int m = A.rows(), k = A.cols();
    int kb = vec ? B.shape[0] : B.rows();
    int ncols = vec ? 1 : B.cols();
    if (k != kb)
      throw ShapeError("matmul: inner dimensions disagree, " + shape_str(A.shape) +
                       " vs " + shape_str(B.shape));
    Node n;
    n.op = Op::Matmul;
    n.a = a;
    n.b = b;
    n.ng = at_node(a).ng || at_node(b).ng;
    n.val = vec ? Tensor::zeros({m}) : Tensor::zeros({m, ncols});
    kernels::matmul(A.data.data(), B.data.data(), n.val.data.data(), m, k, ncols);
    return push(std::move(n));
  }

  int transpose(int a) {
    const Tensor& A = at(a);
    if (A.rank() != 2) throw ShapeError("transpose: need rank 2, got " + shape_str(A.shape));
    Node n;
    n.op = Op::Transpose;
    n.a = a;
    n.ng = at_node(a).ng;
    n.val = Tensor::zeros({A.cols(), A.rows()});
    for (int i = 0; i < A.rows(); ++i)
      for (int j = 0; j < A.cols(); ++j) n.val.at(j, i) = A.at(i, j);
    return push(std::move(n));
  }

  // masked, stabilized; zeros at masked positions
  int softmax(int a, std::vector<uint8_t> mask = {}) {
    const Tensor& A = at(a);
    if (A.rank() != 1) throw ShapeError("softmax: need rank 1, got " + shape_str(A.shape));
    if (!mask.empty() && static_cast<int>(mask.size()) != A.shape[0])
      throw ShapeError("softmax: mask length " + std::to_string(mask.size()) +
                       " vs input " + shape_str(A.shape));
    Node n;
    n.op = Op::Softmax;
    n.a = a;
    n.ng = at_node(a).ng;
    n.mask = std::move(mask);
    n.val = Tensor::zeros(A.shape);
    kernels::masked_softmax(A.data.data(), n.mask.empty() ? nullptr : n.mask.data(),
                            n.val.data.data(), static_cast<int>(A.shape[0]));
    return push(std::move(n));
  }

  int log_softmax(int a) {
    const Tensor& A = at(a);
    if (A.rank() != 1) throw ShapeError("log_softmax: need rank 1, got " + shape_str(A.shape));
    Node n;
    n.op = Op::LogSoftmax;
    n.a = a;
    n.ng = at_node(a).ng;
    n.val = Tensor::zeros(A.shape);
    kernels::log_softmax(A.data.data(), n.val.data.data(), static_cast<int>(A.shape[0]));
    return push(std::move(n));
  }

  // row copies; backward scatters additively, so duplicate ids accumulate
  int gather_rows(int table, std::vector<int> ids) {
    const Tensor& T = at(table);
    if (T.rank() != 2) throw ShapeError("gather_rows: table must be rank 2, got " + shape_str(T.shape));
    for (int id : ids)
      if (id < 0 || id >= T.rows())
        throw IndexError("gather_rows: id " + std::to_string(id) + " outside table with " +
                         std::to_string(T.rows()) + " rows");
    Node n;
    n.op = Op::GatherRows;
    n.a = table;
    n.ng = at_node(table).ng;
    n.ids = std::move(ids);
    int e = T.cols();
    n.val = Tensor::zeros({static_cast<int>(n.ids.size()), e});
    for (size_t r = 0; r < n.ids.size(); ++r)
      for (int j = 0; j < e; ++j) n.val.at(static_cast<int>(r), j) = T.at(n.ids[r], j);
    return push(std::move(n));
  }

  int concat(std::vector<int> parts) {
    Node n;
    n.op = Op::Concat;
    n.ids = std::move(parts);
    int total = 0;
    for (int p : n.ids) {
      const Tensor& P = at(p);
      if (P.rank() != 1) throw ShapeError("concat: need rank 1 parts, got " + shape_str(P.shape));
      total += P.shape[0];
      n.ng = n.ng || at_node(p).ng;
    }
    n.val = Tensor::zeros({total});
    int off = 0;
    for (int p : n.ids) {
      const Tensor& P = at(p);
      for (int i = 0; i < P.shape[0]; ++i) n.val.at(off + i) = P.at(i);
      off += P.shape[0];
    }
    return push(std::move(n));
  }

  int slice(int a, int offset, int len) {
    const Tensor& A = at(a);
    if (A.rank() != 1) throw ShapeError("slice: need rank 1, got " + shape_str(A.shape));
    if (offset < 0 || len <= 0 || offset + len > A.shape[0])
      throw IndexError("slice: [" + std::to_string(offset) + "," + std::to_string(offset + len) +
                       ") outside " + shape_str(A.shape));
    Node n = make_unary(Op::Slice, a, /*alloc=*/false);
    n.i0 = offset;
    n.i1 = len;
    n.val = Tensor::zeros({len});
    for (int i = 0; i < len; ++i) n.val.at(i) = A.at(offset + i);
    return push(std::move(n));
  }

  int row(int a, int r) {
    const Tensor& A = at(a);
    if (A.rank() != 2) throw ShapeError("row: need rank 2, got " + shape_str(A.shape));
    if (r < 0 || r >= A.rows())
      throw IndexError("row: index " + std::to_string(r) + " outside " + shape_str(A.shape));
    Node n = make_unary(Op::Row, a, /*alloc=*/false);
    n.i0 = r;
    n.val = Tensor::zeros({A.cols()});
    for (int j = 0; j < A.cols(); ++j) n.val.at(j) = A.at(r, j);
    return push(std::move(n));
  }

  int reshape(int a, std::vector<int> sh) {
    const Tensor& A = at(a);
    if (Tensor::count(sh) != A.numel())
      throw ShapeError("reshape: cannot view " + shape_str(A.shape) + " as " + shape_str(sh));
    Node n = make_unary(Op::Reshape, a, /*alloc=*/false);
    n.val = Tensor(std::move(sh), A.data);
    return push(std::move(n));
  }

  int pick(int a, int flat_index) {
    const Tensor& A = at(a);
    if (flat_index < 0 || flat_index >= A.numel())
      throw IndexError("pick: index " + std::to_string(flat_index) + " outside " + shape_str(A.shape));
    Node n = make_unary(Op::Pick, a, /*alloc=*/false);
    n.i0 = flat_index;
    n.val = Tensor::scalar(A.at(flat_index));
    return push(std::move(n));
  }

  // C' = (1-g)⊙C + g⊙U per slot, gate broadcast across the embedding axis.
  // A slot with gate exactly 0 carries its bytes over unchanged.
  int canvas_update(int canvas, int gate, int update) {
    const Tensor& C = at(canvas);
    const Tensor& G = at(gate);
    const Tensor& U = at(update);
    if (C.rank() != 2 || U.rank() != 2 || !C.same_shape(U))
      throw ShapeError("canvas_update: canvas " + shape_str(C.shape) + " vs update " + shape_str(U.shape));
    if (G.rank() != 1 || G.shape[0] != C.rows())
      throw ShapeError("canvas_update: gate " + shape_str(G.shape) + " vs canvas " + shape_str(C.shape));
    Node n;
    n.op = Op::CanvasUpdate;
    n.a = canvas;
    n.b = gate;
    n.c = update;
    n.ng = at_node(canvas).ng || at_node(gate).ng || at_node(update).ng;
    n.val = Tensor::zeros(C.shape);
    int e = C.cols();
    for (int l = 0; l < C.rows(); ++l) {
      Real g = G.at(l);
      if (g == Real(0)) {
        for (int j = 0; j < e; ++j) n.val.at(l, j) = C.at(l, j);
      } else {
        Real keep = Real(1) - g;
        for (int j = 0; j < e; ++j) n.val.at(l, j) = keep * C.at(l, j) + g * U.at(l, j);
      }
    }
    return push(std::move(n));
  }

  // ---- access ----
  const Tensor& val(int id) const { return at(id); }
  const Tensor& grad(int id) const { return nodes_[static_cast<size_t>(id)].grad; }
  size_t size() const { return nodes_.size(); }

  // Reverse sweep from a scalar loss. Parameters not reachable from the
  // loss keep an all-zero gradient.
  void backward(int loss) {
    if (at(loss).numel() != 1)
      throw ContractError("backward: loss must be a scalar, got " + shape_str(at(loss).shape));
    for (auto& n : nodes_)
      if (n.ng) n.grad = Tensor::zeros(n.val.shape);
    if (!nodes_[static_cast<size_t>(loss)].ng) return;  // loss independent of parameters
    nodes_[static_cast<size_t>(loss)].grad.data[0] = Real(1);
    for (int i = loss; i >= 0; --i) {
      Node& n = nodes_[static_cast<size_t>(i)];
      if (!n.ng || n.grad.data.empty()) continue;
      step_back(n);
    }
  }

 private:
  static constexpr double kSnap = 1e-9;

  enum class Op : uint8_t {
    Leaf, Matmul, Transpose, Add, Sub, Mul, Neg, Sigmoid, Tanh, Exp, Log, Recip,
    AddC, MulC, RSubC, Clamp, Headroom, Sum, Softmax, LogSoftmax, GatherRows,
    Concat, Slice, Row, Reshape, Pick, CanvasUpdate
  };

  struct Node {
    Op op = Op::Leaf;
    int a = -1, b = -1, c = -1;
    bool ng = false;
    Real k0 = Real(0), k1 = Real(0);
    int i0 = 0, i1 = 0;
    std::vector<int> ids;
    std::vector<uint8_t> mask;
    Tensor val;
    Tensor grad;
  };

  std::vector<Node> nodes_;

  int push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
  }
  const Tensor& at(int id) const { return nodes_[static_cast<size_t>(id)].val; }
  const Node& at_node(int id) const { return nodes_[static_cast<size_t>(id)]; }

  Node make_unary(Op op, int a, bool alloc = true) {
    Node n;
    n.op = op;
    n.a = a;
    n.ng = at_node(a).ng;
    if (alloc) n.val = Tensor::zeros(at(a).shape);
    return n;
  }

  int unary(Op op, int a) {
    Node n = make_unary(op, a);
    const auto& x = at(a).data;
    auto& y = n.val.data;
    switch (op) {
      case Op::Neg:
        for (size_t i = 0; i < x.size(); ++i) y[i] = -x[i];
        break;
      case Op::Sigmoid:
        for (size_t i = 0; i < x.size(); ++i) y[i] = kernels::sigmoid(x[i]);
        break;
      case Op::Tanh:
        for (size_t i = 0; i < x.size(); ++i) y[i] = std::tanh(x[i]);
        break;
      case Op::Exp:
        for (size_t i = 0; i < x.size(); ++i) y[i] = std::exp(x[i]);
        break;
      case Op::Log:
        for (size_t i = 0; i < x.size(); ++i) y[i] = std::log(std::max(x[i], Real(kernels::kEps)));
        break;
      case Op::Recip:
        for (size_t i = 0; i < x.size(); ++i) y[i] = Real(1) / std::max(x[i], Real(kernels::kEps));
        break;
      default:
        throw ContractError("unary: bad op");
    }
    return push(std::move(n));
  }

  int unary_c(Op op, int a, Real c) {
    Node n = make_unary(op, a);
    n.k0 = c;
    const auto& x = at(a).data;
    auto& y = n.val.data;
    switch (op) {
      case Op::AddC:
        for (size_t i = 0; i < x.size(); ++i) y[i] = x[i] + c;
        break;
      case Op::MulC:
        for (size_t i = 0; i < x.size(); ++i) y[i] = x[i] * c;
        break;
      case Op::RSubC:
        for (size_t i = 0; i < x.size(); ++i) y[i] = c - x[i];
        break;
      default:
        throw ContractError("unary_c: bad op");
    }
    return push(std::move(n));
  }

  int binary(Op op, int a, int b) {
    const Tensor& A = at(a);
    const Tensor& B = at(b);
    bool a_scalar = A.numel() == 1;
    bool b_scalar = B.numel() == 1;
    if (!A.same_shape(B) && !a_scalar && !b_scalar)
      throw ShapeError("elementwise: incompatible shapes " + shape_str(A.shape) + " vs " +
                       shape_str(B.shape));
    Node n;
    n.op = op;
    n.a = a;
    n.b = b;
    n.ng = at_node(a).ng || at_node(b).ng;
    n.val = Tensor::zeros(a_scalar && !b_scalar ? B.shape : A.shape);
    size_t m = n.val.data.size();
    for (size_t i = 0; i < m; ++i) {
      Real x = A.data[a_scalar ? 0 : i];
      Real y = B.data[b_scalar ? 0 : i];
      n.val.data[i] = op == Op::Add ? x + y : op == Op::Sub ? x - y : x * y;
    }
    return push(std::move(n));
  }

  void acc(int id, size_t i, Real v) { nodes_[static_cast<size_t>(id)].grad.data[i] += v; }
  bool wants(int id) const { return id >= 0 && nodes_[static_cast<size_t>(id)].ng; }

  void step_back(Node& n) {
    const auto& g = n.grad.data;
    switch (n.op) {
      case Op::Leaf:
        break;
      case Op::Matmul: {
        const Tensor& A = at(n.a);
        const Tensor& B = at(n.b);
        int m = A.rows(), k = A.cols();
        int ncols = B.rank() == 1 ? 1 : B.cols();
        if (wants(n.a))
          kernels::matmul_acc_da(g.data(), B.data.data(),
                                 nodes_[static_cast<size_t>(n.a)].grad.data.data(), m, k, ncols);
        if (wants(n.b))
          kernels::matmul_acc_db(A.data.data(), g.data(),
                                 nodes_[static_cast<size_t>(n.b)].grad.data.data(), m, k, ncols);
        break;
      }
      case Op::Transpose: {
        if (!wants(n.a)) break;
        const Tensor& A = at(n.a);
        auto& da = nodes_[static_cast<size_t>(n.a)].grad;
        for (int i = 0; i < A.rows(); ++i)
          for (int j = 0; j < A.cols(); ++j) da.at(i, j) += n.grad.at(j, i);
        break;
      }
      case Op::Add:
      case Op::Sub:
      case Op::Mul: {
        const Tensor& A = at(n.a);
        const Tensor& B = at(n.b);
        bool a_scalar = A.numel() == 1 && n.val.numel() > 1;
        bool b_scalar = B.numel() == 1 && n.val.numel() > 1;
        for (size_t i = 0; i < g.size(); ++i) {
          if (wants(n.a)) {
            Real da = n.op == Op::Mul ? g[i] * B.data[b_scalar ? 0 : i] : g[i];
            acc(n.a, a_scalar ? 0 : i, da);
          }
          if (wants(n.b)) {
            Real db = n.op == Op::Mul  ? g[i] * A.data[a_scalar ? 0 : i]
                      : n.op == Op::Sub ? -g[i]
                                        : g[i];
            acc(n.b, b_scalar ? 0 : i, db);
          }
        }
        break;
      }
      case Op::Neg:
        if (wants(n.a))
          for (size_t i = 0; i < g.size(); ++i) acc(n.a, i, -g[i]);
        break;
      case Op::Sigmoid:
        if (wants(n.a))
          for (size_t i = 0; i < g.size(); ++i) {
            Real y = n.val.data[i];
            acc(n.a, i, g[i] * y * (Real(1) - y));
          }
        break;
      case Op::Tanh:
        if (wants(n.a))
          for (size_t i = 0; i < g.size(); ++i) {
            Real y = n.val.data[i];
            acc(n.a, i, g[i] * (Real(1) - y * y));
          }
        break;
      case Op::Exp:
        if (wants(n.a))
          for (size_t i = 0; i < g.size(); ++i) acc(n.a, i, g[i] * n.val.data[i]);
        break;
      case Op::Log:
        if (wants(n.a))
          for (size_t i = 0; i < g.size(); ++i) {
            Real x = at(n.a).data[i];
            if (x >= Real(kernels::kEps)) acc(n.a, i, g[i] / x);
          }
        break;
      case Op::Recip:
        if (wants(n.a))
          for (size_t i = 0; i < g.size(); ++i) {
            Real x = at(n.a).data[i];
            if (x >= Real(kernels::kEps)) {
              Real y = n.val.data[i];
              acc(n.a, i, -g[i] * y * y);
            }
          }
        break;
      case Op::AddC:
        if (wants(n.a))
          for (size_t i = 0; i < g.size(); ++i) acc(n.a, i, g[i]);
        break;
      case Op::MulC:
        if (wants(n.a))
          for (size_t i = 0; i < g.size(); ++i) acc(n.a, i, g[i] * n.k0);
        break;
      case Op::RSubC:
        if (wants(n.a))
          for (size_t i = 0; i < g.size(); ++i) acc(n.a, i, -g[i]);
        break;
      case Op::Clamp:
        if (wants(n.a))
          for (size_t i = 0; i < g.size(); ++i) {
            Real x = at(n.a).data[i];
            if (x >= n.k0 && x <= n.k1) acc(n.a, i, g[i]);
          }
        break;
      case Op::Headroom:
        if (wants(n.a))
          for (size_t i = 0; i < g.size(); ++i) {
            Real s = Real(1) - at(n.a).data[i];
            if (s >= Real(kSnap) && s <= Real(1)) acc(n.a, i, -g[i]);
          }
        break;
      case Op::Sum:
        if (wants(n.a)) {
          Real gv = g[0];
          auto& da = nodes_[static_cast<size_t>(n.a)].grad.data;
          for (size_t i = 0; i < da.size(); ++i) da[i] += gv;
        }
        break;
      case Op::Softmax: {
        if (!wants(n.a)) break;
        Real dot = Real(0);
        for (size_t i = 0; i < g.size(); ++i) dot += g[i] * n.val.data[i];
        for (size_t i = 0; i < g.size(); ++i) acc(n.a, i, n.val.data[i] * (g[i] - dot));
        break;
      }
      case Op::LogSoftmax: {
        if (!wants(n.a)) break;
        Real total = Real(0);
        for (Real gv : g) total += gv;
        for (size_t i = 0; i < g.size(); ++i)
          acc(n.a, i, g[i] - std::exp(n.val.data[i]) * total);
        break;
      }
      case Op::GatherRows: {
        if (!wants(n.a)) break;
        auto& da = nodes_[static_cast<size_t>(n.a)].grad;
        int e = da.cols();
        for (size_t r = 0; r < n.ids.size(); ++r)
          for (int j = 0; j < e; ++j) da.at(n.ids[r], j) += n.grad.at(static_cast<int>(r), j);
        break;
      }
      case Op::Concat: {
        int off = 0;
        for (int p : n.ids) {
          int len = at(p).shape[0];
          if (wants(p))
            for (int i = 0; i < len; ++i) acc(p, static_cast<size_t>(i), g[static_cast<size_t>(off + i)]);
          off += len;
        }
        break;
      }
      case Op::Slice:
        if (wants(n.a))
          for (int i = 0; i < n.i1; ++i) acc(n.a, static_cast<size_t>(n.i0 + i), g[static_cast<size_t>(i)]);
        break;
      case Op::Row: {
        if (!wants(n.a)) break;
        auto& da = nodes_[static_cast<size_t>(n.a)].grad;
        for (int j = 0; j < da.cols(); ++j) da.at(n.i0, j) += g[static_cast<size_t>(j)];
        break;
      }
      case Op::Reshape:
        if (wants(n.a))
          for (size_t i = 0; i < g.size(); ++i) acc(n.a, i, g[i]);
        break;
      case Op::Pick:
        if (wants(n.a)) acc(n.a, static_cast<size_t>(n.i0), g[0]);
        break;
      case Op::CanvasUpdate: {
        const Tensor& C = at(n.a);
        const Tensor& G = at(n.b);
        const Tensor& U = at(n.c);
        int e = C.cols();
        for (int l = 0; l < C.rows(); ++l) {
          Real gatel = G.at(l);
          for (int j = 0; j < e; ++j) {
            Real gv = n.grad.at(l, j);
            if (wants(n.a)) nodes_[static_cast<size_t>(n.a)].grad.at(l, j) += (Real(1) - gatel) * gv;
            if (wants(n.c)) nodes_[static_cast<size_t>(n.c)].grad.at(l, j) += gatel * gv;
            if (wants(n.b)) nodes_[static_cast<size_t>(n.b)].grad.at(l) += (U.at(l, j) - C.at(l, j)) * gv;
          }
        }
        break;
      }
    }
  }
};

using Tape = TapeT<float>;

}  // namespace autr
