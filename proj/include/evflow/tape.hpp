#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "evflow/common.hpp"
#include "evflow/kernels.hpp"
#include "evflow/tensor.hpp"

namespace evflow {

// Reverse-mode tape over dense values. One tape records one sample's forward
// pass; backward() walks the nodes in reverse and accumulates parameter
// gradients into a GradBuffer. Value and adjoint storage live in arenas that
// are reused across samples via reset().
template <typename T>
class Tape {
  enum class Op : std::uint8_t {
    leaf,
    affine,    // y = W x + b
    affine2,   // y = W x + U h + b
    add,
    sub,
    mul,       // Hadamard
    mul_sv,    // y = s * v, s scalar node
    sigmoid_,
    tanh_,
    relu_,
    log_,
    scale_c,   // y = aux * x
    norm2,     // y = ||x||_2 (scalar)
    pick,      // y = x[i0] (scalar)
    conv2d_,   // square kernel, stride 1, valid
    avgpool,   // global average pool per channel
    softmax_,
  };

  struct Node {
    Op op;
    std::int32_t a = -1, b = -1, c = -1, d = -1, e = -1;
    std::int32_t n = 0;        // output length
    std::int32_t val = -1;     // arena offset, -1 for external leaves
    std::int32_t grad = -1;
    std::int32_t i0 = 0, i1 = 0, i2 = 0, i3 = 0;  // shape/aux ints
    T aux = 0;
    const T* ext = nullptr;
    std::int32_t param = -1;
  };

 public:
  const T* value(int id) const {
    const Node& nd = nodes_[static_cast<std::size_t>(id)];
    return nd.ext ? nd.ext : &vals_[static_cast<std::size_t>(nd.val)];
  }
  T scalar(int id) const { return value(id)[0]; }
  int length(int id) const { return nodes_[static_cast<std::size_t>(id)].n; }

  void reset() {
    nodes_.clear();
    vals_used_ = 0;
    grads_used_ = 0;
  }

  // Leaf over caller-owned storage; must stay alive until backward().
  int leaf(const T* data, int n) {
    Node nd = make(Op::leaf, n, /*alloc_val=*/false);
    nd.ext = data;
    return push(nd);
  }

  // Leaf that copies the data into the tape arena.
  int leaf_copy(const T* data, int n) {
    Node nd = make(Op::leaf, n, true);
    int id = push(nd);
    T* y = val_ptr(id);
    for (int i = 0; i < n; ++i) y[i] = data[i];
    return id;
  }

  int zeros(int n) {
    Node nd = make(Op::leaf, n, true);
    int id = push(nd);
    T* y = val_ptr(id);
    for (int i = 0; i < n; ++i) y[i] = T(0);
    return id;
  }

  // Parameter leaf; gradients route into GradBuffer slot param_index.
  int param(int param_index, const Tensor<T>& t) {
    Node nd = make(Op::leaf, static_cast<int>(t.size()), false);
    nd.ext = t.ptr();
    nd.param = param_index;
    return push(nd);
  }

  int affine(int w, int x, int b, int rows, int cols) {
    Node nd = make(Op::affine, rows, true);
    nd.a = w; nd.b = x; nd.c = b;
    nd.i0 = rows; nd.i1 = cols;
    int id = push(nd);
    evflow::affine(value(w), value(x), value(b), val_ptr(id), rows, cols);
    return check(id);
  }

  int affine2(int w, int x, int xcols, int u, int h, int hcols, int b, int rows) {
    Node nd = make(Op::affine2, rows, true);
    nd.a = w; nd.b = x; nd.c = u; nd.d = h; nd.e = b;
    nd.i0 = rows; nd.i1 = xcols; nd.i2 = hcols;
    int id = push(nd);
    evflow::affine2(value(w), value(x), xcols, value(u), value(h), hcols, value(b),
                    val_ptr(id), rows);
    return check(id);
  }

  int add(int a, int b) { return binary(Op::add, a, b); }
  int sub(int a, int b) { return binary(Op::sub, a, b); }
  int mul(int a, int b) { return binary(Op::mul, a, b); }

  int mul_sv(int s, int v) {
    require(length(s) == 1, "mul_sv: scalar operand must have length 1");
    Node nd = make(Op::mul_sv, length(v), true);
    nd.a = s; nd.b = v;
    int id = push(nd);
    const T sv = scalar(s);
    const T* vv = value(v);
    T* y = val_ptr(id);
    for (int i = 0; i < nodes_[id].n; ++i) y[i] = sv * vv[i];
    return check(id);
  }

  int sigmoid(int a) { return unary(Op::sigmoid_, a); }
  int tanh_(int a) { return unary(Op::tanh_, a); }
  int relu(int a) { return unary(Op::relu_, a); }
  int log_(int a) { return unary(Op::log_, a); }

  int scale(int a, T s) {
    Node nd = make(Op::scale_c, length(a), true);
    nd.a = a; nd.aux = s;
    int id = push(nd);
    const T* av = value(a);
    T* y = val_ptr(id);
    for (int i = 0; i < nodes_[id].n; ++i) y[i] = s * av[i];
    return check(id);
  }

  int norm2(int a) {
    Node nd = make(Op::norm2, 1, true);
    nd.a = a;
    int id = push(nd);
    const T* av = value(a);
    T acc = 0;
    for (int i = 0; i < length(a); ++i) acc += av[i] * av[i];
    val_ptr(id)[0] = std::sqrt(acc);
    return check(id);
  }

  int pick(int a, int index) {
    Node nd = make(Op::pick, 1, true);
    nd.a = a; nd.i0 = index;
    int id = push(nd);
    val_ptr(id)[0] = value(a)[index];
    return id;
  }

  int conv2d(int w, int x, int b, int cin, int h, int wd, int cout, int ks) {
    const int oh = h - ks + 1, ow = wd - ks + 1;
    require(oh >= 1 && ow >= 1, "conv2d: kernel larger than input");
    Node nd = make(Op::conv2d_, cout * oh * ow, true);
    nd.a = w; nd.b = x; nd.c = b;
    nd.i0 = cin; nd.i1 = h; nd.i2 = wd; nd.i3 = ks;
    nd.aux = static_cast<T>(cout);
    int id = push(nd);
    evflow::conv2d(value(x), value(w), value(b), val_ptr(id), cin, h, wd, cout, ks);
    return check(id);
  }

  int avgpool_all(int a, int c, int h, int w) {
    Node nd = make(Op::avgpool, c, true);
    nd.a = a; nd.i0 = c; nd.i1 = h; nd.i2 = w;
    int id = push(nd);
    evflow::avgpool_all(value(a), val_ptr(id), c, h, w);
    return check(id);
  }

  int softmax(int a) {
    Node nd = make(Op::softmax_, length(a), true);
    nd.a = a;
    int id = push(nd);
    softmax_vec(value(a), val_ptr(id), length(a));
    return check(id);
  }

  // Reverse sweep from a scalar loss. Parameter gradients are *added* into
  // gbuf so batch summation order is the caller's choice.
  void backward(int loss, GradBuffer<T>& gbuf, T seed = T(1)) {
    require(length(loss) == 1, "backward: loss must be scalar");
    grads_.assign(static_cast<std::size_t>(grads_used_), T(0));
    grad_ptr(loss)[0] = seed;
    for (int id = static_cast<int>(nodes_.size()) - 1; id >= 0; --id) {
      const Node& nd = nodes_[static_cast<std::size_t>(id)];
      const T* gy = grad_ptr(id);
      switch (nd.op) {
        case Op::leaf:
          break;
        case Op::affine: {
          const int rows = nd.i0, cols = nd.i1;
          affine_backward(value(nd.a), value(nd.b), gy, grad_ptr(nd.a), grad_ptr(nd.b),
                          grad_ptr(nd.c), rows, cols);
          break;
        }
        case Op::affine2: {
          const int rows = nd.i0, xcols = nd.i1, hcols = nd.i2;
          const T* w = value(nd.a);
          const T* x = value(nd.b);
          const T* u = value(nd.c);
          const T* h = value(nd.d);
          T* gw = grad_ptr(nd.a);
          T* gx = grad_ptr(nd.b);
          T* gu = grad_ptr(nd.c);
          T* gh = grad_ptr(nd.d);
          T* gb = grad_ptr(nd.e);
          for (int r = 0; r < rows; ++r) {
            const T g = gy[r];
            const T* wr = w + static_cast<std::int64_t>(r) * xcols;
            T* gwr = gw + static_cast<std::int64_t>(r) * xcols;
            for (int c = 0; c < xcols; ++c) {
              gwr[c] += g * x[c];
              gx[c] += wr[c] * g;
            }
            const T* ur = u + static_cast<std::int64_t>(r) * hcols;
            T* gur = gu + static_cast<std::int64_t>(r) * hcols;
            for (int c = 0; c < hcols; ++c) {
              gur[c] += g * h[c];
              gh[c] += ur[c] * g;
            }
            gb[r] += g;
          }
          break;
        }
        case Op::add: {
          T* ga = grad_ptr(nd.a);
          T* gb = grad_ptr(nd.b);
          for (int i = 0; i < nd.n; ++i) {
            ga[i] += gy[i];
            gb[i] += gy[i];
          }
          break;
        }
        case Op::sub: {
          T* ga = grad_ptr(nd.a);
          T* gb = grad_ptr(nd.b);
          for (int i = 0; i < nd.n; ++i) {
            ga[i] += gy[i];
            gb[i] -= gy[i];
          }
          break;
        }
        case Op::mul: {
          const T* av = value(nd.a);
          const T* bv = value(nd.b);
          T* ga = grad_ptr(nd.a);
          T* gb = grad_ptr(nd.b);
          for (int i = 0; i < nd.n; ++i) {
            ga[i] += gy[i] * bv[i];
            gb[i] += gy[i] * av[i];
          }
          break;
        }
        case Op::mul_sv: {
          const T sv = scalar(nd.a);
          const T* vv = value(nd.b);
          T* gs = grad_ptr(nd.a);
          T* gv = grad_ptr(nd.b);
          T acc = 0;
          for (int i = 0; i < nd.n; ++i) {
            acc += gy[i] * vv[i];
            gv[i] += sv * gy[i];
          }
          gs[0] += acc;
          break;
        }
        case Op::sigmoid_: {
          const T* y = value(id);
          T* ga = grad_ptr(nd.a);
          for (int i = 0; i < nd.n; ++i) ga[i] += gy[i] * y[i] * (T(1) - y[i]);
          break;
        }
        case Op::tanh_: {
          const T* y = value(id);
          T* ga = grad_ptr(nd.a);
          for (int i = 0; i < nd.n; ++i) ga[i] += gy[i] * (T(1) - y[i] * y[i]);
          break;
        }
        case Op::relu_: {
          const T* av = value(nd.a);
          T* ga = grad_ptr(nd.a);
          for (int i = 0; i < nd.n; ++i) ga[i] += av[i] > T(0) ? gy[i] : T(0);
          break;
        }
        case Op::log_: {
          const T* av = value(nd.a);
          T* ga = grad_ptr(nd.a);
          for (int i = 0; i < nd.n; ++i) ga[i] += gy[i] / av[i];
          break;
        }
        case Op::scale_c: {
          T* ga = grad_ptr(nd.a);
          for (int i = 0; i < nd.n; ++i) ga[i] += nd.aux * gy[i];
          break;
        }
        case Op::norm2: {
          const T y = value(id)[0];
          if (y != T(0)) {
            const T* av = value(nd.a);
            T* ga = grad_ptr(nd.a);
            const T g = gy[0] / y;
            for (int i = 0; i < length(nd.a); ++i) ga[i] += g * av[i];
          }
          break;
        }
        case Op::pick:
          grad_ptr(nd.a)[nd.i0] += gy[0];
          break;
        case Op::conv2d_: {
          const int cin = nd.i0, h = nd.i1, wd = nd.i2, ks = nd.i3;
          const int cout = static_cast<int>(nd.aux);
          const int oh = h - ks + 1, ow = wd - ks + 1;
          const T* wv = value(nd.a);
          const T* xv = value(nd.b);
          T* gw = grad_ptr(nd.a);
          T* gx = grad_ptr(nd.b);
          T* gb = grad_ptr(nd.c);
          for (int oc = 0; oc < cout; ++oc) {
            for (int oy = 0; oy < oh; ++oy) {
              for (int ox = 0; ox < ow; ++ox) {
                const T g = gy[(static_cast<std::int64_t>(oc) * oh + oy) * ow + ox];
                gb[oc] += g;
                for (int ic = 0; ic < cin; ++ic) {
                  const std::int64_t xbase = (static_cast<std::int64_t>(ic) * h + oy) * wd + ox;
                  const std::int64_t wbase = ((static_cast<std::int64_t>(oc) * cin + ic) * ks) * ks;
                  for (int ky = 0; ky < ks; ++ky)
                    for (int kx = 0; kx < ks; ++kx) {
                      gw[wbase + ky * ks + kx] += g * xv[xbase + ky * wd + kx];
                      gx[xbase + ky * wd + kx] += g * wv[wbase + ky * ks + kx];
                    }
                }
              }
            }
          }
          break;
        }
        case Op::avgpool: {
          const int c = nd.i0, h = nd.i1, w = nd.i2;
          const T inv = T(1) / static_cast<T>(h * w);
          T* ga = grad_ptr(nd.a);
          for (int ch = 0; ch < c; ++ch) {
            const T g = gy[ch] * inv;
            T* gp = ga + static_cast<std::int64_t>(ch) * h * w;
            for (int i = 0; i < h * w; ++i) gp[i] += g;
          }
          break;
        }
        case Op::softmax_: {
          const T* y = value(id);
          T* ga = grad_ptr(nd.a);
          T dot = 0;
          for (int i = 0; i < nd.n; ++i) dot += gy[i] * y[i];
          for (int i = 0; i < nd.n; ++i) ga[i] += y[i] * (gy[i] - dot);
          break;
        }
      }
    }
    for (const Node& nd : nodes_) {
      if (nd.param < 0) continue;
      auto& dst = gbuf.grads[static_cast<std::size_t>(nd.param)];
      const T* g = &grads_[static_cast<std::size_t>(nd.grad)];
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[i];
    }
  }

 private:
  Node make(Op op, int n, bool alloc_val) {
    Node nd;
    nd.op = op;
    nd.n = n;
    if (alloc_val) {
      nd.val = vals_used_;
      vals_used_ += n;
    }
    nd.grad = grads_used_;
    grads_used_ += n;
    return nd;
  }

  int push(Node nd) {
    if (static_cast<std::size_t>(vals_used_) > vals_.size())
      vals_.resize(static_cast<std::size_t>(vals_used_));
    nodes_.push_back(nd);
    return static_cast<int>(nodes_.size()) - 1;
  }

  T* val_ptr(int id) {
    return &vals_[static_cast<std::size_t>(nodes_[static_cast<std::size_t>(id)].val)];
  }
  T* grad_ptr(int id) {
    return &grads_[static_cast<std::size_t>(nodes_[static_cast<std::size_t>(id)].grad)];
  }

  int unary(Op op, int a) {
    Node nd = make(op, length(a), true);
    nd.a = a;
    int id = push(nd);
    const T* av = value(a);
    T* y = val_ptr(id);
    switch (op) {
      case Op::sigmoid_: sigmoid_vec(av, y, nd.n); break;
      case Op::tanh_: tanh_vec(av, y, nd.n); break;
      case Op::relu_: relu_vec(av, y, nd.n); break;
      case Op::log_:
        for (int i = 0; i < nd.n; ++i) y[i] = std::log(av[i]);
        break;
      default: throw ContractError("unary: bad op");
    }
    return check(id);
  }

  int binary(Op op, int a, int b) {
    require(length(a) == length(b), "binary op: length mismatch");
    Node nd = make(op, length(a), true);
    nd.a = a; nd.b = b;
    int id = push(nd);
    const T* av = value(a);
    const T* bv = value(b);
    T* y = val_ptr(id);
    switch (op) {
      case Op::add:
        for (int i = 0; i < nd.n; ++i) y[i] = av[i] + bv[i];
        break;
      case Op::sub:
        for (int i = 0; i < nd.n; ++i) y[i] = av[i] - bv[i];
        break;
      case Op::mul:
        for (int i = 0; i < nd.n; ++i) y[i] = av[i] * bv[i];
        break;
      default: throw ContractError("binary: bad op");
    }
    return check(id);
  }

  int check(int id) {
#ifndef NDEBUG
    const Node& nd = nodes_[static_cast<std::size_t>(id)];
    const T* y = value(id);
    for (int i = 0; i < nd.n; ++i)
      if (!std::isfinite(static_cast<double>(y[i])))
        throw NumericError("non-finite value in tape op " +
                           std::to_string(static_cast<int>(nd.op)));
#endif
    return id;
  }

  std::vector<Node> nodes_;
  std::vector<T> vals_;
  std::vector<T> grads_;
  std::int32_t vals_used_ = 0;
  std::int32_t grads_used_ = 0;
};

}  // namespace evflow
