#include "paydiff/nn/graph.hpp"

#include <cmath>
#include <memory>

#include <Eigen/Core>

namespace paydiff::nn {

namespace {

template <class T>
using MatR = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using Map = Eigen::Map<MatR<T>>;
template <class T>
using CMap = Eigen::Map<const MatR<T>>;

void expect(bool ok, const std::string& msg) {
  if (!ok) throw DimensionError(msg);
}

void expect_rank(const Shape& s, std::size_t rank, const char* op, const char* what) {
  expect(s.size() == rank, std::string(op) + ": " + what + " must have rank " + std::to_string(rank) + ", got " +
                               shape_str(s));
}

}  // namespace

template <class T>
Var Graph<T>::push(Tensor<T> value, bool needs) {
#ifndef NDEBUG
  if (!value.all_finite()) throw Error("non-finite value produced in graph node " + std::to_string(nodes_.size()));
#endif
  Node n;
  n.value = std::move(value);
  n.needs = needs && record_;
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

template <class T>
Tensor<T>& Graph<T>::g(Var v) {
  Node& n = node(v);
  if (n.grad.size() != n.value.size()) n.grad = Tensor<T>(n.value.shape);
  return n.grad;
}

template <class T>
Var Graph<T>::input(Tensor<T> value) {
  return push(std::move(value), false);
}

template <class T>
Var Graph<T>::param(Parameter<T>& p) {
  const Var v = push(p.value, !p.frozen);
  node(v).param = &p;
  if (needs_grad(v)) {
    node(v).backward = [this, v] {
      Parameter<T>& prm = *node(v).param;
      const Tensor<T>& gr = node(v).grad;
      for (std::size_t i = 0; i < gr.size(); ++i) prm.grad[i] += gr[i];
    };
  }
  return v;
}

template <class T>
void Graph<T>::backward(Var loss) {
  if (!record_) throw Error("backward on a graph built without recording");
  if (value(loss).size() != 1) throw DimensionError("backward: loss must have a single element");
  g(loss).fill(T(1));
  for (int i = loss.id; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (!n.needs || !n.backward || n.grad.size() != n.value.size()) continue;
    n.backward();
  }
}

template <class T>
Var Graph<T>::conv1d(Var xv, Var wv, Var bv, int stride, int padding) {
  const Shape xs = value(xv).shape, ws = value(wv).shape, bs = value(bv).shape;
  expect_rank(xs, 3, "conv1d", "input");
  expect_rank(ws, 3, "conv1d", "weight");
  expect(bs.size() == 1 && bs[0] == ws[0], "conv1d: bias must have shape [" + std::to_string(ws[0]) + "]");
  expect(xs[1] == ws[1], "conv1d: input has " + std::to_string(xs[1]) + " channels, weight expects " +
                             std::to_string(ws[1]));
  expect(stride >= 1 && padding >= 0, "conv1d: stride must be >= 1 and padding >= 0");
  const int B = xs[0], Ci = xs[1], L = xs[2], Co = ws[0], K = ws[2];
  expect(L + 2 * padding >= K, "conv1d: kernel " + std::to_string(K) + " does not fit padded length " +
                                   std::to_string(L + 2 * padding));
  const int Lo = (L + 2 * padding - K) / stride + 1;
  const int N = B * Lo;

  auto col = std::make_shared<MatR<T>>(MatR<T>::Zero(Ci * K, N));
  {
    const T* x = value(xv).ptr();
    for (int ci = 0; ci < Ci; ++ci)
      for (int k = 0; k < K; ++k) {
        T* row = col->row(ci * K + k).data();
        for (int b = 0; b < B; ++b) {
          const T* xr = x + (static_cast<std::size_t>(b) * Ci + ci) * L;
          for (int l = 0; l < Lo; ++l) {
            const int src = l * stride + k - padding;
            if (src >= 0 && src < L) row[b * Lo + l] = xr[src];
          }
        }
      }
  }
  const CMap<T> W(value(wv).ptr(), Co, Ci * K);
  MatR<T> out2 = W * *col;
  const T* bias = value(bv).ptr();
  Tensor<T> out({B, Co, Lo});
  for (int co = 0; co < Co; ++co)
    for (int b = 0; b < B; ++b) {
      T* dst = out.ptr() + (static_cast<std::size_t>(b) * Co + co) * Lo;
      const T* src = out2.row(co).data() + b * Lo;
      for (int l = 0; l < Lo; ++l) dst[l] = src[l] + bias[co];
    }
  const bool needs = needs_grad(xv) || needs_grad(wv) || needs_grad(bv);
  const Var y = push(std::move(out), needs);
  if (!needs_grad(y)) return y;
  node(y).backward = [=, this] {
    const Tensor<T>& dy = node(y).grad;
    MatR<T> d2(Co, N);
    for (int co = 0; co < Co; ++co)
      for (int b = 0; b < B; ++b) {
        const T* src = dy.ptr() + (static_cast<std::size_t>(b) * Co + co) * Lo;
        std::copy(src, src + Lo, d2.row(co).data() + b * Lo);
      }
    if (needs_grad(wv)) Map<T>(g(wv).ptr(), Co, Ci * K).noalias() += d2 * col->transpose();
    if (needs_grad(bv)) {
      T* db = g(bv).ptr();
      for (int co = 0; co < Co; ++co) db[co] += d2.row(co).sum();
    }
    if (needs_grad(xv)) {
      const MatR<T> dcol = CMap<T>(value(wv).ptr(), Co, Ci * K).transpose() * d2;
      T* dx = g(xv).ptr();
      for (int ci = 0; ci < Ci; ++ci)
        for (int k = 0; k < K; ++k) {
          const T* row = dcol.row(ci * K + k).data();
          for (int b = 0; b < B; ++b) {
            T* xr = dx + (static_cast<std::size_t>(b) * Ci + ci) * L;
            for (int l = 0; l < Lo; ++l) {
              const int src = l * stride + k - padding;
              if (src >= 0 && src < L) xr[src] += row[b * Lo + l];
            }
          }
        }
    }
  };
  return y;
}

template <class T>
Var Graph<T>::linear(Var xv, Var wv, Var bv) {
  const Shape xs = value(xv).shape, ws = value(wv).shape, bs = value(bv).shape;
  expect_rank(xs, 2, "linear", "input");
  expect_rank(ws, 2, "linear", "weight");
  expect(xs[1] == ws[1], "linear: input width " + std::to_string(xs[1]) + " does not match weight " + shape_str(ws));
  expect(bs.size() == 1 && bs[0] == ws[0], "linear: bias must have shape [" + std::to_string(ws[0]) + "]");
  const int B = xs[0], I = xs[1], O = ws[0];
  Tensor<T> out({B, O});
  Map<T> Y(out.ptr(), B, O);
  Y.noalias() = CMap<T>(value(xv).ptr(), B, I) * CMap<T>(value(wv).ptr(), O, I).transpose();
  const Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> bias(value(bv).ptr(), O);
  Y.rowwise() += bias;
  const bool needs = needs_grad(xv) || needs_grad(wv) || needs_grad(bv);
  const Var y = push(std::move(out), needs);
  if (!needs_grad(y)) return y;
  node(y).backward = [=, this] {
    const CMap<T> dY(node(y).grad.ptr(), B, O);
    if (needs_grad(xv)) Map<T>(g(xv).ptr(), B, I).noalias() += dY * CMap<T>(value(wv).ptr(), O, I);
    if (needs_grad(wv)) Map<T>(g(wv).ptr(), O, I).noalias() += dY.transpose() * CMap<T>(value(xv).ptr(), B, I);
    if (needs_grad(bv)) {
      Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>> db(g(bv).ptr(), O);
      db += dY.colwise().sum();
    }
  };
  return y;
}

template <class T>
Var Graph<T>::group_norm(Var xv, Var gv, Var bv, int groups, T eps) {
  const Shape xs = value(xv).shape;
  expect_rank(xs, 3, "group_norm", "input");
  const int B = xs[0], C = xs[1], L = xs[2];
  expect(groups >= 1 && C % groups == 0,
         "group_norm: " + std::to_string(C) + " channels not divisible into " + std::to_string(groups) + " groups");
  expect(value(gv).shape == Shape{C} && value(bv).shape == Shape{C}, "group_norm: gamma and beta must have shape [" +
                                                                         std::to_string(C) + "]");
  const int cg = C / groups;
  const std::size_t n = static_cast<std::size_t>(cg) * L;
  auto inv_std = std::make_shared<std::vector<T>>(static_cast<std::size_t>(B * groups));
  auto mean = std::make_shared<std::vector<T>>(static_cast<std::size_t>(B * groups));
  const T* x = value(xv).ptr();
  const T* gamma = value(gv).ptr();
  const T* beta = value(bv).ptr();
  Tensor<T> out(xs);
  for (int b = 0; b < B; ++b)
    for (int gi = 0; gi < groups; ++gi) {
      const std::size_t off = (static_cast<std::size_t>(b) * C + gi * cg) * L;
      double s = 0.0, s2 = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += x[off + i];
      const double mu = s / static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i) s2 += (x[off + i] - mu) * (x[off + i] - mu);
      const double is = 1.0 / std::sqrt(s2 / static_cast<double>(n) + static_cast<double>(eps));
      (*mean)[static_cast<std::size_t>(b * groups + gi)] = static_cast<T>(mu);
      (*inv_std)[static_cast<std::size_t>(b * groups + gi)] = static_cast<T>(is);
      for (int c = 0; c < cg; ++c) {
        const int ch = gi * cg + c;
        for (int l = 0; l < L; ++l) {
          const std::size_t i = off + static_cast<std::size_t>(c) * L + l;
          out[i] = static_cast<T>((x[i] - mu) * is) * gamma[ch] + beta[ch];
        }
      }
    }
  const bool needs = needs_grad(xv) || needs_grad(gv) || needs_grad(bv);
  const Var y = push(std::move(out), needs);
  if (!needs_grad(y)) return y;
  node(y).backward = [=, this] {
    const T* dy = node(y).grad.ptr();
    const T* xx = value(xv).ptr();
    const T* gm = value(gv).ptr();
    T* dgamma = needs_grad(gv) ? g(gv).ptr() : nullptr;
    T* dbeta = needs_grad(bv) ? g(bv).ptr() : nullptr;
    T* dx = needs_grad(xv) ? g(xv).ptr() : nullptr;
    std::vector<T> dxhat(n);
    for (int b = 0; b < B; ++b)
      for (int gi = 0; gi < groups; ++gi) {
        const std::size_t off = (static_cast<std::size_t>(b) * C + gi * cg) * L;
        const T mu = (*mean)[static_cast<std::size_t>(b * groups + gi)];
        const T is = (*inv_std)[static_cast<std::size_t>(b * groups + gi)];
        T sum_d = 0, sum_dx = 0;
        for (int c = 0; c < cg; ++c) {
          const int ch = gi * cg + c;
          for (int l = 0; l < L; ++l) {
            const std::size_t k = static_cast<std::size_t>(c) * L + l;
            const T xhat = (xx[off + k] - mu) * is;
            if (dgamma) dgamma[ch] += dy[off + k] * xhat;
            if (dbeta) dbeta[ch] += dy[off + k];
            dxhat[k] = dy[off + k] * gm[ch];
            sum_d += dxhat[k];
            sum_dx += dxhat[k] * xhat;
          }
        }
        if (!dx) continue;
        const T inv_n = T(1) / static_cast<T>(n);
        for (std::size_t k = 0; k < n; ++k) {
          const T xhat = (xx[off + k] - mu) * is;
          dx[off + k] += is * (dxhat[k] - inv_n * sum_d - xhat * inv_n * sum_dx);
        }
      }
  };
  return y;
}

template <class T>
Var Graph<T>::silu(Var xv) {
  Tensor<T> out(value(xv).shape);
  const T* x = value(xv).ptr();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] / (T(1) + std::exp(-x[i]));
  const Var y = push(std::move(out), needs_grad(xv));
  if (!needs_grad(y)) return y;
  node(y).backward = [=, this] {
    const T* xx = value(xv).ptr();
    const T* dy = node(y).grad.ptr();
    T* dx = g(xv).ptr();
    for (std::size_t i = 0; i < value(xv).size(); ++i) {
      const T s = T(1) / (T(1) + std::exp(-xx[i]));
      dx[i] += dy[i] * (s + xx[i] * s * (T(1) - s));
    }
  };
  return y;
}

template <class T>
Var Graph<T>::add(Var a, Var b) {
  expect(value(a).shape == value(b).shape,
         "add: shapes " + shape_str(value(a).shape) + " and " + shape_str(value(b).shape) + " differ");
  Tensor<T> out = value(a);
  const T* pb = value(b).ptr();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += pb[i];
  const Var y = push(std::move(out), needs_grad(a) || needs_grad(b));
  if (!needs_grad(y)) return y;
  node(y).backward = [=, this] {
    const Tensor<T>& dy = node(y).grad;
    for (Var v : {a, b}) {
      if (!needs_grad(v)) continue;
      T* d = g(v).ptr();
      for (std::size_t i = 0; i < dy.size(); ++i) d[i] += dy[i];
    }
  };
  return y;
}

template <class T>
Var Graph<T>::add_scalar(Var xv, T c) {
  Tensor<T> out = value(xv);
  for (auto& v : out.data) v += c;
  const Var y = push(std::move(out), needs_grad(xv));
  if (!needs_grad(y)) return y;
  node(y).backward = [=, this] {
    const Tensor<T>& dy = node(y).grad;
    T* d = g(xv).ptr();
    for (std::size_t i = 0; i < dy.size(); ++i) d[i] += dy[i];
  };
  return y;
}

template <class T>
Var Graph<T>::scale_batch(Var xv, const std::vector<T>& scale) {
  const Shape xs = value(xv).shape;
  expect(!xs.empty() && static_cast<std::size_t>(xs[0]) == scale.size(),
         "scale_batch: " + std::to_string(scale.size()) + " factors for shape " + shape_str(xs));
  const std::size_t per = xs[0] == 0 ? 0 : value(xv).size() / static_cast<std::size_t>(xs[0]);
  Tensor<T> out = value(xv);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= scale[i / per];
  const Var y = push(std::move(out), needs_grad(xv));
  if (!needs_grad(y)) return y;
  node(y).backward = [=, this] {
    const Tensor<T>& dy = node(y).grad;
    T* d = g(xv).ptr();
    for (std::size_t i = 0; i < dy.size(); ++i) d[i] += scale[i / per] * dy[i];
  };
  return y;
}

template <class T>
Var Graph<T>::film(Var xv, Var sv, Var hv) {
  const Shape xs = value(xv).shape;
  expect_rank(xs, 3, "film", "input");
  const Shape want{xs[0], xs[1]};
  expect(value(sv).shape == want && value(hv).shape == want,
         "film: scale and shift must have shape " + shape_str(want));
  const int B = xs[0], C = xs[1], L = xs[2];
  Tensor<T> out(xs);
  const T* x = value(xv).ptr();
  const T* s = value(sv).ptr();
  const T* h = value(hv).ptr();
  for (int bc = 0; bc < B * C; ++bc)
    for (int l = 0; l < L; ++l) {
      const std::size_t i = static_cast<std::size_t>(bc) * L + l;
      out[i] = s[bc] * x[i] + h[bc];
    }
  const Var y = push(std::move(out), needs_grad(xv) || needs_grad(sv) || needs_grad(hv));
  if (!needs_grad(y)) return y;
  node(y).backward = [=, this] {
    const T* dy = node(y).grad.ptr();
    const T* xx = value(xv).ptr();
    const T* ss = value(sv).ptr();
    T* dx = needs_grad(xv) ? g(xv).ptr() : nullptr;
    T* ds = needs_grad(sv) ? g(sv).ptr() : nullptr;
    T* dh = needs_grad(hv) ? g(hv).ptr() : nullptr;
    for (int bc = 0; bc < B * C; ++bc) {
      T a = 0, c = 0;
      for (int l = 0; l < L; ++l) {
        const std::size_t i = static_cast<std::size_t>(bc) * L + l;
        if (dx) dx[i] += ss[bc] * dy[i];
        a += dy[i] * xx[i];
        c += dy[i];
      }
      if (ds) ds[bc] += a;
      if (dh) dh[bc] += c;
    }
  };
  return y;
}

template <class T>
Var Graph<T>::add_channel(Var xv, Var hv) {
  const Shape xs = value(xv).shape;
  expect_rank(xs, 3, "add_channel", "input");
  const Shape want{xs[0], xs[1]};
  expect(value(hv).shape == want, "add_channel: shift must have shape " + shape_str(want));
  const int BC = xs[0] * xs[1], L = xs[2];
  Tensor<T> out = value(xv);
  const T* h = value(hv).ptr();
  for (int bc = 0; bc < BC; ++bc)
    for (int l = 0; l < L; ++l) out[static_cast<std::size_t>(bc) * L + l] += h[bc];
  const Var y = push(std::move(out), needs_grad(xv) || needs_grad(hv));
  if (!needs_grad(y)) return y;
  node(y).backward = [=, this] {
    const T* dy = node(y).grad.ptr();
    T* dx = needs_grad(xv) ? g(xv).ptr() : nullptr;
    T* dh = needs_grad(hv) ? g(hv).ptr() : nullptr;
    for (int bc = 0; bc < BC; ++bc)
      for (int l = 0; l < L; ++l) {
        const std::size_t i = static_cast<std::size_t>(bc) * L + l;
        if (dx) dx[i] += dy[i];
        if (dh) dh[bc] += dy[i];
      }
  };
  return y;
}

template <class T>
Var Graph<T>::concat_channels(Var a, Var b) {
  const Shape as = value(a).shape, bs = value(b).shape;
  expect_rank(as, 3, "concat_channels", "first input");
  expect_rank(bs, 3, "concat_channels", "second input");
  expect(as[0] == bs[0] && as[2] == bs[2], "concat_channels: " + shape_str(as) + " and " + shape_str(bs) +
                                               " differ outside the channel axis");
  const int B = as[0], Ca = as[1], Cb = bs[1], L = as[2];
  Tensor<T> out({B, Ca + Cb, L});
  for (int i = 0; i < B; ++i) {
    std::copy_n(value(a).ptr() + static_cast<std::size_t>(i) * Ca * L, Ca * L,
                out.ptr() + static_cast<std::size_t>(i) * (Ca + Cb) * L);
    std::copy_n(value(b).ptr() + static_cast<std::size_t>(i) * Cb * L, Cb * L,
                out.ptr() + (static_cast<std::size_t>(i) * (Ca + Cb) + Ca) * L);
  }
  const Var y = push(std::move(out), needs_grad(a) || needs_grad(b));
  if (!needs_grad(y)) return y;
  node(y).backward = [=, this] {
    const T* dy = node(y).grad.ptr();
    for (int i = 0; i < B; ++i) {
      if (needs_grad(a)) {
        T* d = g(a).ptr() + static_cast<std::size_t>(i) * Ca * L;
        const T* s = dy + static_cast<std::size_t>(i) * (Ca + Cb) * L;
        for (int k = 0; k < Ca * L; ++k) d[k] += s[k];
      }
      if (needs_grad(b)) {
        T* d = g(b).ptr() + static_cast<std::size_t>(i) * Cb * L;
        const T* s = dy + (static_cast<std::size_t>(i) * (Ca + Cb) + Ca) * L;
        for (int k = 0; k < Cb * L; ++k) d[k] += s[k];
      }
    }
  };
  return y;
}

template <class T>
Var Graph<T>::concat_features(Var a, Var b) {
  const Shape as = value(a).shape, bs = value(b).shape;
  expect_rank(as, 2, "concat_features", "first input");
  expect_rank(bs, 2, "concat_features", "second input");
  expect(as[0] == bs[0], "concat_features: batch sizes differ");
  const int B = as[0], Da = as[1], Db = bs[1];
  Tensor<T> out({B, Da + Db});
  for (int i = 0; i < B; ++i) {
    std::copy_n(value(a).ptr() + static_cast<std::size_t>(i) * Da, Da, out.ptr() + static_cast<std::size_t>(i) * (Da + Db));
    std::copy_n(value(b).ptr() + static_cast<std::size_t>(i) * Db, Db,
                out.ptr() + static_cast<std::size_t>(i) * (Da + Db) + Da);
  }
  const Var y = push(std::move(out), needs_grad(a) || needs_grad(b));
  if (!needs_grad(y)) return y;
  node(y).backward = [=, this] {
    const T* dy = node(y).grad.ptr();
    for (int i = 0; i < B; ++i) {
      const T* row = dy + static_cast<std::size_t>(i) * (Da + Db);
      if (needs_grad(a)) {
        T* d = g(a).ptr() + static_cast<std::size_t>(i) * Da;
        for (int k = 0; k < Da; ++k) d[k] += row[k];
      }
      if (needs_grad(b)) {
        T* d = g(b).ptr() + static_cast<std::size_t>(i) * Db;
        for (int k = 0; k < Db; ++k) d[k] += row[Da + k];
      }
    }
  };
  return y;
}

template <class T>
Var Graph<T>::slice_features(Var xv, int from, int count) {
  const Shape xs = value(xv).shape;
  expect_rank(xs, 2, "slice_features", "input");
  expect(from >= 0 && count >= 1 && from + count <= xs[1],
         "slice_features: range [" + std::to_string(from) + ", " + std::to_string(from + count) + ") outside " +
             shape_str(xs));
  const int B = xs[0], D = xs[1];
  Tensor<T> out({B, count});
  for (int i = 0; i < B; ++i)
    std::copy_n(value(xv).ptr() + static_cast<std::size_t>(i) * D + from, count,
                out.ptr() + static_cast<std::size_t>(i) * count);
  const Var y = push(std::move(out), needs_grad(xv));
  if (!needs_grad(y)) return y;
  node(y).backward = [=, this] {
    const T* dy = node(y).grad.ptr();
    T* dx = g(xv).ptr();
    for (int i = 0; i < B; ++i)
      for (int k = 0; k < count; ++k) dx[static_cast<std::size_t>(i) * D + from + k] += dy[i * count + k];
  };
  return y;
}

template <class T>
Var Graph<T>::upsample2(Var xv) {
  const Shape xs = value(xv).shape;
  expect_rank(xs, 3, "upsample2", "input");
  const int BC = xs[0] * xs[1], L = xs[2];
  Tensor<T> out({xs[0], xs[1], 2 * L});
  const T* x = value(xv).ptr();
  for (int bc = 0; bc < BC; ++bc)
    for (int l = 0; l < L; ++l) {
      const T v = x[static_cast<std::size_t>(bc) * L + l];
      out[static_cast<std::size_t>(bc) * 2 * L + 2 * l] = v;
      out[static_cast<std::size_t>(bc) * 2 * L + 2 * l + 1] = v;
    }
  const Var y = push(std::move(out), needs_grad(xv));
  if (!needs_grad(y)) return y;
  node(y).backward = [=, this] {
    const T* dy = node(y).grad.ptr();
    T* dx = g(xv).ptr();
    for (int bc = 0; bc < BC; ++bc)
      for (int l = 0; l < L; ++l) {
        const std::size_t o = static_cast<std::size_t>(bc) * 2 * L + 2 * l;
        dx[static_cast<std::size_t>(bc) * L + l] += dy[o] + dy[o + 1];
      }
  };
  return y;
}

template <class T>
Var Graph<T>::mse(Var a, Var b) {
  expect(value(a).shape == value(b).shape,
         "mse: shapes " + shape_str(value(a).shape) + " and " + shape_str(value(b).shape) + " differ");
  const std::size_t n = value(a).size();
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(value(a)[i]) - static_cast<double>(value(b)[i]);
    s += d * d;
  }
  const Var y = push(Tensor<T>({1}, static_cast<T>(s / static_cast<double>(n))), needs_grad(a) || needs_grad(b));
  if (!needs_grad(y)) return y;
  node(y).backward = [=, this] {
    const T scale = node(y).grad[0] * T(2) / static_cast<T>(n);
    const T* pa = value(a).ptr();
    const T* pb = value(b).ptr();
    T* da = needs_grad(a) ? g(a).ptr() : nullptr;
    T* db = needs_grad(b) ? g(b).ptr() : nullptr;
    for (std::size_t i = 0; i < n; ++i) {
      const T d = pa[i] - pb[i];
      if (da) da[i] += scale * d;
      if (db) db[i] -= scale * d;
    }
  };
  return y;
}

template class Graph<float>;
template class Graph<double>;

}  // namespace paydiff::nn
