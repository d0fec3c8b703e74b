#include "stackseq/kernels.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace stackseq::kernels {

namespace {

// Fixed-order 8-lane dot product: bit-deterministic everywhere, and the
// independent accumulators let the compiler vectorize the reduction.
template <typename T>
inline T dot_fixed(const T* a, const T* b, int64_t n) {
  T acc[8] = {};
  int64_t i = 0;
  for (; i + 8 <= n; i += 8)
    for (int u = 0; u < 8; ++u) acc[u] += a[i + u] * b[i + u];
  T total = ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
  for (; i < n; ++i) total += a[i] * b[i];
  return total;
}

}  // namespace

template <typename T>
TensorT<T> embedding_lookup(const TensorT<T>& table, const IntTensor& ids) {
  if (table.rank() != 2) throw std::invalid_argument("embedding_lookup: table must be rank 2");
  if (ids.shape.size() != 2) throw std::invalid_argument("embedding_lookup: ids must be rank 2");
  const int64_t rows = table.dim(0), k = table.dim(1);
  const int64_t B = ids.dim(0), t = ids.dim(1);
  TensorT<T> out = TensorT<T>::zeros({B, t, k});
  const T* tab = table.ptr();
  T* o = out.ptr();
  for (int64_t p = 0; p < B * t; ++p) {
    int32_t id = ids.data[static_cast<size_t>(p)];
    if (id < 0 || id >= rows)
      throw std::out_of_range("embedding_lookup: id " + std::to_string(id) + " outside [0, " +
                              std::to_string(rows - 1) + "]");
    const T* row = tab + static_cast<size_t>(id) * k;
    std::copy(row, row + k, o + p * k);
  }
  return out;
}

template <typename T>
void embedding_lookup_backward(const IntTensor& ids, const TensorT<T>& dy, TensorT<T>& dtable) {
  const int64_t rows = dtable.dim(0), k = dtable.dim(1);
  const int64_t positions = ids.numel();
  if (dy.numel() != positions * k)
    throw std::invalid_argument("embedding_lookup_backward: dy shape mismatch");
  const T* g = dy.ptr();
  T* dt = dtable.ptr();
  for (int64_t p = 0; p < positions; ++p) {
    int32_t id = ids.data[static_cast<size_t>(p)];
    if (id < 0 || id >= rows) throw std::out_of_range("embedding_lookup_backward: id out of range");
    T* row = dt + static_cast<size_t>(id) * k;
    const T* src = g + p * k;
    for (int64_t c = 0; c < k; ++c) row[c] += src[c];
  }
}

template <typename T>
TensorT<T> causal_conv1d(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& b,
                         int64_t dilation) {
  if (dilation < 1) throw std::invalid_argument("causal_conv1d: dilation must be >= 1");
  if (x.rank() != 3 || w.rank() != 3 || b.rank() != 1)
    throw std::invalid_argument("causal_conv1d: bad ranks");
  const int64_t B = x.dim(0), t = x.dim(1), k_in = x.dim(2);
  const int64_t kw = w.dim(0), k_out = w.dim(2);
  if (w.dim(1) != k_in || b.dim(0) != k_out)
    throw std::invalid_argument("causal_conv1d: weight/bias shape mismatch");

  TensorT<T> out = TensorT<T>::zeros({B, t, k_out});
  const T* xp = x.ptr();
  const T* wp = w.ptr();
  const T* bp = b.ptr();
  T* op = out.ptr();
  for (int64_t bi = 0; bi < B; ++bi) {
    const T* xb = xp + bi * t * k_in;
    T* ob = op + bi * t * k_out;
    for (int64_t j = 0; j < t; ++j) {
      T* orow = ob + j * k_out;
      for (int64_t o = 0; o < k_out; ++o) orow[o] = bp[o];
      // Tap q = kw-1 reads the current position, q = 0 the oldest.
      for (int64_t q = 0; q < kw; ++q) {
        int64_t src = j - (kw - 1 - q) * dilation;
        if (src < 0) continue;
        const T* xrow = xb + src * k_in;
        const T* wq = wp + q * k_in * k_out;
        for (int64_t i = 0; i < k_in; ++i) {
          T xv = xrow[i];
          const T* wrow = wq + i * k_out;
          for (int64_t o = 0; o < k_out; ++o) orow[o] += xv * wrow[o];
        }
      }
    }
  }
  return out;
}

template <typename T>
void causal_conv1d_backward(const TensorT<T>& x, const TensorT<T>& w, int64_t dilation,
                            const TensorT<T>& dy, TensorT<T>& dx, TensorT<T>& dw, TensorT<T>& db) {
  const int64_t B = x.dim(0), t = x.dim(1), k_in = x.dim(2);
  const int64_t kw = w.dim(0), k_out = w.dim(2);
  check_shape(dy, {B, t, k_out}, "causal_conv1d_backward dy");
  check_shape(dx, {B, t, k_in}, "causal_conv1d_backward dx");
  check_shape(dw, {kw, k_in, k_out}, "causal_conv1d_backward dw");
  check_shape(db, {k_out}, "causal_conv1d_backward db");

  const T* xp = x.ptr();
  const T* wp = w.ptr();
  const T* gp = dy.ptr();
  T* dxp = dx.ptr();
  T* dwp = dw.ptr();
  T* dbp = db.ptr();

  for (int64_t bi = 0; bi < B; ++bi) {
    const T* xb = xp + bi * t * k_in;
    const T* gb = gp + bi * t * k_out;
    T* dxb = dxp + bi * t * k_in;
    for (int64_t j = 0; j < t; ++j) {
      const T* grow = gb + j * k_out;
      for (int64_t o = 0; o < k_out; ++o) dbp[o] += grow[o];
      for (int64_t q = 0; q < kw; ++q) {
        int64_t src = j - (kw - 1 - q) * dilation;
        if (src < 0) continue;
        const T* xrow = xb + src * k_in;
        T* dxrow = dxb + src * k_in;
        const T* wq = wp + q * k_in * k_out;
        T* dwq = dwp + q * k_in * k_out;
        // weight grads stream, input grads reduce; kept separate so both
        // loops vectorize
        for (int64_t i = 0; i < k_in; ++i) {
          T xv = xrow[i];
          T* dwrow = dwq + i * k_out;
          for (int64_t o = 0; o < k_out; ++o) dwrow[o] += xv * grow[o];
        }
        for (int64_t i = 0; i < k_in; ++i) dxrow[i] += dot_fixed(grow, wq + i * k_out, k_out);
      }
    }
  }
}

template <typename T>
TensorT<T> layer_norm(const TensorT<T>& x, const TensorT<T>& gamma, const TensorT<T>& beta, T eps,
                      LayerNormCache<T>* cache) {
  if (x.rank() < 1) throw std::invalid_argument("layer_norm: rank must be >= 1");
  const int64_t k = x.shape.back();
  if (gamma.numel() != k || beta.numel() != k)
    throw std::invalid_argument("layer_norm: gamma/beta must have k elements");
  const int64_t positions = x.numel() / k;

  TensorT<T> out = TensorT<T>::zeros(x.shape);
  if (cache) {
    cache->xhat = TensorT<T>::zeros(x.shape);
    cache->istd = TensorT<T>::zeros({positions});
  }
  const T* xp = x.ptr();
  const T* gp = gamma.ptr();
  const T* bp = beta.ptr();
  T* op = out.ptr();
  for (int64_t p = 0; p < positions; ++p) {
    const T* row = xp + p * k;
    T* orow = op + p * k;
    T mean = 0;
    for (int64_t c = 0; c < k; ++c) mean += row[c];
    mean /= static_cast<T>(k);
    T var = 0;
    for (int64_t c = 0; c < k; ++c) {
      T d = row[c] - mean;
      var += d * d;
    }
    var /= static_cast<T>(k);
    T istd = T(1) / std::sqrt(var + eps);
    for (int64_t c = 0; c < k; ++c) {
      T xhat = (row[c] - mean) * istd;
      orow[c] = xhat * gp[c] + bp[c];
      if (cache) cache->xhat.ptr()[p * k + c] = xhat;
    }
    if (cache) cache->istd.ptr()[p] = istd;
  }
  return out;
}

template <typename T>
void layer_norm_backward(const LayerNormCache<T>& cache, const TensorT<T>& gamma,
                         const TensorT<T>& dy, TensorT<T>& dx, TensorT<T>& dgamma,
                         TensorT<T>& dbeta) {
  const int64_t k = cache.xhat.shape.back();
  const int64_t positions = cache.xhat.numel() / k;
  check_shape(dy, cache.xhat.shape, "layer_norm_backward dy");
  check_shape(dx, cache.xhat.shape, "layer_norm_backward dx");

  const T* xhat = cache.xhat.ptr();
  const T* istd = cache.istd.ptr();
  const T* gp = gamma.ptr();
  const T* gyp = dy.ptr();
  T* dxp = dx.ptr();
  T* dgp = dgamma.ptr();
  T* dbp = dbeta.ptr();

  for (int64_t p = 0; p < positions; ++p) {
    const T* xh = xhat + p * k;
    const T* gy = gyp + p * k;
    T* dxrow = dxp + p * k;
    T sum_dxhat = 0, sum_dxhat_xhat = 0;
    for (int64_t c = 0; c < k; ++c) {
      T dxhat = gy[c] * gp[c];
      sum_dxhat += dxhat;
      sum_dxhat_xhat += dxhat * xh[c];
      dgp[c] += gy[c] * xh[c];
      dbp[c] += gy[c];
    }
    T inv_k = T(1) / static_cast<T>(k);
    T s = istd[p];
    for (int64_t c = 0; c < k; ++c) {
      T dxhat = gy[c] * gp[c];
      dxrow[c] += s * (dxhat - inv_k * sum_dxhat - xh[c] * inv_k * sum_dxhat_xhat);
    }
  }
}

template <typename T>
TensorT<T> relu(const TensorT<T>& x) {
  TensorT<T> out = TensorT<T>::zeros(x.shape);
  for (int64_t i = 0; i < x.numel(); ++i) out[i] = x[i] > T(0) ? x[i] : T(0);
  return out;
}

template <typename T>
TensorT<T> relu_backward(const TensorT<T>& x, const TensorT<T>& dy) {
  if (!x.same_shape(dy)) throw std::invalid_argument("relu_backward: shape mismatch");
  TensorT<T> out = TensorT<T>::zeros(x.shape);
  for (int64_t i = 0; i < x.numel(); ++i) out[i] = x[i] > T(0) ? dy[i] : T(0);
  return out;
}

template <typename T>
TensorT<T> scaled_residual_add(const TensorT<T>& x, const TensorT<T>& f, T alpha) {
  if (!x.same_shape(f)) throw std::invalid_argument("scaled_residual_add: shape mismatch");
  TensorT<T> out = x;
  if (alpha == T(0)) return out;
  for (int64_t i = 0; i < out.numel(); ++i) out[i] += alpha * f[i];
  return out;
}

template <typename T>
void scaled_residual_add_backward(const TensorT<T>& f, T alpha, const TensorT<T>& dy,
                                  TensorT<T>& df, T& dalpha) {
  if (!f.same_shape(dy)) throw std::invalid_argument("scaled_residual_add_backward: shape mismatch");
  check_shape(df, f.shape, "scaled_residual_add_backward df");
  T acc = 0;
  for (int64_t i = 0; i < f.numel(); ++i) {
    df[i] += alpha * dy[i];
    acc += f[i] * dy[i];
  }
  dalpha += acc;
}

template <typename T>
TensorT<T> linear(const TensorT<T>& h, const TensorT<T>& w, const TensorT<T>& b) {
  const int64_t k = h.shape.back();
  if (w.rank() != 2 || w.dim(0) != k) throw std::invalid_argument("linear: weight shape mismatch");
  const int64_t m = w.dim(1);
  if (b.numel() != m) throw std::invalid_argument("linear: bias shape mismatch");
  const int64_t positions = h.numel() / k;

  std::vector<int64_t> out_shape = h.shape;
  out_shape.back() = m;
  TensorT<T> out = TensorT<T>::zeros(out_shape);
  const T* hp = h.ptr();
  const T* wp = w.ptr();
  const T* bp = b.ptr();
  T* op = out.ptr();
  for (int64_t p = 0; p < positions; ++p) {
    const T* hrow = hp + p * k;
    T* orow = op + p * m;
    std::copy(bp, bp + m, orow);
    for (int64_t c = 0; c < k; ++c) {
      T hv = hrow[c];
      const T* wrow = wp + c * m;
      for (int64_t v = 0; v < m; ++v) orow[v] += hv * wrow[v];
    }
  }
  return out;
}

template <typename T>
void linear_backward(const TensorT<T>& h, const TensorT<T>& w, const TensorT<T>& dy, TensorT<T>& dh,
                     TensorT<T>& dw, TensorT<T>& db) {
  const int64_t k = h.shape.back();
  const int64_t m = w.dim(1);
  const int64_t positions = h.numel() / k;
  check_shape(dh, h.shape, "linear_backward dh");
  check_shape(dw, w.shape, "linear_backward dw");

  const T* hp = h.ptr();
  const T* wp = w.ptr();
  const T* gp = dy.ptr();
  T* dhp = dh.ptr();
  T* dwp = dw.ptr();
  T* dbp = db.ptr();
  for (int64_t p = 0; p < positions; ++p) {
    const T* hrow = hp + p * k;
    const T* grow = gp + p * m;
    T* dhrow = dhp + p * k;
    for (int64_t v = 0; v < m; ++v) dbp[v] += grow[v];
    for (int64_t c = 0; c < k; ++c) {
      T hv = hrow[c];
      T* dwrow = dwp + c * m;
      for (int64_t v = 0; v < m; ++v) dwrow[v] += hv * grow[v];
    }
    for (int64_t c = 0; c < k; ++c) dhrow[c] += dot_fixed(grow, wp + c * m, m);
  }
}

template <typename T>
std::pair<T, TensorT<T>> softmax_cross_entropy(const TensorT<T>& logits, const IntTensor& targets,
                                               const std::vector<bool>& mask) {
  if (logits.rank() != 3) throw std::invalid_argument("softmax_cross_entropy: logits must be rank 3");
  const int64_t B = logits.dim(0), t = logits.dim(1), classes = logits.dim(2);
  if (targets.numel() != B * t || static_cast<int64_t>(mask.size()) != B * t)
    throw std::invalid_argument("softmax_cross_entropy: targets/mask size mismatch");

  int64_t count = 0;
  for (bool m : mask)
    if (m) ++count;
  if (count == 0) throw std::invalid_argument("softmax_cross_entropy: mask has no supervised positions");

  TensorT<T> grad = TensorT<T>::zeros(logits.shape);
  const T* lp = logits.ptr();
  T* gp = grad.ptr();
  const T inv_count = T(1) / static_cast<T>(count);
  // Loss accumulated in double regardless of T; summation order fixed.
  double loss = 0.0;
  for (int64_t p = 0; p < B * t; ++p) {
    if (!mask[static_cast<size_t>(p)]) continue;
    int32_t target = targets.data[static_cast<size_t>(p)];
    if (target < 0 || target >= classes)
      throw std::out_of_range("softmax_cross_entropy: target out of range");
    const T* row = lp + p * classes;
    T* grow = gp + p * classes;
    T mx = row[0];
    for (int64_t c = 1; c < classes; ++c) mx = std::max(mx, row[c]);
    T denom = 0;
    for (int64_t c = 0; c < classes; ++c) {
      T e = std::exp(row[c] - mx);
      grow[c] = e;
      denom += e;
    }
    T inv_denom = T(1) / denom;
    for (int64_t c = 0; c < classes; ++c) grow[c] *= inv_denom * inv_count;
    grow[target] -= inv_count;
    loss += -(static_cast<double>(row[target] - mx) - std::log(static_cast<double>(denom)));
  }
  return {static_cast<T>(loss * static_cast<double>(inv_count)), std::move(grad)};
}

#define STACKSEQ_INSTANTIATE_KERNELS(T)                                                           \
  template TensorT<T> embedding_lookup<T>(const TensorT<T>&, const IntTensor&);                   \
  template void embedding_lookup_backward<T>(const IntTensor&, const TensorT<T>&, TensorT<T>&);   \
  template TensorT<T> causal_conv1d<T>(const TensorT<T>&, const TensorT<T>&, const TensorT<T>&,   \
                                       int64_t);                                                  \
  template void causal_conv1d_backward<T>(const TensorT<T>&, const TensorT<T>&, int64_t,          \
                                          const TensorT<T>&, TensorT<T>&, TensorT<T>&,            \
                                          TensorT<T>&);                                           \
  template TensorT<T> layer_norm<T>(const TensorT<T>&, const TensorT<T>&, const TensorT<T>&, T,   \
                                    LayerNormCache<T>*);                                          \
  template void layer_norm_backward<T>(const LayerNormCache<T>&, const TensorT<T>&,               \
                                       const TensorT<T>&, TensorT<T>&, TensorT<T>&, TensorT<T>&); \
  template TensorT<T> relu<T>(const TensorT<T>&);                                                 \
  template TensorT<T> relu_backward<T>(const TensorT<T>&, const TensorT<T>&);                     \
  template TensorT<T> scaled_residual_add<T>(const TensorT<T>&, const TensorT<T>&, T);            \
  template void scaled_residual_add_backward<T>(const TensorT<T>&, T, const TensorT<T>&,          \
                                                TensorT<T>&, T&);                                 \
  template TensorT<T> linear<T>(const TensorT<T>&, const TensorT<T>&, const TensorT<T>&);         \
  template void linear_backward<T>(const TensorT<T>&, const TensorT<T>&, const TensorT<T>&,       \
                                   TensorT<T>&, TensorT<T>&, TensorT<T>&);                        \
  template std::pair<T, TensorT<T>> softmax_cross_entropy<T>(const TensorT<T>&, const IntTensor&, \
                                                             const std::vector<bool>&);

STACKSEQ_INSTANTIATE_KERNELS(float)
STACKSEQ_INSTANTIATE_KERNELS(double)

#undef STACKSEQ_INSTANTIATE_KERNELS

}  // namespace stackseq::kernels
