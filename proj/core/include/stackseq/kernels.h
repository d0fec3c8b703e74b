#pragma once

#include <utility>

#include "stackseq/tensor.h"

// Forward and backward kernels for every layer the model uses. All kernels
// are pure functions: inputs are immutable, outputs freshly allocated, and
// reduction order is fixed, so identical inputs give bit-identical results.
namespace stackseq::kernels {

// table [V+1, k], ids [B, t] with every id in [0, V] -> out [B, t, k].
// Id 0 is the reserved padding row.
template <typename T>
TensorT<T> embedding_lookup(const TensorT<T>& table, const IntTensor& ids);

// Scatter-adds dy [B, t, k] into dtable [V+1, k] at the looked-up rows
// (including row 0).
template <typename T>
void embedding_lookup_backward(const IntTensor& ids, const TensorT<T>& dy, TensorT<T>& dtable);

// Causal dilated 1-d convolution over the time axis.
// x [B, t, k_in], w [kw, k_in, k_out], b [k_out] -> out [B, t, k_out].
// out[b, j] sees x[b, j - q*dilation] for q in 0..kw-1; positions before the
// sequence start read as zero vectors (left zero-padding).
template <typename T>
TensorT<T> causal_conv1d(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& b,
                         int64_t dilation);

template <typename T>
void causal_conv1d_backward(const TensorT<T>& x, const TensorT<T>& w, int64_t dilation,
                            const TensorT<T>& dy, TensorT<T>& dx, TensorT<T>& dw, TensorT<T>& db);

// Per-position normalization over the channel (last) axis.
// istd holds 1/sqrt(var+eps) per position, xhat the normalized input; both
// are needed by the backward pass.
template <typename T>
struct LayerNormCache {
  TensorT<T> xhat;  // same shape as x
  TensorT<T> istd;  // [positions]
};

template <typename T>
TensorT<T> layer_norm(const TensorT<T>& x, const TensorT<T>& gamma, const TensorT<T>& beta, T eps,
                      LayerNormCache<T>* cache = nullptr);

template <typename T>
void layer_norm_backward(const LayerNormCache<T>& cache, const TensorT<T>& gamma,
                         const TensorT<T>& dy, TensorT<T>& dx, TensorT<T>& dgamma,
                         TensorT<T>& dbeta);

template <typename T>
TensorT<T> relu(const TensorT<T>& x);

// Masks dy where x <= 0 (subgradient 0 at exactly 0). Passing the relu
// output instead of its input gives the same mask.
template <typename T>
TensorT<T> relu_backward(const TensorT<T>& x, const TensorT<T>& dy);

// out = alpha * f + x. alpha == 0 short-circuits to a copy of x so a fresh
// block is the identity bit for bit.
template <typename T>
TensorT<T> scaled_residual_add(const TensorT<T>& x, const TensorT<T>& f, T alpha);

// dx = dy, df = alpha * dy, dalpha = sum(f * dy). dx is the caller's dy.
template <typename T>
void scaled_residual_add_backward(const TensorT<T>& f, T alpha, const TensorT<T>& dy,
                                  TensorT<T>& df, T& dalpha);

// h [B, t, k] * w [k, m] + b [m] -> [B, t, m]; the softmax projection.
template <typename T>
TensorT<T> linear(const TensorT<T>& h, const TensorT<T>& w, const TensorT<T>& b);

template <typename T>
void linear_backward(const TensorT<T>& h, const TensorT<T>& w, const TensorT<T>& dy, TensorT<T>& dh,
                     TensorT<T>& dw, TensorT<T>& db);

// Masked mean cross entropy over logits [B, t, V+1] with targets [B, t].
// loss = mean over mask-true positions of -log softmax(logits)[target];
// grad = (softmax - onehot)/count at those positions, zero elsewhere.
// Stabilized by max subtraction. Throws if the mask is all false.
template <typename T>
std::pair<T, TensorT<T>> softmax_cross_entropy(const TensorT<T>& logits, const IntTensor& targets,
                                               const std::vector<bool>& mask);

}  // namespace stackseq::kernels
