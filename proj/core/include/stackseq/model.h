#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "stackseq/kernels.h"
#include "stackseq/rng.h"
#include "stackseq/tensor.h"

namespace stackseq {

struct ModelConfig {
  int64_t vocab_size = 0;   // items 1..V; id 0 is padding
  int64_t embed_dim = 64;   // k
  int64_t max_len = 20;     // t
  std::vector<int64_t> base_dilations = {1, 2, 4, 8};
  int64_t num_blocks = 4;   // L; block i gets base_dilations[i % len]
  int64_t kernel_width = 3; // kw, both convolutions
  // Softmax head vocabulary; 0 means same as vocab_size. Differs only for
  // transfer models whose head was replaced for a new item universe.
  int64_t output_vocab = 0;

  int64_t head_vocab() const { return output_vocab > 0 ? output_vocab : vocab_size; }
  int64_t dilation_for_block(int64_t i) const {
    return base_dilations[static_cast<size_t>(i % static_cast<int64_t>(base_dilations.size()))];
  }
  void validate() const;
};

// One residual block: conv -> LN -> relu -> conv -> LN -> relu, scaled by a
// learnable alpha and added back to the input. The second convolution runs
// at twice the block dilation. alpha is a rank-0 tensor so parameter
// traversal stays uniform.
template <typename T>
struct ResidualBlockT {
  TensorT<T> conv1_w, conv1_b;
  TensorT<T> ln1_gamma, ln1_beta;
  TensorT<T> conv2_w, conv2_b;
  TensorT<T> ln2_gamma, ln2_beta;
  TensorT<T> alpha;     // rank 0
  int64_t dilation = 1; // travels with the block through stacking
};

template <typename T>
struct ModelT {
  ModelConfig config;
  TensorT<T> embedding;  // [V+1, k]
  std::vector<ResidualBlockT<T>> blocks;
  TensorT<T> softmax_w;  // [k, head_vocab+1]
  TensorT<T> softmax_b;  // [head_vocab+1]

  int64_t num_blocks() const { return static_cast<int64_t>(blocks.size()); }
};

using ResidualBlock = ResidualBlockT<float>;
using Model = ModelT<float>;
using ModelD = ModelT<double>;

// Conv weights fan-in-scaled normal, LN gamma=1 beta=0, alpha=0, embedding
// and softmax weights normal with scale 0.01, biases zero. With every alpha
// at zero the whole block stack is the identity.
template <typename T>
ModelT<T> init_model(const ModelConfig& config, uint64_t seed);

template <typename T>
ResidualBlockT<T> init_block(const ModelConfig& config, int64_t dilation, Rng& rng);

// Everything backward needs, plus the per-block outputs for the probe.
// hidden[0] is the embedding output H_0; hidden[i] is block i's output H_i.
template <typename T>
struct BlockCacheT {
  kernels::LayerNormCache<T> ln1, ln2;
  TensorT<T> relu1;  // input to conv2
  TensorT<T> relu2;  // the residual branch F
};

template <typename T>
struct ForwardCacheT {
  IntTensor ids;
  std::vector<TensorT<T>> hidden;        // L+1 entries
  std::vector<BlockCacheT<T>> blocks;    // L entries
};

using ForwardCache = ForwardCacheT<float>;

// logits [B, t, head_vocab+1]. Pass a cache to retain hidden states for
// backward or the similarity probe; forward never mutates the model.
template <typename T>
TensorT<T> forward(const ModelT<T>& model, const IntTensor& ids, ForwardCacheT<T>* cache = nullptr);

// Gradients mirror the parameter structure exactly, so they reuse ModelT.
template <typename T>
using ModelGradsT = ModelT<T>;

using ModelGrads = ModelGradsT<float>;

template <typename T>
ModelGradsT<T> zeros_like(const ModelT<T>& model);

template <typename T>
ModelGradsT<T> backward(const ModelT<T>& model, const ForwardCacheT<T>& cache,
                        const TensorT<T>& grad_logits);

// Visits every parameter tensor with its checkpoint name: "embedding",
// "block{i}.conv1.w" ... "block{i}.alpha", "softmax.w", "softmax.b".
template <typename T>
void for_each_param(ModelT<T>& model, const std::function<void(const std::string&, TensorT<T>&)>& fn);

template <typename T>
void for_each_param(const ModelT<T>& model,
                    const std::function<void(const std::string&, const TensorT<T>&)>& fn);

template <typename T>
int64_t param_count(const ModelT<T>& model);

// fp32 <-> fp64 conversion for gradient checking.
template <typename To, typename From>
ModelT<To> model_cast(const ModelT<From>& model);

}  // namespace stackseq
