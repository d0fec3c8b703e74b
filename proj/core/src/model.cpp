#include "stackseq/model.h"

#include <cmath>
#include <stdexcept>

namespace stackseq {

void ModelConfig::validate() const {
  if (vocab_size < 1) throw std::invalid_argument("config: vocab_size must be >= 1");
  if (embed_dim < 1) throw std::invalid_argument("config: embed_dim must be >= 1");
  if (max_len < 2) throw std::invalid_argument("config: max_len must be >= 2");
  if (num_blocks < 0) throw std::invalid_argument("config: num_blocks must be >= 0");
  if (kernel_width < 1) throw std::invalid_argument("config: kernel_width must be >= 1");
  if (base_dilations.empty()) throw std::invalid_argument("config: base_dilations empty");
  for (int64_t d : base_dilations)
    if (d < 1) throw std::invalid_argument("config: dilations must be >= 1");
  if (output_vocab < 0) throw std::invalid_argument("config: output_vocab must be >= 0");
}

namespace {

template <typename T>
TensorT<T> normal_tensor(std::vector<int64_t> shape, double scale, Rng& rng) {
  TensorT<T> t = TensorT<T>::zeros(std::move(shape));
  for (int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<T>(rng.normal() * scale);
  return t;
}

}  // namespace

template <typename T>
ResidualBlockT<T> init_block(const ModelConfig& config, int64_t dilation, Rng& rng) {
  const int64_t k = config.embed_dim, kw = config.kernel_width;
  const double conv_scale = 1.0 / std::sqrt(static_cast<double>(kw * k));
  ResidualBlockT<T> b;
  b.conv1_w = normal_tensor<T>({kw, k, k}, conv_scale, rng);
  b.conv1_b = TensorT<T>::zeros({k});
  b.ln1_gamma = TensorT<T>::full({k}, T(1));
  b.ln1_beta = TensorT<T>::zeros({k});
  b.conv2_w = normal_tensor<T>({kw, k, k}, conv_scale, rng);
  b.conv2_b = TensorT<T>::zeros({k});
  b.ln2_gamma = TensorT<T>::full({k}, T(1));
  b.ln2_beta = TensorT<T>::zeros({k});
  b.alpha = TensorT<T>::scalar(T(0));
  b.dilation = dilation;
  return b;
}

template <typename T>
ModelT<T> init_model(const ModelConfig& config, uint64_t seed) {
  config.validate();
  Rng rng(derive_seed(seed, 0x6d6f64656cULL));
  ModelT<T> m;
  m.config = config;
  const int64_t k = config.embed_dim;
  m.embedding = normal_tensor<T>({config.vocab_size + 1, k}, 0.01, rng);
  m.blocks.reserve(static_cast<size_t>(config.num_blocks));
  for (int64_t i = 0; i < config.num_blocks; ++i)
    m.blocks.push_back(init_block<T>(config, config.dilation_for_block(i), rng));
  m.softmax_w = normal_tensor<T>({k, config.head_vocab() + 1}, 0.01, rng);
  m.softmax_b = TensorT<T>::zeros({config.head_vocab() + 1});
  return m;
}

template <typename T>
TensorT<T> forward(const ModelT<T>& model, const IntTensor& ids, ForwardCacheT<T>* cache) {
  const T ln_eps = T(1e-6);
  TensorT<T> h = kernels::embedding_lookup(model.embedding, ids);
  if (cache) {
    cache->ids = ids;
    cache->hidden.clear();
    cache->blocks.clear();
    cache->hidden.push_back(h);
    cache->blocks.resize(model.blocks.size());
  }
  for (size_t i = 0; i < model.blocks.size(); ++i) {
    const ResidualBlockT<T>& blk = model.blocks[i];
    BlockCacheT<T> local;
    BlockCacheT<T>& bc = cache ? cache->blocks[i] : local;
    TensorT<T> c1 = kernels::causal_conv1d(h, blk.conv1_w, blk.conv1_b, blk.dilation);
    TensorT<T> n1 = kernels::layer_norm(c1, blk.ln1_gamma, blk.ln1_beta, ln_eps,
                                        cache ? &bc.ln1 : nullptr);
    bc.relu1 = kernels::relu(n1);
    TensorT<T> c2 = kernels::causal_conv1d(bc.relu1, blk.conv2_w, blk.conv2_b, 2 * blk.dilation);
    TensorT<T> n2 = kernels::layer_norm(c2, blk.ln2_gamma, blk.ln2_beta, ln_eps,
                                        cache ? &bc.ln2 : nullptr);
    bc.relu2 = kernels::relu(n2);
    h = kernels::scaled_residual_add(h, bc.relu2, blk.alpha[0]);
    if (cache) cache->hidden.push_back(h);
  }
  return kernels::linear(h, model.softmax_w, model.softmax_b);
}

template <typename T>
ModelGradsT<T> zeros_like(const ModelT<T>& model) {
  ModelGradsT<T> g;
  g.config = model.config;
  g.embedding = TensorT<T>::zeros(model.embedding.shape);
  g.blocks.resize(model.blocks.size());
  for (size_t i = 0; i < model.blocks.size(); ++i) {
    const ResidualBlockT<T>& b = model.blocks[i];
    ResidualBlockT<T>& gb = g.blocks[i];
    gb.conv1_w = TensorT<T>::zeros(b.conv1_w.shape);
    gb.conv1_b = TensorT<T>::zeros(b.conv1_b.shape);
    gb.ln1_gamma = TensorT<T>::zeros(b.ln1_gamma.shape);
    gb.ln1_beta = TensorT<T>::zeros(b.ln1_beta.shape);
    gb.conv2_w = TensorT<T>::zeros(b.conv2_w.shape);
    gb.conv2_b = TensorT<T>::zeros(b.conv2_b.shape);
    gb.ln2_gamma = TensorT<T>::zeros(b.ln2_gamma.shape);
    gb.ln2_beta = TensorT<T>::zeros(b.ln2_beta.shape);
    gb.alpha = TensorT<T>::scalar(T(0));
    gb.dilation = b.dilation;
  }
  g.softmax_w = TensorT<T>::zeros(model.softmax_w.shape);
  g.softmax_b = TensorT<T>::zeros(model.softmax_b.shape);
  return g;
}

template <typename T>
ModelGradsT<T> backward(const ModelT<T>& model, const ForwardCacheT<T>& cache,
                        const TensorT<T>& grad_logits) {
  if (cache.hidden.size() != model.blocks.size() + 1 || cache.blocks.size() != model.blocks.size())
    throw std::invalid_argument("backward: forward cache missing or stale");

  ModelGradsT<T> grads = zeros_like(model);

  // Softmax head.
  TensorT<T> dh = TensorT<T>::zeros(cache.hidden.back().shape);
  kernels::linear_backward(cache.hidden.back(), model.softmax_w, grad_logits, dh, grads.softmax_w,
                           grads.softmax_b);

  // Blocks in reverse. dh on entry is dH_i; the residual path passes it
  // through unchanged while the branch adds its contribution at dH_{i-1}.
  for (size_t ri = model.blocks.size(); ri-- > 0;) {
    const ResidualBlockT<T>& blk = model.blocks[ri];
    const BlockCacheT<T>& bc = cache.blocks[ri];
    ResidualBlockT<T>& gb = grads.blocks[ri];

    TensorT<T> df = TensorT<T>::zeros(bc.relu2.shape);
    T dalpha = 0;
    kernels::scaled_residual_add_backward(bc.relu2, blk.alpha[0], dh, df, dalpha);
    gb.alpha[0] += dalpha;

    TensorT<T> dn2 = kernels::relu_backward(bc.relu2, df);
    TensorT<T> dc2 = TensorT<T>::zeros(dn2.shape);
    kernels::layer_norm_backward(bc.ln2, blk.ln2_gamma, dn2, dc2, gb.ln2_gamma, gb.ln2_beta);

    TensorT<T> dr1 = TensorT<T>::zeros(bc.relu1.shape);
    kernels::causal_conv1d_backward(bc.relu1, blk.conv2_w, 2 * blk.dilation, dc2, dr1, gb.conv2_w,
                                    gb.conv2_b);

    TensorT<T> dn1 = kernels::relu_backward(bc.relu1, dr1);
    TensorT<T> dc1 = TensorT<T>::zeros(dn1.shape);
    kernels::layer_norm_backward(bc.ln1, blk.ln1_gamma, dn1, dc1, gb.ln1_gamma, gb.ln1_beta);

    kernels::causal_conv1d_backward(cache.hidden[ri], blk.conv1_w, blk.dilation, dc1, dh,
                                    gb.conv1_w, gb.conv1_b);
  }

  kernels::embedding_lookup_backward(cache.ids, dh, grads.embedding);
  return grads;
}

template <typename T>
void for_each_param(ModelT<T>& model,
                    const std::function<void(const std::string&, TensorT<T>&)>& fn) {
  fn("embedding", model.embedding);
  for (size_t i = 0; i < model.blocks.size(); ++i) {
    std::string p = "block" + std::to_string(i) + ".";
    ResidualBlockT<T>& b = model.blocks[i];
    fn(p + "conv1.w", b.conv1_w);
    fn(p + "conv1.b", b.conv1_b);
    fn(p + "ln1.gamma", b.ln1_gamma);
    fn(p + "ln1.beta", b.ln1_beta);
    fn(p + "conv2.w", b.conv2_w);
    fn(p + "conv2.b", b.conv2_b);
    fn(p + "ln2.gamma", b.ln2_gamma);
    fn(p + "ln2.beta", b.ln2_beta);
    fn(p + "alpha", b.alpha);
  }
  fn("softmax.w", model.softmax_w);
  fn("softmax.b", model.softmax_b);
}

template <typename T>
void for_each_param(const ModelT<T>& model,
                    const std::function<void(const std::string&, const TensorT<T>&)>& fn) {
  for_each_param(const_cast<ModelT<T>&>(model),
                 std::function<void(const std::string&, TensorT<T>&)>(
                     [&fn](const std::string& name, TensorT<T>& t) { fn(name, t); }));
}

template <typename T>
int64_t param_count(const ModelT<T>& model) {
  int64_t n = 0;
  for_each_param(model, std::function<void(const std::string&, const TensorT<T>&)>(
                            [&n](const std::string&, const TensorT<T>& t) { n += t.numel(); }));
  return n;
}

template <typename To, typename From>
ModelT<To> model_cast(const ModelT<From>& model) {
  ModelT<To> out;
  out.config = model.config;
  auto cast = [](const TensorT<From>& t) {
    TensorT<To> r = TensorT<To>::zeros(t.shape);
    for (int64_t i = 0; i < t.numel(); ++i) r[i] = static_cast<To>(t[i]);
    return r;
  };
  out.embedding = cast(model.embedding);
  out.blocks.resize(model.blocks.size());
  for (size_t i = 0; i < model.blocks.size(); ++i) {
    const ResidualBlockT<From>& b = model.blocks[i];
    ResidualBlockT<To>& ob = out.blocks[i];
    ob.conv1_w = cast(b.conv1_w);
    ob.conv1_b = cast(b.conv1_b);
    ob.ln1_gamma = cast(b.ln1_gamma);
    ob.ln1_beta = cast(b.ln1_beta);
    ob.conv2_w = cast(b.conv2_w);
    ob.conv2_b = cast(b.conv2_b);
    ob.ln2_gamma = cast(b.ln2_gamma);
    ob.ln2_beta = cast(b.ln2_beta);
    ob.alpha = cast(b.alpha);
    ob.dilation = b.dilation;
  }
  out.softmax_w = cast(model.softmax_w);
  out.softmax_b = cast(model.softmax_b);
  return out;
}

#define STACKSEQ_INSTANTIATE_MODEL(T)                                                             \
  template ResidualBlockT<T> init_block<T>(const ModelConfig&, int64_t, Rng&);                    \
  template ModelT<T> init_model<T>(const ModelConfig&, uint64_t);                                 \
  template TensorT<T> forward<T>(const ModelT<T>&, const IntTensor&, ForwardCacheT<T>*);          \
  template ModelGradsT<T> zeros_like<T>(const ModelT<T>&);                                        \
  template ModelGradsT<T> backward<T>(const ModelT<T>&, const ForwardCacheT<T>&,                  \
                                      const TensorT<T>&);                                         \
  template void for_each_param<T>(ModelT<T>&,                                                     \
                                  const std::function<void(const std::string&, TensorT<T>&)>&);   \
  template void for_each_param<T>(                                                                \
      const ModelT<T>&, const std::function<void(const std::string&, const TensorT<T>&)>&);       \
  template int64_t param_count<T>(const ModelT<T>&);

STACKSEQ_INSTANTIATE_MODEL(float)
STACKSEQ_INSTANTIATE_MODEL(double)

template ModelT<double> model_cast<double, float>(const ModelT<float>&);
template ModelT<float> model_cast<float, double>(const ModelT<double>&);

#undef STACKSEQ_INSTANTIATE_MODEL

}  // namespace stackseq
