#include <benchmark/benchmark.h>

#include "stackseq/kernels.h"
#include "stackseq/model.h"
#include "stackseq/rng.h"

using namespace stackseq;

namespace {

Tensor random_tensor(std::vector<int64_t> shape, Rng& rng) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<float>(rng.normal() * 0.1);
  return t;
}

IntTensor random_ids(int64_t B, int64_t t, int64_t vocab, Rng& rng) {
  IntTensor ids = IntTensor::zeros({B, t});
  for (auto& v : ids.data) v = static_cast<int32_t>(1 + rng.below(static_cast<uint64_t>(vocab)));
  return ids;
}

}  // namespace

static void ConvForward(benchmark::State& state) {
  const int64_t dilation = state.range(0);
  Rng rng(1);
  Tensor x = random_tensor({128, 19, 32}, rng);
  Tensor w = random_tensor({3, 32, 32}, rng);
  Tensor b = random_tensor({32}, rng);
  for (auto _ : state) {
    Tensor out = kernels::causal_conv1d(x, w, b, dilation);
    benchmark::DoNotOptimize(out.ptr());
  }
}
BENCHMARK(ConvForward)->Arg(1)->Arg(4)->Arg(16);

static void ConvBackward(benchmark::State& state) {
  Rng rng(2);
  Tensor x = random_tensor({128, 19, 32}, rng);
  Tensor w = random_tensor({3, 32, 32}, rng);
  Tensor dy = random_tensor({128, 19, 32}, rng);
  for (auto _ : state) {
    Tensor dx = Tensor::zeros(x.shape);
    Tensor dw = Tensor::zeros(w.shape);
    Tensor db = Tensor::zeros({32});
    kernels::causal_conv1d_backward(x, w, state.range(0), dy, dx, dw, db);
    benchmark::DoNotOptimize(dx.ptr());
  }
}
BENCHMARK(ConvBackward)->Arg(1)->Arg(4);

static void SoftmaxCrossEntropy(benchmark::State& state) {
  const int64_t vocab = state.range(0);
  Rng rng(3);
  Tensor logits = random_tensor({128, 19, vocab + 1}, rng);
  IntTensor targets = random_ids(128, 19, vocab, rng);
  std::vector<bool> mask(static_cast<size_t>(128 * 19), true);
  for (auto _ : state) {
    auto [loss, grad] = kernels::softmax_cross_entropy(logits, targets, mask);
    benchmark::DoNotOptimize(loss);
  }
}
BENCHMARK(SoftmaxCrossEntropy)->Arg(200)->Arg(500);

static void TrainStep(benchmark::State& state) {
  const int64_t blocks = state.range(0);
  ModelConfig c;
  c.vocab_size = 500;
  c.embed_dim = 32;
  c.max_len = 20;
  c.num_blocks = blocks;
  Model m = init_model<float>(c, 7);
  for (auto& blk : m.blocks) blk.alpha[0] = 0.3f;
  Rng rng(4);
  IntTensor inputs = random_ids(128, 19, 500, rng);
  IntTensor targets = random_ids(128, 19, 500, rng);
  std::vector<bool> mask(static_cast<size_t>(128 * 19), true);

  for (auto _ : state) {
    ForwardCache cache;
    Tensor logits = forward(m, inputs, &cache);
    auto [loss, grad] = kernels::softmax_cross_entropy(logits, targets, mask);
    ModelGrads grads = backward(m, cache, grad);
    benchmark::DoNotOptimize(grads.embedding.ptr());
  }
}
BENCHMARK(TrainStep)->Arg(2)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
