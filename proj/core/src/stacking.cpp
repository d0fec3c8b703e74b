#include "stackseq/stacking.h"

#include <stdexcept>

namespace stackseq {

const char* stack_mode_name(StackMode mode) {
  switch (mode) {
    case StackMode::adjacent: return "adjacent";
    case StackMode::cross: return "cross";
    case StackMode::random_top: return "random-top";
    case StackMode::embed_only: return "embed-only";
  }
  return "?";
}

StackMode stack_mode_from_name(const std::string& name) {
  if (name == "adjacent") return StackMode::adjacent;
  if (name == "cross") return StackMode::cross;
  if (name == "random-top" || name == "random_top") return StackMode::random_top;
  if (name == "embed-only" || name == "embed_only") return StackMode::embed_only;
  throw std::invalid_argument("unknown stack mode: " + name);
}

namespace {

template <typename T>
ModelT<T> carry_over(const ModelT<T>& src, int64_t new_num_blocks) {
  ModelT<T> dst;
  dst.config = src.config;
  dst.config.num_blocks = new_num_blocks;
  dst.embedding = src.embedding;
  dst.softmax_w = src.softmax_w;
  dst.softmax_b = src.softmax_b;
  return dst;
}

}  // namespace

template <typename T>
ModelT<T> partial_stack(const ModelT<T>& src, StackMode mode, int64_t m, bool reassign_dilations) {
  const int64_t L = src.num_blocks();
  if (m < 1 || m > L)
    throw std::invalid_argument("partial_stack: added blocks must be in [1, " + std::to_string(L) +
                                "], got " + std::to_string(m));
  ModelT<T> dst = carry_over(src, L + m);
  dst.blocks.reserve(static_cast<size_t>(L + m));
  if (mode == StackMode::adjacent) {
    for (int64_t i = 0; i < L - m; ++i) dst.blocks.push_back(src.blocks[static_cast<size_t>(i)]);
    for (int64_t i = L - m; i < L; ++i) {
      dst.blocks.push_back(src.blocks[static_cast<size_t>(i)]);
      dst.blocks.push_back(src.blocks[static_cast<size_t>(i)]);
    }
  } else if (mode == StackMode::cross) {
    for (int64_t i = 0; i < L; ++i) dst.blocks.push_back(src.blocks[static_cast<size_t>(i)]);
    for (int64_t i = 0; i < m; ++i) dst.blocks.push_back(src.blocks[static_cast<size_t>(i)]);
  } else {
    throw std::invalid_argument("partial_stack: mode must be adjacent or cross");
  }
  if (reassign_dilations)
    for (int64_t i = 0; i < L + m; ++i)
      dst.blocks[static_cast<size_t>(i)].dilation = dst.config.dilation_for_block(i);
  return dst;
}

template <typename T>
ModelT<T> adjacent_stack(const ModelT<T>& src) {
  return partial_stack(src, StackMode::adjacent, src.num_blocks());
}

template <typename T>
ModelT<T> cross_stack(const ModelT<T>& src) {
  return partial_stack(src, StackMode::cross, src.num_blocks());
}

template <typename T>
ModelT<T> random_top_stack(const ModelT<T>& src, int64_t m, uint64_t seed) {
  if (m < 1) throw std::invalid_argument("random_top_stack: m must be >= 1");
  const int64_t L = src.num_blocks();
  ModelT<T> dst = carry_over(src, L + m);
  dst.blocks = src.blocks;
  Rng rng(derive_seed(seed, 0x737461636bULL));
  for (int64_t i = L; i < L + m; ++i)
    dst.blocks.push_back(init_block<T>(dst.config, dst.config.dilation_for_block(i), rng));
  return dst;
}

template <typename T>
ModelT<T> embed_only_stack(const ModelT<T>& src, int64_t new_num_blocks, uint64_t seed) {
  if (new_num_blocks < 1) throw std::invalid_argument("embed_only_stack: need >= 1 block");
  ModelT<T> dst = carry_over(src, new_num_blocks);
  Rng rng(derive_seed(seed, 0x656d626564ULL));
  for (int64_t i = 0; i < new_num_blocks; ++i)
    dst.blocks.push_back(init_block<T>(dst.config, dst.config.dilation_for_block(i), rng));
  return dst;
}

namespace {

void compare_block(const ResidualBlock& expect, const ResidualBlock& got, int64_t dst_index,
                   std::vector<std::string>& mismatches) {
  std::string p = "block" + std::to_string(dst_index) + ".";
  auto cmp = [&](const Tensor& a, const Tensor& b, const char* name) {
    if (!bit_equal(a, b)) mismatches.push_back(p + name);
  };
  cmp(expect.conv1_w, got.conv1_w, "conv1.w");
  cmp(expect.conv1_b, got.conv1_b, "conv1.b");
  cmp(expect.ln1_gamma, got.ln1_gamma, "ln1.gamma");
  cmp(expect.ln1_beta, got.ln1_beta, "ln1.beta");
  cmp(expect.conv2_w, got.conv2_w, "conv2.w");
  cmp(expect.conv2_b, got.conv2_b, "conv2.b");
  cmp(expect.ln2_gamma, got.ln2_gamma, "ln2.gamma");
  cmp(expect.ln2_beta, got.ln2_beta, "ln2.beta");
  cmp(expect.alpha, got.alpha, "alpha");
  if (expect.dilation != got.dilation) mismatches.push_back(p + "dilation");
}

}  // namespace

StackReport verify_stack(const Model& src, const Model& dst, const StackPlan& plan) {
  StackReport report;
  const int64_t L = src.num_blocks();
  const int64_t m = plan.added_blocks;

  if (dst.num_blocks() != L + m) {
    report.mismatches.push_back("num_blocks");
    report.ok = false;
    return report;
  }
  if (!bit_equal(src.embedding, dst.embedding)) report.mismatches.push_back("embedding");
  if (!bit_equal(src.softmax_w, dst.softmax_w)) report.mismatches.push_back("softmax.w");
  if (!bit_equal(src.softmax_b, dst.softmax_b)) report.mismatches.push_back("softmax.b");

  auto src_block = [&](int64_t i) -> const ResidualBlock& {
    return src.blocks[static_cast<size_t>(i)];
  };
  auto dst_block = [&](int64_t i) -> const ResidualBlock& {
    return dst.blocks[static_cast<size_t>(i)];
  };

  switch (plan.mode) {
    case StackMode::adjacent:
      for (int64_t i = 0; i < L - m; ++i)
        compare_block(src_block(i), dst_block(i), i, report.mismatches);
      for (int64_t j = 0; j < m; ++j) {
        int64_t base = L - m + 2 * j;
        compare_block(src_block(L - m + j), dst_block(base), base, report.mismatches);
        compare_block(src_block(L - m + j), dst_block(base + 1), base + 1, report.mismatches);
      }
      break;
    case StackMode::cross:
      for (int64_t i = 0; i < L; ++i)
        compare_block(src_block(i), dst_block(i), i, report.mismatches);
      for (int64_t j = 0; j < m; ++j)
        compare_block(src_block(j), dst_block(L + j), L + j, report.mismatches);
      break;
    case StackMode::random_top:
      for (int64_t i = 0; i < L; ++i)
        compare_block(src_block(i), dst_block(i), i, report.mismatches);
      for (int64_t j = L; j < L + m; ++j)
        if (dst_block(j).alpha[0] != 0.0f)
          report.mismatches.push_back("block" + std::to_string(j) + ".alpha");
      break;
    case StackMode::embed_only:
      for (int64_t j = 0; j < L + m; ++j)
        if (dst_block(j).alpha[0] != 0.0f)
          report.mismatches.push_back("block" + std::to_string(j) + ".alpha");
      break;
  }

  report.ok = report.mismatches.empty();
  return report;
}

std::string StackReport::str() const {
  if (ok) return "verify: pass";
  std::string s = "verify: FAIL";
  for (const std::string& m : mismatches) s += " " + m;
  return s;
}

#define STACKSEQ_INSTANTIATE_STACKING(T)                                              \
  template ModelT<T> partial_stack<T>(const ModelT<T>&, StackMode, int64_t, bool);    \
  template ModelT<T> adjacent_stack<T>(const ModelT<T>&);                       \
  template ModelT<T> cross_stack<T>(const ModelT<T>&);                          \
  template ModelT<T> random_top_stack<T>(const ModelT<T>&, int64_t, uint64_t);  \
  template ModelT<T> embed_only_stack<T>(const ModelT<T>&, int64_t, uint64_t);

STACKSEQ_INSTANTIATE_STACKING(float)
STACKSEQ_INSTANTIATE_STACKING(double)

#undef STACKSEQ_INSTANTIATE_STACKING

}  // namespace stackseq
