#pragma once

#include <string>
#include <vector>

#include "stackseq/model.h"

namespace stackseq {

enum class StackMode { adjacent, cross, random_top, embed_only };

const char* stack_mode_name(StackMode mode);
StackMode stack_mode_from_name(const std::string& name);

// One growth step: resulting depth is L + added_blocks. Embedding and
// softmax parameters are carried over verbatim in every mode.
struct StackPlan {
  StackMode mode = StackMode::adjacent;
  int64_t added_blocks = 0;
};

// Doubling transforms. Block copies are independent deep copies, alpha and
// dilation included; nothing stays tied afterwards.
// adjacent: [B1,B1,B2,B2,...,BL,BL]   cross: [B1..BL,B1..BL]
template <typename T>
ModelT<T> adjacent_stack(const ModelT<T>& src);

template <typename T>
ModelT<T> cross_stack(const ModelT<T>& src);

// Grows by m <= L blocks. adjacent duplicates the top m blocks in place;
// cross appends copies of blocks 1..m on top. Dilation travels with its
// block by default; reassign_dilations=true instead rewrites every block's
// dilation to the canonical cyclic pattern of the config.
template <typename T>
ModelT<T> partial_stack(const ModelT<T>& src, StackMode mode, int64_t m,
                        bool reassign_dilations = false);

// Baseline transforms: random_top keeps the trained stack and adds m fresh
// blocks (alpha = 0, so the function is preserved); embed_only keeps just
// the embedding and softmax and re-initializes all new_num_blocks blocks.
template <typename T>
ModelT<T> random_top_stack(const ModelT<T>& src, int64_t m, uint64_t seed);

template <typename T>
ModelT<T> embed_only_stack(const ModelT<T>& src, int64_t new_num_blocks, uint64_t seed);

struct StackReport {
  bool ok = true;
  std::vector<std::string> mismatches;  // tensor names, dst indexing

  std::string str() const;
};

// Bit-exact verification that dst matches the copy pattern the plan claims.
StackReport verify_stack(const Model& src, const Model& dst, const StackPlan& plan);

}  // namespace stackseq
