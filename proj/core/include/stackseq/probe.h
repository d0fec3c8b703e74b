#pragma once

#include <cstdint>
#include <string>

#include "stackseq/data.h"
#include "stackseq/model.h"

namespace stackseq {

// Mean cosine similarity between residual-block output feature maps over a
// sample of sequences: symmetric, diagonal 1, values in [-1, 1].
struct SimilarityMatrix {
  int64_t num_blocks = 0;
  TensorD values;  // [L, L]
  int64_t num_sequences = 0;

  // Plain text: the block count on the first line, then L rows of L
  // fixed-precision decimals.
  std::string str() const;
};

// For each sampled sequence, runs forward with hidden retention, flattens
// each block output over non-padding positions and channels, and averages
// pairwise cosine similarities across sequences. Sequences are drawn
// seeded and without replacement; a dataset smaller than num_sequences is
// used whole with a warning.
SimilarityMatrix block_similarity(const Model& model, const SessionDataset& data,
                                  int64_t num_sequences = 100, uint64_t seed = 0);

}  // namespace stackseq
