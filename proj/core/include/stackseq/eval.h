#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "stackseq/data.h"
#include "stackseq/model.h"
#include "stackseq/train_record.h"

namespace stackseq {

// Top-N ranking metrics over last-item ranks. Per rank r <= N the gains obey
// 1 >= 1/log2(r+1) >= 1/r, so hr >= ndcg >= mrr for any rank multiset.
struct Metrics {
  double mrr = 0.0;
  double hr = 0.0;
  double ndcg = 0.0;
  int64_t n = 0;       // cutoff
  int64_t count = 0;   // sequences evaluated

  std::string line() const;  // "n=<N> mrr=<f32> hr=<f32> ndcg=<f32> count=<u64>"
};

// 1-based rank of the target among candidate ids 1..vocab (padding id 0
// excluded, target itself excluded). Ties are pessimistic: candidates whose
// logit equals the target's count as ranked above it.
int64_t rank_from_logits(const float* logits, int64_t vocab, int32_t target);

// Last-item protocol: context is the sequence minus its final item (still
// left-padded), the final item is the target.
std::vector<int64_t> rank_last_item(const Model& model, const SessionDataset& data,
                                    int64_t batch_size = 256);

// Ranks transfer targets over the target vocabulary from the final position.
std::vector<int64_t> rank_transfer(const Model& model, const TransferDataset& data,
                                   int64_t batch_size = 256);

Metrics metrics_at(const std::vector<int64_t>& ranks, int64_t n);

// Masked mean next-item cross entropy over a dataset; bit-stable for a given
// dataset and batch size.
double eval_loss(const Model& model, const SessionDataset& data, int64_t batch_size = 256);

// Iterations (and wall clock) each history needs to first reach the target
// MRR@5. For stacked runs pass the post-final-stack stage history so the
// ratio matches fine-tune-only accounting.
struct SpeedupReport {
  bool stacked_reached = false;
  bool reference_reached = false;
  uint64_t stacked_iters = 0;
  uint64_t reference_iters = 0;
  uint64_t stacked_wall_ms = 0;
  uint64_t reference_wall_ms = 0;

  bool reachable() const { return stacked_reached && reference_reached; }
  // reference/stacked; a stacked run already at target reports infinity.
  double iter_ratio() const;
  double wall_ratio() const;
  std::string str() const;
};

SpeedupReport speedup(const std::vector<TrainRecord>& stacked,
                      const std::vector<TrainRecord>& reference, double target_mrr5);

}  // namespace stackseq
