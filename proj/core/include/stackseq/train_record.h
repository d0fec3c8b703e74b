#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace stackseq {

// One held-out evaluation point. Emitted as a line of
// `iter=<u64> loss=<f32> mrr5=<f32> hr5=<f32> ndcg5=<f32> wall_ms=<u64>`.
struct TrainRecord {
  uint64_t iteration = 0;
  float train_loss = 0.0f;
  float mrr5 = 0.0f;
  float hr5 = 0.0f;
  float ndcg5 = 0.0f;
  uint64_t wall_ms = 0;
};

std::string train_record_line(const TrainRecord& r);

// Line stream with everything except the (non-reproducible) wall clock.
bool records_equal_ignoring_wall(const std::vector<TrainRecord>& a,
                                 const std::vector<TrainRecord>& b);

}  // namespace stackseq
