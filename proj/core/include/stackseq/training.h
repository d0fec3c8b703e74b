#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "stackseq/data.h"
#include "stackseq/eval.h"
#include "stackseq/model.h"
#include "stackseq/stacking.h"
#include "stackseq/train_record.h"

namespace stackseq {

struct TrainConfig {
  float learning_rate = 0.001f;
  int64_t batch_size = 128;
  int64_t max_iterations = 20000;  // hard cap in converged mode
  int64_t eval_every = 100;
  int64_t patience = 5;  // consecutive non-improving evals = converged
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float adam_eps = 1e-8f;
  uint64_t seed = 42;
  void validate() const;
};

// Bias-corrected Adam. Moment tensors mirror the parameter structure.
struct AdamState {
  ModelGrads m;
  ModelGrads v;
  int64_t step = 0;
};

AdamState init_adam(const Model& model);

// Applies one update in place; throws if any gradient is NaN.
void adam_step(Model& params, const ModelGrads& grads, AdamState& state, const TrainConfig& config);

struct StopRule {
  enum class Kind { converged, budget };
  Kind kind = Kind::converged;
  uint64_t iterations = 0;  // budget mode only

  static StopRule converged() { return {Kind::converged, 0}; }
  static StopRule budget(uint64_t q) { return {Kind::budget, q}; }
};

struct TrainResult {
  Model params;  // best-MRR@5 checkpoint (converged) or final step (budget)
  std::vector<TrainRecord> history;
  uint64_t iterations = 0;
  uint64_t wall_ms = 0;
  float best_mrr5 = 0.0f;
  uint64_t best_iteration = 0;
};

// Minibatch training with per-epoch seeded reshuffles. Supervision covers
// every position whose next item is non-padding; held-out metrics use the
// last-item protocol at cutoff 5 every eval_every iterations (plus
// iteration 0). `log` (optional) receives one TrainRecord line per eval.
TrainResult train(const Model& start, const SessionDataset& train_data,
                  const SessionDataset& eval_data, const TrainConfig& config, const StopRule& stop,
                  std::ostream* log = nullptr);

struct Schedule {
  enum class Kind { plain, cl, ts, tf };
  Kind kind = Kind::plain;
  int64_t stack_times = 0;  // k; doubling schedules end at 2^k * L blocks
  StackMode mode = StackMode::adjacent;
  std::vector<uint64_t> budgets;       // plain: [Q]; ts: Q_0..Q_k
  bool final_until_converged = false;  // ts: train the last stage to convergence
  std::optional<float> stacked_learning_rate;  // lr override after any stack
};

Schedule::Kind schedule_kind_from_name(const std::string& name);
const char* schedule_kind_name(Schedule::Kind kind);

struct StageResult {
  int64_t depth = 0;
  uint64_t iterations = 0;
  uint64_t wall_ms = 0;
  std::vector<TrainRecord> history;  // stage-local iteration numbering
};

struct ScheduleResult {
  Model final;
  std::vector<StageResult> stages;
  uint64_t total_wall_ms() const;
};

// Continual learning: train an L-block model to convergence on the first
// snapshot, then stack (doubling) and re-train to convergence as each larger
// snapshot arrives. Snapshots must be nested (each contains its
// predecessor); Adam moments reset at every stacking step.
ScheduleResult run_cl(const ModelConfig& config, const Schedule& schedule,
                      const std::vector<SessionDataset>& snapshots,
                      const SessionDataset& eval_data, const TrainConfig& train_config,
                      std::ostream* log = nullptr);

// Train-from-scratch acceleration: the same full dataset at every stage,
// fixed iteration budgets Q_0..Q_k; the final stage optionally runs to
// convergence instead of a budget.
ScheduleResult run_ts(const ModelConfig& config, const Schedule& schedule,
                      const SessionDataset& train_data, const SessionDataset& eval_data,
                      const TrainConfig& train_config, std::ostream* log = nullptr);

// Default TS budgets: Q_0 = ceil(total/4) (inside the 1/8..1/3 band of
// total), remainder split evenly over the k stacked stages.
std::vector<uint64_t> default_ts_budgets(uint64_t total_budget, int64_t stack_times);

struct TFResult {
  Model params;
  std::vector<TrainRecord> history;
  uint64_t iterations = 0;
  uint64_t wall_ms = 0;
};

// Transfer fine-tuning: a fresh softmax head sized for the target
// vocabulary, everything else warm-started from the source model, all
// parameters trained on (source context -> target item) pairs with loss on
// the final position only.
TFResult run_tf(const Model& source, const TransferDataset& train_data,
                const TransferDataset& eval_data, int64_t target_vocab,
                const TrainConfig& config, const StopRule& stop, uint64_t head_seed = 0,
                std::ostream* log = nullptr);

}  // namespace stackseq
