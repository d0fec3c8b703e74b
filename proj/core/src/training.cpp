#include "stackseq/training.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>
#include <unordered_set>

namespace stackseq {

void TrainConfig::validate() const {
  if (learning_rate <= 0) throw std::invalid_argument("train config: learning_rate must be > 0");
  if (batch_size < 1) throw std::invalid_argument("train config: batch_size must be >= 1");
  if (max_iterations < 0) throw std::invalid_argument("train config: max_iterations must be >= 0");
  if (eval_every < 1) throw std::invalid_argument("train config: eval_every must be >= 1");
  if (patience < 1) throw std::invalid_argument("train config: patience must be >= 1");
  if (!(beta1 > 0 && beta1 < 1) || !(beta2 > 0 && beta2 < 1))
    throw std::invalid_argument("train config: betas must be in (0, 1)");
  if (adam_eps <= 0) throw std::invalid_argument("train config: adam_eps must be > 0");
}

std::string train_record_line(const TrainRecord& r) {
  char buf[192];
  std::snprintf(buf, sizeof(buf), "iter=%llu loss=%.6f mrr5=%.6f hr5=%.6f ndcg5=%.6f wall_ms=%llu",
                static_cast<unsigned long long>(r.iteration), static_cast<double>(r.train_loss),
                static_cast<double>(r.mrr5), static_cast<double>(r.hr5),
                static_cast<double>(r.ndcg5), static_cast<unsigned long long>(r.wall_ms));
  return buf;
}

bool records_equal_ignoring_wall(const std::vector<TrainRecord>& a,
                                 const std::vector<TrainRecord>& b) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i) {
    if (a[i].iteration != b[i].iteration || a[i].train_loss != b[i].train_loss ||
        a[i].mrr5 != b[i].mrr5 || a[i].hr5 != b[i].hr5 || a[i].ndcg5 != b[i].ndcg5)
      return false;
  }
  return true;
}

AdamState init_adam(const Model& model) {
  AdamState s;
  s.m = zeros_like(model);
  s.v = zeros_like(model);
  s.step = 0;
  return s;
}

void adam_step(Model& params, const ModelGrads& grads, AdamState& state,
               const TrainConfig& config) {
  state.step += 1;
  const float b1 = config.beta1, b2 = config.beta2;
  const float bc1 = 1.0f - std::pow(b1, static_cast<float>(state.step));
  const float bc2 = 1.0f - std::pow(b2, static_cast<float>(state.step));
  const float lr = config.learning_rate;
  const float eps = config.adam_eps;

  std::vector<Tensor*> ps, gs, ms, vs;
  auto collect = [](Model& m, std::vector<Tensor*>& out) {
    for_each_param(m, std::function<void(const std::string&, Tensor&)>(
                          [&out](const std::string&, Tensor& t) { out.push_back(&t); }));
  };
  collect(params, ps);
  collect(const_cast<ModelGrads&>(grads), gs);
  collect(state.m, ms);
  collect(state.v, vs);
  if (ps.size() != gs.size() || ps.size() != ms.size() || ps.size() != vs.size())
    throw std::invalid_argument("adam_step: gradient/state structure mismatch");

  for (size_t ti = 0; ti < ps.size(); ++ti) {
    Tensor& p = *ps[ti];
    const Tensor& g = *gs[ti];
    Tensor& m = *ms[ti];
    Tensor& v = *vs[ti];
    if (!p.same_shape(g) || !p.same_shape(m) || !p.same_shape(v))
      throw std::invalid_argument("adam_step: tensor shape mismatch");
    for (int64_t i = 0; i < p.numel(); ++i) {
      float gi = g[i];
      if (std::isnan(gi))
        throw std::runtime_error("adam_step: NaN gradient at step " + std::to_string(state.step));
      m[i] = b1 * m[i] + (1.0f - b1) * gi;
      v[i] = b2 * v[i] + (1.0f - b2) * gi * gi;
      float mhat = m[i] / bc1;
      float vhat = v[i] / bc2;
      p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

namespace {

using Clock = std::chrono::steady_clock;

uint64_t ms_since(Clock::time_point start) {
  return static_cast<uint64_t>(
      std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start).count());
}

struct Batch {
  IntTensor inputs;
  IntTensor targets;
  std::vector<bool> mask;
};

// Next-item supervision: inputs are positions 0..t-2, targets positions
// 1..t-1, masked wherever the target is padding.
Batch next_item_batch(const SessionDataset& data, const std::vector<int64_t>& order, int64_t start,
                      int64_t count) {
  const int64_t t = data.max_len;
  Batch b;
  b.inputs = IntTensor::zeros({count, t - 1});
  b.targets = IntTensor::zeros({count, t - 1});
  b.mask.assign(static_cast<size_t>(count * (t - 1)), false);
  for (int64_t r = 0; r < count; ++r) {
    const auto& seq = data.sequences[static_cast<size_t>(order[static_cast<size_t>(start + r)])];
    for (int64_t j = 0; j < t - 1; ++j) {
      b.inputs.at(r, j) = seq[static_cast<size_t>(j)];
      b.targets.at(r, j) = seq[static_cast<size_t>(j + 1)];
      if (seq[static_cast<size_t>(j + 1)] != 0) b.mask[static_cast<size_t>(r * (t - 1) + j)] = true;
    }
  }
  return b;
}

// Final-position supervision for transfer pairs.
Batch transfer_batch(const TransferDataset& data, const std::vector<int64_t>& order, int64_t start,
                     int64_t count) {
  const int64_t t = data.contexts.max_len;
  Batch b;
  b.inputs = IntTensor::zeros({count, t});
  b.targets = IntTensor::zeros({count, t});
  b.mask.assign(static_cast<size_t>(count * t), false);
  for (int64_t r = 0; r < count; ++r) {
    auto idx = static_cast<size_t>(order[static_cast<size_t>(start + r)]);
    const auto& seq = data.contexts.sequences[idx];
    std::copy(seq.begin(), seq.end(), b.inputs.data.begin() + r * t);
    b.targets.at(r, t - 1) = data.targets[idx];
    b.mask[static_cast<size_t>(r * t + (t - 1))] = true;
  }
  return b;
}

template <typename MakeBatch, typename Evaluate>
TrainResult train_loop(const Model& start, int64_t num_examples, MakeBatch&& make_batch,
                       Evaluate&& evaluate, const TrainConfig& config, const StopRule& stop,
                       std::ostream* log) {
  config.validate();
  if (num_examples == 0) throw std::invalid_argument("train: empty dataset");

  TrainResult result;
  result.params = start;
  AdamState adam = init_adam(result.params);
  Rng shuffle_rng(derive_seed(config.seed, 0x7368756646ULL));

  std::vector<int64_t> order(static_cast<size_t>(num_examples));
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int64_t>(i);
  shuffle_rng.shuffle(order);
  int64_t cursor = 0;

  const Clock::time_point t0 = Clock::now();
  Model best = result.params;
  float best_mrr = -1.0f;
  uint64_t best_iter = 0;
  int64_t stale_evals = 0;
  double loss_accum = 0.0;
  int64_t loss_batches = 0;
  bool stop_now = false;

  auto record_eval = [&](uint64_t iteration, float train_loss) {
    Metrics m = evaluate(result.params);
    TrainRecord rec;
    rec.iteration = iteration;
    rec.train_loss = train_loss;
    rec.mrr5 = static_cast<float>(m.mrr);
    rec.hr5 = static_cast<float>(m.hr);
    rec.ndcg5 = static_cast<float>(m.ndcg);
    rec.wall_ms = ms_since(t0);
    result.history.push_back(rec);
    if (log) (*log) << train_record_line(rec) << "\n";
    if (rec.mrr5 > best_mrr) {
      best_mrr = rec.mrr5;
      best_iter = iteration;
      best = result.params;
      stale_evals = 0;
    } else {
      stale_evals += 1;
    }
  };

  {
    // Iteration-0 probe: forward loss on the upcoming batch, no update.
    int64_t b = std::min<int64_t>(config.batch_size, num_examples);
    Batch batch = make_batch(order, 0, b);
    Tensor logits = forward(result.params, batch.inputs);
    record_eval(0, kernels::softmax_cross_entropy(logits, batch.targets, batch.mask).first);
  }

  uint64_t iteration = 0;
  while (!stop_now) {
    if (stop.kind == StopRule::Kind::budget && iteration >= stop.iterations) break;
    if (stop.kind == StopRule::Kind::converged &&
        iteration >= static_cast<uint64_t>(config.max_iterations))
      break;

    if (cursor >= num_examples) {
      shuffle_rng.shuffle(order);
      cursor = 0;
    }
    int64_t b = std::min<int64_t>(config.batch_size, num_examples - cursor);
    Batch batch = make_batch(order, cursor, b);
    cursor += b;
    iteration += 1;

    ForwardCache cache;
    Tensor logits = forward(result.params, batch.inputs, &cache);
    auto [loss, grad_logits] = kernels::softmax_cross_entropy(logits, batch.targets, batch.mask);
    ModelGrads grads = backward(result.params, cache, grad_logits);
    adam_step(result.params, grads, adam, config);
    loss_accum += static_cast<double>(loss);
    loss_batches += 1;

    bool budget_done = stop.kind == StopRule::Kind::budget && iteration >= stop.iterations;
    if (iteration % static_cast<uint64_t>(config.eval_every) == 0 || budget_done) {
      float mean_loss = static_cast<float>(loss_accum / static_cast<double>(loss_batches));
      loss_accum = 0.0;
      loss_batches = 0;
      record_eval(iteration, mean_loss);
      if (stop.kind == StopRule::Kind::converged && stale_evals >= config.patience) stop_now = true;
      if (budget_done) stop_now = true;
    }
  }

  result.iterations = iteration;
  result.wall_ms = ms_since(t0);
  result.best_mrr5 = best_mrr;
  result.best_iteration = best_iter;
  if (stop.kind == StopRule::Kind::converged) result.params = std::move(best);
  return result;
}

}  // namespace

TrainResult train(const Model& start, const SessionDataset& train_data,
                  const SessionDataset& eval_data, const TrainConfig& config, const StopRule& stop,
                  std::ostream* log) {
  if (train_data.max_len != start.config.max_len)
    throw std::invalid_argument("train: dataset max_len does not match the model");
  if (train_data.vocab_size > start.config.vocab_size)
    throw std::invalid_argument("train: dataset vocabulary exceeds the model");
  return train_loop(
      start, train_data.size(),
      [&](const std::vector<int64_t>& order, int64_t s, int64_t c) {
        return next_item_batch(train_data, order, s, c);
      },
      [&](const Model& m) { return metrics_at(rank_last_item(m, eval_data), 5); }, config, stop,
      log);
}

Schedule::Kind schedule_kind_from_name(const std::string& name) {
  if (name == "plain") return Schedule::Kind::plain;
  if (name == "cl") return Schedule::Kind::cl;
  if (name == "ts") return Schedule::Kind::ts;
  if (name == "tf") return Schedule::Kind::tf;
  throw std::invalid_argument("unknown schedule kind: " + name);
}

const char* schedule_kind_name(Schedule::Kind kind) {
  switch (kind) {
    case Schedule::Kind::plain: return "plain";
    case Schedule::Kind::cl: return "cl";
    case Schedule::Kind::ts: return "ts";
    case Schedule::Kind::tf: return "tf";
  }
  return "?";
}

uint64_t ScheduleResult::total_wall_ms() const {
  uint64_t total = 0;
  for (const StageResult& s : stages) total += s.wall_ms;
  return total;
}

namespace {

struct SeqHash {
  size_t operator()(const std::vector<int32_t>& v) const {
    size_t h = 1469598103934665603ULL;
    for (int32_t x : v) {
      h ^= static_cast<size_t>(static_cast<uint32_t>(x));
      h *= 1099511628211ULL;
    }
    return h;
  }
};

void check_snapshot_containment(const std::vector<SessionDataset>& snapshots) {
  for (size_t i = 0; i + 1 < snapshots.size(); ++i) {
    std::unordered_multiset<std::vector<int32_t>, SeqHash> next(
        snapshots[i + 1].sequences.begin(), snapshots[i + 1].sequences.end());
    for (const auto& seq : snapshots[i].sequences) {
      auto it = next.find(seq);
      if (it == next.end())
        throw std::invalid_argument("run_cl: snapshot " + std::to_string(i) +
                                    " is not contained in snapshot " + std::to_string(i + 1));
      next.erase(it);
    }
  }
}

Model grow(const Model& model, StackMode mode, int64_t stage, uint64_t seed) {
  const int64_t L = model.num_blocks();
  switch (mode) {
    case StackMode::adjacent:
    case StackMode::cross:
      return partial_stack(model, mode, L);
    case StackMode::random_top:
      return random_top_stack(model, L, derive_seed(seed, 0x67726f77ULL + static_cast<uint64_t>(stage)));
    case StackMode::embed_only:
      return embed_only_stack(model, 2 * L, derive_seed(seed, 0x67726f77ULL + static_cast<uint64_t>(stage)));
  }
  throw std::invalid_argument("grow: bad mode");
}

StageResult to_stage(const TrainResult& r, int64_t depth) {
  StageResult s;
  s.depth = depth;
  s.iterations = r.iterations;
  s.wall_ms = r.wall_ms;
  s.history = r.history;
  return s;
}

}  // namespace

ScheduleResult run_cl(const ModelConfig& config, const Schedule& schedule,
                      const std::vector<SessionDataset>& snapshots,
                      const SessionDataset& eval_data, const TrainConfig& train_config,
                      std::ostream* log) {
  if (schedule.stack_times + 1 != static_cast<int64_t>(snapshots.size()))
    throw std::invalid_argument("run_cl: need one data snapshot per stage (k+1 total)");
  check_snapshot_containment(snapshots);

  ScheduleResult result;
  Model model = init_model<float>(config, train_config.seed);
  for (int64_t stage = 0; stage <= schedule.stack_times; ++stage) {
    if (stage > 0) model = grow(model, schedule.mode, stage, train_config.seed);
    TrainConfig stage_config = train_config;
    stage_config.seed = derive_seed(train_config.seed, 0x636c0000ULL + static_cast<uint64_t>(stage));
    if (stage > 0 && schedule.stacked_learning_rate)
      stage_config.learning_rate = *schedule.stacked_learning_rate;
    if (log) (*log) << "# stage " << stage << " depth " << model.num_blocks() << "\n";
    TrainResult r = train(model, snapshots[static_cast<size_t>(stage)], eval_data, stage_config,
                          StopRule::converged(), log);
    model = r.params;
    result.stages.push_back(to_stage(r, model.num_blocks()));
  }
  result.final = std::move(model);
  return result;
}

ScheduleResult run_ts(const ModelConfig& config, const Schedule& schedule,
                      const SessionDataset& train_data, const SessionDataset& eval_data,
                      const TrainConfig& train_config, std::ostream* log) {
  std::vector<uint64_t> budgets = schedule.budgets;
  if (budgets.empty() && !schedule.final_until_converged)
    budgets = default_ts_budgets(static_cast<uint64_t>(train_config.max_iterations),
                                 schedule.stack_times);
  // With an until-converged final stage only Q_0..Q_{k-1} are budgeted.
  const int64_t needed = schedule.final_until_converged ? schedule.stack_times
                                                        : schedule.stack_times + 1;
  if (static_cast<int64_t>(budgets.size()) != needed)
    throw std::invalid_argument("run_ts: need " + std::to_string(needed) +
                                " stage budgets, got " + std::to_string(budgets.size()));

  ScheduleResult result;
  Model model = init_model<float>(config, train_config.seed);
  for (int64_t stage = 0; stage <= schedule.stack_times; ++stage) {
    if (stage > 0) model = grow(model, schedule.mode, stage, train_config.seed);
    TrainConfig stage_config = train_config;
    stage_config.seed = derive_seed(train_config.seed, 0x74730000ULL + static_cast<uint64_t>(stage));
    if (stage > 0 && schedule.stacked_learning_rate)
      stage_config.learning_rate = *schedule.stacked_learning_rate;
    bool last = stage == schedule.stack_times;
    StopRule stop = (last && schedule.final_until_converged)
                        ? StopRule::converged()
                        : StopRule::budget(budgets[static_cast<size_t>(stage)]);
    if (log) (*log) << "# stage " << stage << " depth " << model.num_blocks() << "\n";
    TrainResult r = train(model, train_data, eval_data, stage_config, stop, log);
    model = r.params;
    result.stages.push_back(to_stage(r, model.num_blocks()));
  }
  result.final = std::move(model);
  return result;
}

std::vector<uint64_t> default_ts_budgets(uint64_t total_budget, int64_t stack_times) {
  std::vector<uint64_t> budgets;
  uint64_t q0 = (total_budget + 3) / 4;  // ceil(total/4), inside the 1/8..1/3 band
  budgets.push_back(q0);
  if (stack_times <= 0) return budgets;
  uint64_t rest = total_budget > q0 ? total_budget - q0 : 0;
  uint64_t per = rest / static_cast<uint64_t>(stack_times);
  for (int64_t i = 1; i <= stack_times; ++i)
    budgets.push_back(i == stack_times ? rest - per * static_cast<uint64_t>(stack_times - 1) : per);
  return budgets;
}

TFResult run_tf(const Model& source, const TransferDataset& train_data,
                const TransferDataset& eval_data, int64_t target_vocab,
                const TrainConfig& config, const StopRule& stop, uint64_t head_seed,
                std::ostream* log) {
  if (target_vocab < 1) throw std::invalid_argument("run_tf: target vocabulary must be >= 1");
  if (train_data.contexts.max_len != source.config.max_len)
    throw std::invalid_argument("run_tf: context length does not match the source model");

  // Warm start everything but the head; the head is freshly sized for the
  // target item universe.
  Model model = source;
  model.config.output_vocab = target_vocab;
  Rng rng(derive_seed(head_seed != 0 ? head_seed : config.seed, 0x74666865ULL));
  model.softmax_w = Tensor::zeros({model.config.embed_dim, target_vocab + 1});
  for (int64_t i = 0; i < model.softmax_w.numel(); ++i)
    model.softmax_w[i] = static_cast<float>(rng.normal() * 0.01);
  model.softmax_b = Tensor::zeros({target_vocab + 1});

  TrainResult r = train_loop(
      model, train_data.size(),
      [&](const std::vector<int64_t>& order, int64_t s, int64_t c) {
        return transfer_batch(train_data, order, s, c);
      },
      [&](const Model& m) { return metrics_at(rank_transfer(m, eval_data), 5); }, config, stop,
      log);

  TFResult out;
  out.params = std::move(r.params);
  out.history = std::move(r.history);
  out.iterations = r.iterations;
  out.wall_ms = r.wall_ms;
  return out;
}

}  // namespace stackseq
