#include "stackseq/eval.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

namespace stackseq {

std::string Metrics::line() const {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "n=%lld mrr=%.6f hr=%.6f ndcg=%.6f count=%llu",
                static_cast<long long>(n), mrr, hr, ndcg,
                static_cast<unsigned long long>(count));
  return buf;
}

int64_t rank_from_logits(const float* logits, int64_t vocab, int32_t target) {
  const float target_logit = logits[target];
  int64_t above = 0;
  for (int64_t i = 1; i <= vocab; ++i) {
    if (i == target) continue;
    if (logits[i] >= target_logit) ++above;
  }
  return 1 + above;
}

namespace {

// Runs contexts through the model in batches and ranks `target_of(seq)` at
// the final position.
template <typename TargetFn>
std::vector<int64_t> rank_batched(const Model& model,
                                  const std::vector<std::vector<int32_t>>& contexts,
                                  int64_t context_len, int64_t vocab, TargetFn&& target_of,
                                  int64_t batch_size) {
  std::vector<int64_t> ranks;
  ranks.reserve(contexts.size());
  const int64_t n = static_cast<int64_t>(contexts.size());
  for (int64_t start = 0; start < n; start += batch_size) {
    const int64_t b = std::min(batch_size, n - start);
    IntTensor ids = IntTensor::zeros({b, context_len});
    for (int64_t r = 0; r < b; ++r)
      std::copy(contexts[static_cast<size_t>(start + r)].begin(),
                contexts[static_cast<size_t>(start + r)].end(),
                ids.data.begin() + r * context_len);
    Tensor logits = forward(model, ids);
    const int64_t classes = logits.dim(2);
    for (int64_t r = 0; r < b; ++r) {
      const float* row = logits.ptr() + (r * context_len + (context_len - 1)) * classes;
      ranks.push_back(rank_from_logits(row, vocab, target_of(start + r)));
    }
  }
  return ranks;
}

}  // namespace

std::vector<int64_t> rank_last_item(const Model& model, const SessionDataset& data,
                                    int64_t batch_size) {
  const int64_t t = data.max_len;
  if (data.vocab_size > model.config.head_vocab())
    throw std::invalid_argument("rank_last_item: dataset vocabulary exceeds the model head");
  std::vector<std::vector<int32_t>> contexts;
  std::vector<int32_t> targets;
  contexts.reserve(data.sequences.size());
  targets.reserve(data.sequences.size());
  for (const auto& seq : data.sequences) {
    contexts.emplace_back(seq.begin(), seq.end() - 1);  // drop the last item
    targets.push_back(seq.back());
  }
  return rank_batched(model, contexts, t - 1, model.config.head_vocab(),
                      [&](int64_t i) { return targets[static_cast<size_t>(i)]; }, batch_size);
}

std::vector<int64_t> rank_transfer(const Model& model, const TransferDataset& data,
                                   int64_t batch_size) {
  if (data.target_vocab > model.config.head_vocab())
    throw std::invalid_argument("rank_transfer: target vocabulary exceeds the model head");
  return rank_batched(model, data.contexts.sequences, data.contexts.max_len,
                      model.config.head_vocab(),
                      [&](int64_t i) { return data.targets[static_cast<size_t>(i)]; }, batch_size);
}

Metrics metrics_at(const std::vector<int64_t>& ranks, int64_t n) {
  if (ranks.empty()) throw std::invalid_argument("metrics_at: no ranks");
  if (n < 1) throw std::invalid_argument("metrics_at: cutoff must be >= 1");
  Metrics m;
  m.n = n;
  m.count = static_cast<int64_t>(ranks.size());
  double mrr = 0, hr = 0, ndcg = 0;
  for (int64_t r : ranks) {
    if (r < 1) throw std::invalid_argument("metrics_at: rank < 1");
    if (r <= n) {
      mrr += 1.0 / static_cast<double>(r);
      hr += 1.0;
      ndcg += 1.0 / std::log2(static_cast<double>(r) + 1.0);
    }
  }
  m.mrr = mrr / static_cast<double>(m.count);
  m.hr = hr / static_cast<double>(m.count);
  m.ndcg = ndcg / static_cast<double>(m.count);
  return m;
}

double eval_loss(const Model& model, const SessionDataset& data, int64_t batch_size) {
  const int64_t t = data.max_len;
  const int64_t n = data.size();
  if (n == 0) throw std::invalid_argument("eval_loss: empty dataset");
  double total = 0.0;
  int64_t count = 0;
  for (int64_t start = 0; start < n; start += batch_size) {
    const int64_t b = std::min(batch_size, n - start);
    IntTensor inputs = IntTensor::zeros({b, t - 1});
    IntTensor targets = IntTensor::zeros({b, t - 1});
    std::vector<bool> mask(static_cast<size_t>(b * (t - 1)), false);
    int64_t batch_masked = 0;
    for (int64_t r = 0; r < b; ++r) {
      const auto& seq = data.sequences[static_cast<size_t>(start + r)];
      for (int64_t j = 0; j < t - 1; ++j) {
        inputs.at(r, j) = seq[static_cast<size_t>(j)];
        targets.at(r, j) = seq[static_cast<size_t>(j + 1)];
        if (seq[static_cast<size_t>(j + 1)] != 0) {
          mask[static_cast<size_t>(r * (t - 1) + j)] = true;
          ++batch_masked;
        }
      }
    }
    Tensor logits = forward(model, inputs);
    auto [loss, grad] = kernels::softmax_cross_entropy(logits, targets, mask);
    total += static_cast<double>(loss) * static_cast<double>(batch_masked);
    count += batch_masked;
  }
  return total / static_cast<double>(count);
}

double SpeedupReport::iter_ratio() const {
  if (!reachable()) return std::numeric_limits<double>::quiet_NaN();
  if (stacked_iters == 0) return std::numeric_limits<double>::infinity();
  return static_cast<double>(reference_iters) / static_cast<double>(stacked_iters);
}

double SpeedupReport::wall_ratio() const {
  if (!reachable()) return std::numeric_limits<double>::quiet_NaN();
  if (stacked_wall_ms == 0) return std::numeric_limits<double>::infinity();
  return static_cast<double>(reference_wall_ms) / static_cast<double>(stacked_wall_ms);
}

std::string SpeedupReport::str() const {
  if (!reachable()) {
    std::string s = "speedup: unreachable (";
    s += stacked_reached ? "reference" : "stacked";
    if (!stacked_reached && !reference_reached) s = "speedup: unreachable (both";
    return s + " never hit the target)";
  }
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "speedup: iters %.2fx (%llu vs %llu), wall %.2fx (%llu ms vs %llu ms)",
                iter_ratio(), static_cast<unsigned long long>(reference_iters),
                static_cast<unsigned long long>(stacked_iters), wall_ratio(),
                static_cast<unsigned long long>(reference_wall_ms),
                static_cast<unsigned long long>(stacked_wall_ms));
  return buf;
}

SpeedupReport speedup(const std::vector<TrainRecord>& stacked,
                      const std::vector<TrainRecord>& reference, double target_mrr5) {
  SpeedupReport rep;
  auto first_reach = [&](const std::vector<TrainRecord>& hist, uint64_t& iters, uint64_t& wall) {
    for (const TrainRecord& r : hist) {
      if (static_cast<double>(r.mrr5) >= target_mrr5) {
        iters = r.iteration;
        wall = r.wall_ms;
        return true;
      }
    }
    return false;
  };
  rep.stacked_reached = first_reach(stacked, rep.stacked_iters, rep.stacked_wall_ms);
  rep.reference_reached = first_reach(reference, rep.reference_iters, rep.reference_wall_ms);
  return rep;
}

}  // namespace stackseq
