#include "stackseq/data.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "stackseq/rng.h"

namespace stackseq {

void SessionDataset::validate() const {
  for (size_t s = 0; s < sequences.size(); ++s) {
    const auto& seq = sequences[s];
    if (static_cast<int64_t>(seq.size()) != max_len)
      throw std::invalid_argument("dataset: sequence " + std::to_string(s) + " length mismatch");
    size_t first_real = 0;
    while (first_real < seq.size() && seq[first_real] == 0) ++first_real;
    for (size_t i = first_real; i < seq.size(); ++i) {
      if (seq[i] <= 0 || seq[i] > vocab_size)
        throw std::invalid_argument("dataset: sequence " + std::to_string(s) +
                                    " has id outside [1, V] after the padding prefix");
    }
    if (seq.size() - first_real < 2)
      throw std::invalid_argument("dataset: sequence " + std::to_string(s) +
                                  " has fewer than 2 items");
  }
}

namespace {

std::vector<int32_t> pad_left(const std::vector<int32_t>& items, int64_t t) {
  std::vector<int32_t> out(static_cast<size_t>(t), 0);
  std::copy(items.begin(), items.end(), out.end() - static_cast<int64_t>(items.size()));
  return out;
}

[[noreturn]] void reject(size_t line_no, const std::string& why) {
  throw std::runtime_error("session file line " + std::to_string(line_no) + ": " + why);
}

}  // namespace

SessionDataset parse_sessions(std::istream& in, int64_t t, int64_t overlap) {
  if (t < 2) throw std::invalid_argument("load_sessions: t must be >= 2");
  if (overlap < 0 || overlap >= t) throw std::invalid_argument("load_sessions: overlap must be in [0, t)");

  SessionDataset ds;
  ds.max_len = t;
  std::string line;
  size_t line_no = 0;
  int64_t max_id = 0;
  const int64_t stride = t - overlap;
  while (std::getline(in, line)) {
    ++line_no;
    std::vector<int32_t> items;
    const char* p = line.data();
    const char* end = p + line.size();
    while (p < end) {
      while (p < end && (*p == ' ' || *p == '\t' || *p == '\r')) ++p;
      if (p >= end) break;
      int32_t id = 0;
      auto [next, ec] = std::from_chars(p, end, id);
      if (ec != std::errc() || (next < end && *next != ' ' && *next != '\t' && *next != '\r'))
        reject(line_no, "non-integer token");
      if (id <= 0) reject(line_no, "item id must be >= 1, got " + std::to_string(id));
      items.push_back(id);
      max_id = std::max<int64_t>(max_id, id);
      p = next;
    }
    if (items.empty()) continue;  // blank line
    if (items.size() < 2) reject(line_no, "session has fewer than 2 items");

    int64_t n = static_cast<int64_t>(items.size());
    for (int64_t start = 0;; start += stride) {
      int64_t stop = std::min(start + t, n);
      if (stop - start < 2)
        reject(line_no, "splitting leaves a sub-sequence with fewer than 2 items");
      ds.sequences.push_back(pad_left({items.begin() + start, items.begin() + stop}, t));
      if (stop == n) break;
    }
  }
  ds.vocab_size = max_id;
  ds.validate();
  return ds;
}

SessionDataset load_sessions(const std::string& path, int64_t t, int64_t overlap) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open session file: " + path);
  return parse_sessions(in, t, overlap);
}

void save_sessions(const SessionDataset& dataset, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write session file: " + path);
  for (const auto& seq : dataset.sequences) {
    size_t first = 0;
    while (first < seq.size() && seq[first] == 0) ++first;
    for (size_t i = first; i < seq.size(); ++i) {
      if (i > first) out << ' ';
      out << seq[i];
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::vector<std::vector<int32_t>> filter_min_counts(std::vector<std::vector<int32_t>> sessions,
                                                    int64_t min_item_users,
                                                    int64_t min_user_items) {
  bool changed = true;
  while (changed) {
    changed = false;
    std::unordered_map<int32_t, int64_t> item_users;
    for (const auto& s : sessions) {
      std::unordered_set<int32_t> seen(s.begin(), s.end());
      for (int32_t id : seen) ++item_users[id];
    }
    for (auto& s : sessions) {
      size_t before = s.size();
      std::erase_if(s, [&](int32_t id) { return item_users[id] < min_item_users; });
      if (s.size() != before) changed = true;
    }
    size_t before = sessions.size();
    std::erase_if(sessions, [&](const std::vector<int32_t>& s) {
      return static_cast<int64_t>(s.size()) < min_user_items;
    });
    if (sessions.size() != before) changed = true;
  }
  if (sessions.empty())
    std::cerr << "warning: filter_min_counts removed every session\n";
  return sessions;
}

std::pair<SessionDataset, SessionDataset> split_train_test(const SessionDataset& dataset,
                                                           double ratio, uint64_t seed) {
  if (ratio <= 0.0 || ratio >= 1.0) throw std::invalid_argument("split ratio must be in (0, 1)");
  std::vector<int64_t> order(static_cast<size_t>(dataset.size()));
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int64_t>(i);
  Rng rng(derive_seed(seed, 0x73706c6974ULL));
  rng.shuffle(order);
  int64_t train_n = std::llround(ratio * static_cast<double>(dataset.size()));
  train_n = std::clamp<int64_t>(train_n, 0, dataset.size());

  SessionDataset train, test;
  train.vocab_size = test.vocab_size = dataset.vocab_size;
  train.max_len = test.max_len = dataset.max_len;
  for (int64_t i = 0; i < dataset.size(); ++i) {
    const auto& seq = dataset.sequences[static_cast<size_t>(order[static_cast<size_t>(i)])];
    (i < train_n ? train : test).sequences.push_back(seq);
  }
  return {std::move(train), std::move(test)};
}

void SnapshotSpec::validate() const {
  if (fractions.empty()) throw std::invalid_argument("snapshot spec: no fractions");
  double prev = 0.0;
  for (double f : fractions) {
    if (f <= prev || f > 1.0)
      throw std::invalid_argument("snapshot spec: fractions must be ascending in (0, 1]");
    prev = f;
  }
}

SessionDataset snapshot(const SessionDataset& train, const SnapshotSpec& spec, size_t i) {
  spec.validate();
  if (i >= spec.fractions.size())
    throw std::out_of_range("snapshot index " + std::to_string(i) + " out of range");
  std::vector<int64_t> order(static_cast<size_t>(train.size()));
  for (size_t j = 0; j < order.size(); ++j) order[j] = static_cast<int64_t>(j);
  Rng rng(derive_seed(spec.seed, 0x736e6170ULL));
  rng.shuffle(order);
  int64_t take = static_cast<int64_t>(
      std::ceil(spec.fractions[i] * static_cast<double>(train.size())));
  take = std::clamp<int64_t>(take, 0, train.size());

  SessionDataset out;
  out.vocab_size = train.vocab_size;
  out.max_len = train.max_len;
  out.sequences.reserve(static_cast<size_t>(take));
  for (int64_t j = 0; j < take; ++j)
    out.sequences.push_back(train.sequences[static_cast<size_t>(order[static_cast<size_t>(j)])]);
  return out;
}

namespace {

// Successor set and Dirichlet(1) weights for one Markov state, derived
// deterministically from the generator seed so every visit agrees.
struct StateRow {
  std::vector<int32_t> successors;
  std::vector<double> cumulative;  // normalized, ascending
};

StateRow state_row(uint64_t gen_seed, uint64_t state_hash, int64_t V, int64_t concentration) {
  StateRow row;
  Rng rng(derive_seed(gen_seed, state_hash));
  if (concentration >= V) {
    row.successors.resize(static_cast<size_t>(V));
    row.cumulative.resize(static_cast<size_t>(V));
    for (int64_t i = 0; i < V; ++i) {
      row.successors[static_cast<size_t>(i)] = static_cast<int32_t>(i + 1);
      row.cumulative[static_cast<size_t>(i)] =
          static_cast<double>(i + 1) / static_cast<double>(V);
    }
    return row;
  }
  std::set<int32_t> chosen;
  while (static_cast<int64_t>(chosen.size()) < concentration)
    chosen.insert(static_cast<int32_t>(1 + rng.below(static_cast<uint64_t>(V))));
  row.successors.assign(chosen.begin(), chosen.end());
  double total = 0.0;
  std::vector<double> w(row.successors.size());
  for (double& x : w) {
    x = -std::log(1.0 - rng.uniform());  // Exp(1)
    total += x;
  }
  row.cumulative.resize(w.size());
  double acc = 0.0;
  for (size_t i = 0; i < w.size(); ++i) {
    acc += w[i] / total;
    row.cumulative[i] = acc;
  }
  row.cumulative.back() = 1.0;
  return row;
}

int32_t sample_row(const StateRow& row, Rng& rng) {
  double u = rng.uniform();
  for (size_t i = 0; i < row.cumulative.size(); ++i)
    if (u < row.cumulative[i]) return row.successors[i];
  return row.successors.back();
}

}  // namespace

SessionDataset gen_markov(const MarkovSpec& spec) {
  if (spec.num_items < 10) throw std::invalid_argument("gen_markov: need at least 10 items");
  if (spec.num_sessions < 1) throw std::invalid_argument("gen_markov: need at least 1 session");
  if (spec.max_len < 2) throw std::invalid_argument("gen_markov: max_len must be >= 2");
  if (spec.order != 1 && spec.order != 2) throw std::invalid_argument("gen_markov: order must be 1 or 2");
  if (spec.concentration < 1) throw std::invalid_argument("gen_markov: concentration must be >= 1");

  const int64_t V = spec.num_items;
  const uint64_t table_seed = derive_seed(spec.seed, 0x7461626cULL);
  Rng rng(derive_seed(spec.seed, 0x73657373ULL));

  SessionDataset ds;
  ds.max_len = spec.max_len;
  int64_t max_id = 0;
  const int64_t min_len = std::max<int64_t>(2, spec.max_len / 2);
  for (int64_t s = 0; s < spec.num_sessions; ++s) {
    int64_t len = min_len + static_cast<int64_t>(rng.below(
                                static_cast<uint64_t>(spec.max_len - min_len + 1)));
    std::vector<int32_t> items;
    items.reserve(static_cast<size_t>(len));
    items.push_back(static_cast<int32_t>(1 + rng.below(static_cast<uint64_t>(V))));
    while (static_cast<int64_t>(items.size()) < len) {
      int32_t cur = items.back();
      uint64_t h;
      if (spec.order == 2 && items.size() >= 2) {
        int32_t prev = items[items.size() - 2];
        h = static_cast<uint64_t>(prev) * static_cast<uint64_t>(V + 1) +
            static_cast<uint64_t>(cur);
      } else {
        h = static_cast<uint64_t>(cur);
      }
      StateRow row = state_row(table_seed, h, V, spec.concentration);
      items.push_back(sample_row(row, rng));
    }
    for (int32_t id : items) max_id = std::max<int64_t>(max_id, id);
    std::vector<int32_t> padded(static_cast<size_t>(spec.max_len), 0);
    std::copy(items.begin(), items.end(), padded.end() - len);
    ds.sequences.push_back(std::move(padded));
  }
  ds.vocab_size = max_id;
  ds.validate();
  return ds;
}

TransferDataset load_transfer(const std::string& path, int64_t t) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open transfer file: " + path);
  TransferDataset ds;
  ds.contexts.max_len = t;
  std::string line;
  size_t line_no = 0;
  int64_t max_src = 0, max_tgt = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::vector<int32_t> ids;
    int64_t v;
    while (ls >> v) {
      if (v <= 0) reject(line_no, "item id must be >= 1");
      ids.push_back(static_cast<int32_t>(v));
    }
    if (!ls.eof()) reject(line_no, "non-integer token");
    if (ids.empty()) continue;
    if (ids.size() < 3) reject(line_no, "need at least 2 context items plus a target");
    int32_t target = ids.back();
    ids.pop_back();
    if (static_cast<int64_t>(ids.size()) > t)
      ids.erase(ids.begin(), ids.end() - t);  // keep the most recent t context items
    for (int32_t id : ids) max_src = std::max<int64_t>(max_src, id);
    max_tgt = std::max<int64_t>(max_tgt, target);
    ds.contexts.sequences.push_back(pad_left(ids, t));
    ds.targets.push_back(target);
  }
  ds.contexts.vocab_size = max_src;
  ds.target_vocab = max_tgt;
  ds.contexts.validate();
  return ds;
}

void save_transfer(const TransferDataset& dataset, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write transfer file: " + path);
  for (size_t i = 0; i < dataset.targets.size(); ++i) {
    const auto& seq = dataset.contexts.sequences[i];
    size_t first = 0;
    while (first < seq.size() && seq[first] == 0) ++first;
    for (size_t j = first; j < seq.size(); ++j) out << seq[j] << ' ';
    out << dataset.targets[i] << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

TransferDataset gen_linked_transfer(const SessionDataset& source, int64_t target_vocab,
                                    double noise, uint64_t seed) {
  if (target_vocab < 1) throw std::invalid_argument("gen_linked_transfer: target vocab must be >= 1");
  Rng map_rng(derive_seed(seed, 0x6d6170ULL));
  std::vector<int32_t> item_map(static_cast<size_t>(source.vocab_size + 1));
  for (auto& m : item_map) m = static_cast<int32_t>(1 + map_rng.below(static_cast<uint64_t>(target_vocab)));

  Rng rng(derive_seed(seed, 0x6c696e6bULL));
  TransferDataset ds;
  ds.contexts = source;
  ds.target_vocab = target_vocab;
  ds.targets.reserve(source.sequences.size());
  for (const auto& seq : source.sequences) {
    int32_t last = seq.back();
    int32_t target = item_map[static_cast<size_t>(last)];
    if (rng.uniform() < noise)
      target = static_cast<int32_t>(1 + rng.below(static_cast<uint64_t>(target_vocab)));
    ds.targets.push_back(target);
  }
  return ds;
}

std::pair<TransferDataset, TransferDataset> split_transfer(const TransferDataset& dataset,
                                                           double ratio, uint64_t seed) {
  if (ratio <= 0.0 || ratio >= 1.0) throw std::invalid_argument("split ratio must be in (0, 1)");
  std::vector<int64_t> order(static_cast<size_t>(dataset.size()));
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int64_t>(i);
  Rng rng(derive_seed(seed, 0x74667370ULL));
  rng.shuffle(order);
  int64_t train_n = std::llround(ratio * static_cast<double>(dataset.size()));
  train_n = std::clamp<int64_t>(train_n, 0, dataset.size());

  TransferDataset train, test;
  train.contexts.vocab_size = test.contexts.vocab_size = dataset.contexts.vocab_size;
  train.contexts.max_len = test.contexts.max_len = dataset.contexts.max_len;
  train.target_vocab = test.target_vocab = dataset.target_vocab;
  for (int64_t i = 0; i < dataset.size(); ++i) {
    auto idx = static_cast<size_t>(order[static_cast<size_t>(i)]);
    TransferDataset& dst = i < train_n ? train : test;
    dst.contexts.sequences.push_back(dataset.contexts.sequences[idx]);
    dst.targets.push_back(dataset.targets[idx]);
  }
  return {std::move(train), std::move(test)};
}

}  // namespace stackseq
