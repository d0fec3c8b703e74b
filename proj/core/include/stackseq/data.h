#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace stackseq {

// Fixed-length, left-zero-padded item-id sequences. Padding (id 0) appears
// only as a contiguous prefix and every sequence keeps at least two real
// items so a context/target pair always exists.
struct SessionDataset {
  int64_t vocab_size = 0;  // V; ids are 1..V
  int64_t max_len = 0;     // t
  std::vector<std::vector<int32_t>> sequences;

  int64_t size() const { return static_cast<int64_t>(sequences.size()); }
  void validate() const;
};

// Session file format: UTF-8 text, one session per line, space-separated
// decimal item ids >= 1, chronological, no header.
//
// Lines longer than t split into consecutive windows; `overlap` items are
// shared between adjacent windows (0 = disjoint, the default). Any line or
// window left with fewer than two items is rejected with its line number.
// vocab_size is the maximum id observed.
SessionDataset load_sessions(const std::string& path, int64_t t, int64_t overlap = 0);
SessionDataset parse_sessions(std::istream& in, int64_t t, int64_t overlap = 0);
void save_sessions(const SessionDataset& dataset, const std::string& path);

// Iteratively removes items present in fewer than min_item_users sessions
// and sessions with fewer than min_user_items items until a fixpoint.
// Returns (possibly empty, with a stderr warning) filtered sessions.
std::vector<std::vector<int32_t>> filter_min_counts(std::vector<std::vector<int32_t>> sessions,
                                                    int64_t min_item_users = 10,
                                                    int64_t min_user_items = 5);

// Seeded sequence-level partition: disjoint, exhaustive.
std::pair<SessionDataset, SessionDataset> split_train_test(const SessionDataset& dataset,
                                                           double ratio, uint64_t seed);

// Growing-data snapshots for continual-learning runs: snapshot i is the
// prefix of one fixed seeded permutation sized ceil(fraction[i] * n), so
// snapshot(i) is contained in snapshot(j) for i < j.
struct SnapshotSpec {
  std::vector<double> fractions;  // ascending, each in (0, 1]
  uint64_t seed = 0;
  void validate() const;
};

SessionDataset snapshot(const SessionDataset& train, const SnapshotSpec& spec, size_t i);

// Synthetic session generator over a random sparse Markov chain. Each state
// has `concentration` successors with Dirichlet(1) weights (derived
// deterministically from the seed); concentration >= num_items means exactly
// uniform transitions, concentration == 1 a deterministic chain. order 2
// conditions on the last two items.
struct MarkovSpec {
  int64_t num_items = 100;   // V, >= 10
  int64_t num_sessions = 1000;
  int64_t max_len = 20;      // t
  int order = 1;             // 1 or 2
  int64_t concentration = 4; // successors per state
  uint64_t seed = 1;
};

SessionDataset gen_markov(const MarkovSpec& spec);

// Source-context -> target-item pairs for transfer fine-tuning. Contexts
// live in the source vocabulary; targets in their own item universe.
struct TransferDataset {
  SessionDataset contexts;
  std::vector<int32_t> targets;
  int64_t target_vocab = 0;

  int64_t size() const { return static_cast<int64_t>(targets.size()); }
};

// File format: like the session format, but the last id on each line is the
// target-domain item.
TransferDataset load_transfer(const std::string& path, int64_t t);
void save_transfer(const TransferDataset& dataset, const std::string& path);

// Links each source sequence to a target item through a seeded random
// item map, flipped to a uniform random target with probability `noise`.
TransferDataset gen_linked_transfer(const SessionDataset& source, int64_t target_vocab,
                                    double noise, uint64_t seed);

std::pair<TransferDataset, TransferDataset> split_transfer(const TransferDataset& dataset,
                                                           double ratio, uint64_t seed);

}  // namespace stackseq
