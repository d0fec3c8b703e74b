#include "stackseq/probe.h"

#include <cmath>
#include <cstdio>
#include <iostream>
#include <stdexcept>

#include "stackseq/rng.h"

namespace stackseq {

std::string SimilarityMatrix::str() const {
  std::string out = std::to_string(num_blocks) + "\n";
  char buf[32];
  for (int64_t i = 0; i < num_blocks; ++i) {
    for (int64_t j = 0; j < num_blocks; ++j) {
      std::snprintf(buf, sizeof(buf), "%.6f", values.at(i, j));
      if (j) out += ' ';
      out += buf;
    }
    out += '\n';
  }
  return out;
}

SimilarityMatrix block_similarity(const Model& model, const SessionDataset& data,
                                  int64_t num_sequences, uint64_t seed) {
  const int64_t L = model.num_blocks();
  if (L < 2) throw std::invalid_argument("block_similarity: need at least 2 blocks");
  if (data.size() == 0) throw std::invalid_argument("block_similarity: empty dataset");
  if (num_sequences < 1) throw std::invalid_argument("block_similarity: need at least 1 sequence");

  int64_t take = num_sequences;
  if (data.size() < num_sequences) {
    std::cerr << "warning: probe asked for " << num_sequences << " sequences, dataset has "
              << data.size() << "; using all\n";
    take = data.size();
  }
  std::vector<int64_t> order(static_cast<size_t>(data.size()));
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int64_t>(i);
  Rng rng(derive_seed(seed, 0x70726f6265ULL));
  rng.shuffle(order);

  SimilarityMatrix sim;
  sim.num_blocks = L;
  sim.num_sequences = take;
  sim.values = TensorD::zeros({L, L});

  const int64_t t = data.max_len;
  const int64_t k = model.config.embed_dim;
  for (int64_t s = 0; s < take; ++s) {
    const auto& seq = data.sequences[static_cast<size_t>(order[static_cast<size_t>(s)])];
    IntTensor ids = IntTensor::zeros({1, t});
    std::copy(seq.begin(), seq.end(), ids.data.begin());
    ForwardCache cache;
    forward(model, ids, &cache);

    int64_t first_real = 0;
    while (first_real < t && seq[static_cast<size_t>(first_real)] == 0) ++first_real;
    const int64_t len = (t - first_real) * k;

    // hidden[0] is the embedding; block outputs start at hidden[1].
    std::vector<const float*> maps(static_cast<size_t>(L));
    std::vector<double> norms(static_cast<size_t>(L), 0.0);
    for (int64_t b = 0; b < L; ++b) {
      maps[static_cast<size_t>(b)] = cache.hidden[static_cast<size_t>(b + 1)].ptr() + first_real * k;
      double acc = 0.0;
      const float* p = maps[static_cast<size_t>(b)];
      for (int64_t i = 0; i < len; ++i) acc += static_cast<double>(p[i]) * p[i];
      norms[static_cast<size_t>(b)] = std::sqrt(acc);
    }
    for (int64_t a = 0; a < L; ++a) {
      for (int64_t b = a; b < L; ++b) {
        const float* pa = maps[static_cast<size_t>(a)];
        const float* pb = maps[static_cast<size_t>(b)];
        double dot = 0.0;
        for (int64_t i = 0; i < len; ++i) dot += static_cast<double>(pa[i]) * pb[i];
        double denom = norms[static_cast<size_t>(a)] * norms[static_cast<size_t>(b)];
        double c = denom > 0.0 ? dot / denom : 0.0;
        sim.values.at(a, b) += c;
        if (b != a) sim.values.at(b, a) += c;
      }
    }
  }
  for (int64_t i = 0; i < L * L; ++i) sim.values[i] /= static_cast<double>(take);
  return sim;
}

}  // namespace stackseq
