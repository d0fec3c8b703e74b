#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "stackseq/eval.h"
#include "stackseq/stacking.h"
#include "test_util.h"

using namespace stackseq;
using testutil::random_ids;
using testutil::randomize_alphas;

namespace {

Model random_model(int64_t num_blocks, uint64_t seed) {
  ModelConfig c;
  c.vocab_size = 15;
  c.embed_dim = 6;
  c.max_len = 8;
  c.base_dilations = {1, 2, 4, 8};
  c.num_blocks = num_blocks;
  c.kernel_width = 3;
  Model m = init_model<float>(c, seed);
  Rng rng(seed + 5);
  randomize_alphas(m, rng);
  // decorrelate the blocks so pattern checks cannot pass by accident
  for (size_t i = 0; i < m.blocks.size(); ++i) m.blocks[i].conv1_b[0] += static_cast<float>(i + 1);
  return m;
}

bool blocks_identical(const ResidualBlock& a, const ResidualBlock& b) {
  return bit_equal(a.conv1_w, b.conv1_w) && bit_equal(a.conv1_b, b.conv1_b) &&
         bit_equal(a.ln1_gamma, b.ln1_gamma) && bit_equal(a.ln1_beta, b.ln1_beta) &&
         bit_equal(a.conv2_w, b.conv2_w) && bit_equal(a.conv2_b, b.conv2_b) &&
         bit_equal(a.ln2_gamma, b.ln2_gamma) && bit_equal(a.ln2_beta, b.ln2_beta) &&
         bit_equal(a.alpha, b.alpha) && a.dilation == b.dilation;
}

}  // namespace

TEST_CASE("adjacent stacking interleaves block copies") {
  Model src = random_model(2, 1);
  Model dst = adjacent_stack(src);
  REQUIRE(dst.num_blocks() == 4);
  CHECK(blocks_identical(dst.blocks[0], src.blocks[0]));
  CHECK(blocks_identical(dst.blocks[1], src.blocks[0]));
  CHECK(blocks_identical(dst.blocks[2], src.blocks[1]));
  CHECK(blocks_identical(dst.blocks[3], src.blocks[1]));
  CHECK(verify_stack(src, dst, {StackMode::adjacent, 2}).ok);
}

TEST_CASE("cross stacking appends the whole block sequence") {
  Model src = random_model(2, 2);
  Model dst = cross_stack(src);
  REQUIRE(dst.num_blocks() == 4);
  CHECK(blocks_identical(dst.blocks[0], src.blocks[0]));
  CHECK(blocks_identical(dst.blocks[1], src.blocks[1]));
  CHECK(blocks_identical(dst.blocks[2], src.blocks[0]));
  CHECK(blocks_identical(dst.blocks[3], src.blocks[1]));
  CHECK(verify_stack(src, dst, {StackMode::cross, 2}).ok);
}

TEST_CASE("the two modes coincide for a single block") {
  Model src = random_model(1, 3);
  Model a = adjacent_stack(src);
  Model c = cross_stack(src);
  REQUIRE(a.num_blocks() == 2);
  CHECK(blocks_identical(a.blocks[0], c.blocks[0]));
  CHECK(blocks_identical(a.blocks[1], c.blocks[1]));
}

TEST_CASE("copies are independent after stacking") {
  Model src = random_model(2, 4);
  Model dst = adjacent_stack(src);
  dst.blocks[0].conv1_w[0] += 1.0f;
  CHECK(bit_equal(dst.blocks[1].conv1_w, src.blocks[0].conv1_w));
  CHECK(bit_equal(src.blocks[0].conv1_w, random_model(2, 4).blocks[0].conv1_w));
}

TEST_CASE("dilations travel with their blocks") {
  Model src = random_model(4, 5);  // dilations 1,2,4,8
  Model dst = cross_stack(src);
  std::vector<int64_t> expect = {1, 2, 4, 8, 1, 2, 4, 8};
  for (size_t i = 0; i < 8; ++i) CHECK(dst.blocks[i].dilation == expect[i]);

  Model adj = adjacent_stack(src);
  std::vector<int64_t> expect_adj = {1, 1, 2, 2, 4, 4, 8, 8};
  for (size_t i = 0; i < 8; ++i) CHECK(adj.blocks[i].dilation == expect_adj[i]);

  Model reassigned = partial_stack(src, StackMode::adjacent, 4, /*reassign_dilations=*/true);
  for (size_t i = 0; i < 8; ++i) CHECK(reassigned.blocks[i].dilation == expect[i]);
}

TEST_CASE("partial stacking grows by any m up to L") {
  Model src = random_model(4, 6);
  SUBCASE("adjacent m=1 duplicates only the top block") {
    Model dst = partial_stack(src, StackMode::adjacent, 1);
    REQUIRE(dst.num_blocks() == 5);
    for (int64_t i = 0; i < 3; ++i)
      CHECK(blocks_identical(dst.blocks[static_cast<size_t>(i)], src.blocks[static_cast<size_t>(i)]));
    CHECK(blocks_identical(dst.blocks[3], src.blocks[3]));
    CHECK(blocks_identical(dst.blocks[4], src.blocks[3]));
    CHECK(verify_stack(src, dst, {StackMode::adjacent, 1}).ok);
  }
  SUBCASE("cross m=2 appends copies of the bottom blocks") {
    Model dst = partial_stack(src, StackMode::cross, 2);
    REQUIRE(dst.num_blocks() == 6);
    CHECK(blocks_identical(dst.blocks[4], src.blocks[0]));
    CHECK(blocks_identical(dst.blocks[5], src.blocks[1]));
    CHECK(verify_stack(src, dst, {StackMode::cross, 2}).ok);
  }
  SUBCASE("m == L equals the full stack") {
    Model full = adjacent_stack(src);
    Model part = partial_stack(src, StackMode::adjacent, 4);
    REQUIRE(full.num_blocks() == part.num_blocks());
    for (size_t i = 0; i < full.blocks.size(); ++i)
      CHECK(blocks_identical(full.blocks[i], part.blocks[i]));
  }
  SUBCASE("m > L rejected") {
    CHECK_THROWS_AS(partial_stack(src, StackMode::adjacent, 5), std::invalid_argument);
  }
}

TEST_CASE("cross partial stack puts copies of the first blocks on top") {
  // scaled-down shape of the 32+16 case: top blocks are copies of 1..m
  Model src = random_model(8, 7);
  Model dst = partial_stack(src, StackMode::cross, 4);
  REQUIRE(dst.num_blocks() == 12);
  for (int64_t j = 0; j < 4; ++j)
    CHECK(blocks_identical(dst.blocks[static_cast<size_t>(8 + j)],
                           src.blocks[static_cast<size_t>(j)]));
}

TEST_CASE("random-top stacking preserves the function exactly") {
  Model src = random_model(3, 8);
  Model dst = random_top_stack(src, 3, 99);
  REQUIRE(dst.num_blocks() == 6);
  for (size_t i = 0; i < 3; ++i) CHECK(blocks_identical(dst.blocks[i], src.blocks[i]));
  for (size_t i = 3; i < 6; ++i) CHECK(dst.blocks[i].alpha[0] == 0.0f);

  Rng rng(55);
  IntTensor ids = random_ids(3, src.config.max_len, src.config.vocab_size, rng);
  CHECK(bit_equal(forward(src, ids), forward(dst, ids)));
  CHECK(verify_stack(src, dst, {StackMode::random_top, 3}).ok);

  Model dst2 = random_top_stack(src, 3, 100);
  CHECK(!bit_equal(dst.blocks[4].conv1_w, dst2.blocks[4].conv1_w));
}

TEST_CASE("embed-only stacking keeps just the embedding and softmax") {
  Model src = random_model(2, 9);
  Model dst = embed_only_stack(src, 4, 77);
  REQUIRE(dst.num_blocks() == 4);
  CHECK(bit_equal(dst.embedding, src.embedding));
  CHECK(bit_equal(dst.softmax_w, src.softmax_w));
  CHECK(bit_equal(dst.softmax_b, src.softmax_b));
  for (const auto& db : dst.blocks)
    for (const auto& sb : src.blocks) CHECK(!bit_equal(db.conv1_w, sb.conv1_w));

  // fresh blocks are identity, so logits are embedding-through-softmax
  Rng rng(56);
  IntTensor ids = random_ids(2, src.config.max_len, src.config.vocab_size, rng);
  Tensor direct = kernels::linear(kernels::embedding_lookup(dst.embedding, ids), dst.softmax_w,
                                  dst.softmax_b);
  CHECK(bit_equal(forward(dst, ids), direct));
}

TEST_CASE("every mode preserves embedding and softmax bit-exactly") {
  for (int64_t L = 1; L <= 8; ++L) {
    Model src = random_model(L, 10 + static_cast<uint64_t>(L));
    std::vector<Model> results;
    results.push_back(adjacent_stack(src));
    results.push_back(cross_stack(src));
    results.push_back(random_top_stack(src, L, 1));
    results.push_back(embed_only_stack(src, 2 * L, 1));
    if (L > 1) results.push_back(partial_stack(src, StackMode::cross, L - 1));
    for (const Model& dst : results) {
      CHECK(bit_equal(dst.embedding, src.embedding));
      CHECK(bit_equal(dst.softmax_w, src.softmax_w));
      CHECK(bit_equal(dst.softmax_b, src.softmax_b));
    }
    CHECK(results[0].num_blocks() == 2 * L);
    CHECK(results[2].num_blocks() == 2 * L);
  }
}

TEST_CASE("every stacked model keeps a finite held-out loss") {
  MarkovSpec spec;
  spec.num_items = 15;
  spec.num_sessions = 60;
  spec.max_len = 8;
  spec.seed = 3;
  SessionDataset data = gen_markov(spec);
  Model src = random_model(3, 30);  // same 15-item universe as the data
  for (Model dst : {adjacent_stack(src), cross_stack(src), random_top_stack(src, 3, 1),
                    embed_only_stack(src, 6, 1)}) {
    double loss = eval_loss(dst, data);
    CHECK(std::isfinite(loss));
  }
}

TEST_CASE("verify_stack reports perturbed tensors by name") {
  Model src = random_model(4, 20);
  Model dst = adjacent_stack(src);
  dst.blocks[3].conv1_w[1] += 0.25f;
  StackReport report = verify_stack(src, dst, {StackMode::adjacent, 4});
  CHECK(!report.ok);
  REQUIRE(report.mismatches.size() == 1);
  CHECK(report.mismatches[0] == "block3.conv1.w");
}

TEST_CASE("verify_stack rejects the wrong claimed mode") {
  Model src = random_model(2, 21);
  Model crossed = cross_stack(src);
  StackReport report = verify_stack(src, crossed, {StackMode::adjacent, 2});
  CHECK(!report.ok);
  CHECK(!report.mismatches.empty());
}

TEST_CASE("verify_stack catches a wrong depth") {
  Model src = random_model(2, 22);
  Model dst = partial_stack(src, StackMode::cross, 1);
  StackReport report = verify_stack(src, dst, {StackMode::cross, 2});
  CHECK(!report.ok);
  CHECK(report.mismatches[0] == "num_blocks");
}
