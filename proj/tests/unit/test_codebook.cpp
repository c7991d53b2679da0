#include <gtest/gtest.h>

#include "lego/codebook/codebook.hpp"
#include "lego/corpus/render.hpp"

namespace lego::codebook {
namespace {

tvqvae::TvqvaeModel make_model(uint64_t seed) {
  tvqvae::TvqvaeConfig cfg;
  cfg.hidden = 32;
  cfg.depth = 2;
  cfg.dim = 16;
  cfg.codebook_size = 32;
  cfg.decoder_hidden = 32;
  return tvqvae::TvqvaeModel(cfg, seed);
}

Image word_image(const std::string& word, uint64_t seed) { return corpus::render_sample(corpus::random_spec(word, seed)).image; }

TEST(Codebook, TokenizeIsDeterministicAndFreezes) {
  auto model = make_model(1);
  TextKnowledgeCodebook cb(model);
  EXPECT_TRUE(model->frozen());
  auto image = word_image("lego", 3);
  auto a = cb.tokenize(image, "x");
  auto b = cb.tokenize(image, "x");
  EXPECT_EQ(a, b);
  for (auto i : a.indices) {
    EXPECT_GE(i, 0);
    EXPECT_LT(i, cb.size());
  }
}

TEST(Codebook, RetrievalMatchesQuantizedRows) {
  auto model = make_model(2);
  TextKnowledgeCodebook cb(model);
  auto image = word_image("brick", 4);
  auto tokens = cb.tokenize(image);
  auto latents = cb.retrieve_latents(tokens);
  torch::NoGradGuard no_grad;
  auto q = tvqvae::quantize(model->t_encode(image.unsqueeze(0)), model->embeddings());
  EXPECT_TRUE(torch::equal(latents, q.x_q.view({8, -1})));
  for (int s = 0; s < 8; ++s) {
    EXPECT_TRUE(torch::equal(latents[s], model->embeddings()[tokens.indices[s]]));
  }
}

TEST(Codebook, ZeroTableRetrievesZeros) {
  auto model = make_model(3);
  {
    torch::NoGradGuard no_grad;
    model->embeddings().zero_();
  }
  TextKnowledgeCodebook cb(model);
  auto latents = cb.retrieve_latents(cb.tokenize(word_image("zero", 1)));
  EXPECT_EQ(latents.abs().sum().item<float>(), 0.0f);
}

TEST(Codebook, GeometryAndRangeErrors) {
  TextKnowledgeCodebook cb(make_model(4));
  EXPECT_THROW(cb.tokenize_batch(torch::zeros({1, 3, 32, 64})), ConfigError);
  EXPECT_THROW(cb.tokenize(torch::zeros({3, 16, 128})), ConfigError);
  TokenSequence bad;
  bad.indices[2] = cb.size();
  EXPECT_THROW(cb.retrieve_latents(bad), ValidationError);
}

TEST(Codebook, NoiseFreeRendersShareTokens) {
  TextKnowledgeCodebook cb(make_model(5));
  auto spec = corpus::random_spec("shared", 8);
  spec.noise_level = 0.0;
  auto a = corpus::render_sample(spec);
  spec.noise_seed = 99;
  auto b = corpus::render_sample(spec);
  EXPECT_EQ(cb.tokenize(a.image).indices, cb.tokenize(b.image).indices);
}

TEST(Codebook, MirroredImagesUsuallyTokenizeDifferently) {
  TextKnowledgeCodebook cb(make_model(6));
  const auto& words = corpus::default_wordlist();
  int differ = 0;
  for (int i = 0; i < 50; ++i) {
    auto image = word_image(words[i % words.size()], 200 + i);
    differ += cb.tokenize(image).indices != cb.tokenize(image.flip({2})).indices;
  }
  EXPECT_GE(differ, 45);
}

TEST(Codebook, HashStableAcrossUse) {
  TextKnowledgeCodebook cb(make_model(7));
  const auto before = cb.hash();
  for (int i = 0; i < 5; ++i) cb.tokenize(word_image("hash", i));
  EXPECT_EQ(cb.recompute_hash(), before);
}

TEST(ReduceToSlots, MajorityWithLowestTieBreak) {
  auto grid = torch::tensor({4, 4, 2, 2, 9, 1, 1, 1, 3, 5, 7, 7, 0, 0, 0, 8, 6, 6, 5, 5, 2, 3, 4, 5, 7, 7, 7, 7, 9, 8, 9, 8},
                            torch::kInt64)
                  .view({1, 2, 16});
  auto slots = reduce_to_slots(grid);
  // Each slot covers two columns of both rows.
  EXPECT_TRUE(torch::equal(slots, torch::tensor({4, 2, 1, 1, 7, 7, 0, 8}, torch::kInt64).view({1, 8})));
  auto passthrough = torch::arange(8, torch::kInt64).view({1, 1, 8});
  EXPECT_TRUE(torch::equal(reduce_to_slots(passthrough), passthrough.view({1, 8})));
}

TEST(TokenCache, SameIndexComparesSlots) {
  TokenCache cache;
  TokenSequence a;
  a.source_id = "a";
  a.indices = {1, 2, 3, 4, 5, 6, 7, 8};
  TokenSequence b;
  b.source_id = "b";
  b.indices = {8, 7, 6, 5, 4, 3, 2, 1};
  cache.insert(a);
  cache.insert(b);
  EXPECT_TRUE(same_index(cache, {"a", 0}, {"b", 7}));
  EXPECT_FALSE(same_index(cache, {"a", 0}, {"b", 0}));
}

}  // namespace
}  // namespace lego::codebook
