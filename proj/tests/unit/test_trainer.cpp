#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include <gtest/gtest.h>

#include "lego/corpus/dataset.hpp"
#include "lego/hash.hpp"
#include "lego/trainer/config.hpp"
#include "lego/trainer/losses.hpp"
#include "lego/trainer/pretrain.hpp"
#include "lego/trainer/schedule.hpp"

namespace lego::trainer {
namespace {

TEST(Schedule, WarmupThenCosine) {
  EXPECT_EQ(lr_schedule(0, 1e-3, 10, 110), 0.0);
  EXPECT_EQ(lr_schedule(10, 1e-3, 10, 110), 1e-3);
  EXPECT_NEAR(lr_schedule(60, 1e-3, 10, 110), 5e-4, 1e-9);
  EXPECT_NEAR(lr_schedule(5, 1e-3, 10, 110), 5e-4, 1e-15);
  double prev = lr_schedule(9, 1e-3, 10, 110);
  EXPECT_NEAR(lr_schedule(10, 1e-3, 10, 110) - prev, 1e-4, 1e-12);
  for (int s = 0; s <= 120; ++s) {
    const double lr = lr_schedule(s, 1e-3, 10, 110);
    EXPECT_GE(lr, 0.0);
    EXPECT_LE(lr, 1e-3);
  }
}

TEST(Losses, Combination) {
  EXPECT_NEAR(combine_losses(1.0, 2.0, 3.0, 0.1, 1.0), 4.2, 1e-12);
  EXPECT_EQ(combine_losses(0.0, 0.0, 0.0, 0.1, 1.0), 0.0);
  EXPECT_EQ(combine_losses(1.5, 2.0, 3.0, 0.0, 0.0), 1.5);
  try {
    combine_losses(1.0, std::numeric_limits<double>::quiet_NaN(), 1.0, 0.1, 1.0);
    FAIL();
  } catch (const DivergenceError& e) {
    EXPECT_NE(std::string(e.what()).find("MIM"), std::string::npos) << e.what();
  }
}

TEST(Config, TextRoundTripAndErrors) {
  PretrainConfig c;
  c.vit_preset = "tiny";
  c.tau = 0.125;
  c.enable_rtr = false;
  auto back = PretrainConfig::from_text(c.to_text());
  EXPECT_EQ(back.to_text(), c.to_text());
  EXPECT_EQ(back.hash(), c.hash());
  c.seed = 1;
  EXPECT_NE(back.hash(), c.hash());
  EXPECT_THROW(PretrainConfig::from_text("no_such_key = 1\n"), ConfigError);
  EXPECT_THROW(PretrainConfig::from_text("tau = 0.1\ntau = 0.2\n"), ConfigError);
  EXPECT_THROW(PretrainConfig::from_text("tau = abc\n"), ConfigError);
  EXPECT_THROW(PretrainConfig::from_text("tau = 0\n").validate(), ConfigError);
  auto partial = PretrainConfig::from_text("# comment\nbatch_size = 16\n");
  EXPECT_EQ(partial.batch_size, 16);
  EXPECT_EQ(partial.lr_init, 1.5e-4);
}

class PretrainFixture : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    tvqvae::TvqvaeConfig cfg;
    cfg.hidden = 16;
    cfg.depth = 1;
    cfg.dim = 8;
    cfg.codebook_size = 6;
    cfg.decoder_hidden = 16;
    codebook_ = new codebook::TextKnowledgeCodebook(tvqvae::TvqvaeModel(cfg, 3));
  }
  static void TearDownTestSuite() {
    delete codebook_;
    codebook_ = nullptr;
  }

  static PretrainConfig config() {
    PretrainConfig c;
    c.vit_preset = "tiny";
    c.proj_hidden = 32;
    c.proj_dim = 16;
    c.pred_hidden = 32;
    c.batch_size = 4;
    c.epochs = 3;
    c.warmup_epochs = 1;
    c.lr_init = 1e-3;
    c.seed = 17;
    return c;
  }
  static std::vector<corpus::TextSample> samples() {
    return corpus::generate_samples(corpus::default_wordlist(), 12, 4);
  }

  static codebook::TextKnowledgeCodebook* codebook_;
};
codebook::TextKnowledgeCodebook* PretrainFixture::codebook_ = nullptr;

TEST_F(PretrainFixture, BatchesAreDeterministic) {
  Pretrainer a(config(), *codebook_, samples());
  Pretrainer b(config(), *codebook_, samples());
  EXPECT_EQ(a.steps_per_epoch(), 3);
  auto x = a.make_batch(4), y = b.make_batch(4);
  EXPECT_TRUE(torch::equal(x.view_a, y.view_a));
  EXPECT_TRUE(torch::equal(x.shuffled, y.shuffled));
  EXPECT_TRUE(torch::equal(x.patch_mask, y.patch_mask));
  EXPECT_TRUE(torch::equal(x.tokens, y.tokens));
  EXPECT_EQ(x.patch_mask.sum().item<int64_t>(), 4 * 96);
  EXPECT_FALSE(torch::equal(a.make_batch(4).view_a, a.make_batch(5).view_a));
}

TEST_F(PretrainFixture, StepsAreFiniteAndCodebookUntouched) {
  const auto before = codebook_->recompute_hash();
  Pretrainer t(config(), *codebook_, samples());
  const auto momentum_before = hash_module(*t.momentum());
  for (int i = 0; i < 3; ++i) {
    auto rec = t.train_step();
    EXPECT_TRUE(std::isfinite(rec.losses.total));
    EXPECT_GE(rec.losses.contrastive, 0.0);
    EXPECT_GE(rec.losses.masked, 0.0);
    EXPECT_GE(rec.losses.rearrangement, 0.0);
    EXPECT_NEAR(rec.losses.total, rec.losses.contrastive + 0.1 * rec.losses.masked + rec.losses.rearrangement, 1e-5);
  }
  EXPECT_EQ(t.step(), 3);
  EXPECT_NE(hash_module(*t.momentum()), momentum_before);
  EXPECT_EQ(codebook_->recompute_hash(), before);
}

TEST_F(PretrainFixture, DisabledTaskContributesZero) {
  auto c = config();
  c.enable_sid = false;
  c.enable_rtr = false;
  Pretrainer t(c, *codebook_, samples());
  auto rec = t.train_step();
  EXPECT_EQ(rec.losses.contrastive, 0.0);
  EXPECT_EQ(rec.losses.rearrangement, 0.0);
  EXPECT_GT(rec.losses.masked, 0.0);
}

TEST_F(PretrainFixture, CheckpointRoundTripIsByteIdentical) {
  Pretrainer t(config(), *codebook_, samples());
  t.run(2);
  auto bytes = t.serialize_checkpoint();
  Pretrainer u(config(), *codebook_, samples());
  u.load_checkpoint_bytes(bytes);
  EXPECT_EQ(u.step(), 2);
  EXPECT_EQ(u.serialize_checkpoint(), bytes);

  auto other = config();
  other.tau = 0.3;
  Pretrainer v(other, *codebook_, samples());
  EXPECT_THROW(v.load_checkpoint_bytes(bytes), ConfigError);
  bytes[bytes.size() / 2] ^= 0x10;
  EXPECT_THROW(u.load_checkpoint_bytes(bytes), IoError);
}

TEST_F(PretrainFixture, ResumeReproducesLossesExactly) {
  Pretrainer straight(config(), *codebook_, samples());
  straight.run(2);
  const auto bytes = straight.serialize_checkpoint();
  auto tail = straight.run(6);

  Pretrainer resumed(config(), *codebook_, samples());
  resumed.load_checkpoint_bytes(bytes);
  auto again = resumed.run(6);
  ASSERT_EQ(tail.size(), again.size());
  for (size_t i = 0; i < tail.size(); ++i) {
    EXPECT_EQ(tail[i].losses.total, again[i].losses.total) << i;
    EXPECT_EQ(tail[i].lr, again[i].lr);
  }
}

TEST_F(PretrainFixture, RunWritesMetricsAndEncoder) {
  auto dir = std::filesystem::temp_directory_path() / "lego_pretrain_run_test";
  std::filesystem::remove_all(dir);
  auto c = config();
  c.epochs = 1;
  c.warmup_epochs = 0;
  auto path = run_pretraining(c, samples(), *codebook_, {dir, std::nullopt});
  std::ifstream in(dir / "metrics.jsonl");
  int lines = 0;
  for (std::string line; std::getline(in, line);) {
    EXPECT_NE(line.find("\"L_c\""), std::string::npos);
    ++lines;
  }
  EXPECT_EQ(lines, 3);
  auto info = read_checkpoint_info(path);
  EXPECT_EQ(info.step, 3);
  EXPECT_EQ(info.config_hash, c.hash());
  auto encoder = load_encoder(path);
  EXPECT_EQ(encoder->config().dim, c.vit().dim);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace lego::trainer
