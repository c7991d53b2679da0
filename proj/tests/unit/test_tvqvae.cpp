#include <filesystem>
#include <random>

#include <gtest/gtest.h>

#include "gradcheck.hpp"
#include "lego/corpus/dataset.hpp"
#include "lego/tvqvae/codebook_file.hpp"
#include "lego/tvqvae/model.hpp"
#include "lego/tvqvae/train.hpp"
#include "lego/binary_io.hpp"
#include "oracles.hpp"

namespace lego::tvqvae {
namespace {

namespace F = torch::nn::functional;

TvqvaeConfig small_config() {
  TvqvaeConfig cfg;
  cfg.hidden = 32;
  cfg.depth = 2;
  cfg.dim = 16;
  cfg.codebook_size = 32;
  cfg.decoder_hidden = 32;
  return cfg;
}

TEST(Quantizer, HandExamples) {
  auto cb = torch::tensor({0.0, 0.0, 3.0, 4.0}).view({2, 2});
  EXPECT_EQ(nearest_indices(torch::tensor({1.0, 1.0}).view({1, 2}), cb).item<int64_t>(), 0);
  auto sym = torch::tensor({1.0, 0.0, -1.0, 0.0}).view({2, 2});
  EXPECT_EQ(nearest_indices(torch::zeros({1, 2}, torch::kFloat64), sym).item<int64_t>(), 0);

  auto gen = at::make_generator<at::CPUGeneratorImpl>(3);
  auto table = torch::randn({8, 4}, gen);
  auto q = quantize(table[5].view({1, 4}), table);
  EXPECT_EQ(q.z.item<int64_t>(), 5);
  EXPECT_TRUE(torch::equal(q.x_q[0], table[5]));
}

TEST(Quantizer, MatchesBruteForceIncludingTies) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 30), d = 1 + static_cast<int>(rng() % 6);
    std::vector<std::vector<double>> cb(n, std::vector<double>(d));
    for (auto& row : cb)
      for (auto& v : row) v = std::round(normal(rng) * 2) / 2;  // coarse grid makes ties common
    if (trial % 3 == 0) cb[n - 1] = cb[rng() % (n - 1)];
    std::vector<double> x(d);
    for (auto& v : x) v = std::round(normal(rng) * 2) / 2;
    auto table = torch::empty({n, d}, torch::kFloat64);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < d; ++j) table[i][j] = cb[i][j];
    auto xt = torch::tensor(x, torch::kFloat64).view({1, d});
    ASSERT_EQ(nearest_indices(xt, table).item<int64_t>(), testing::brute_nearest(x, cb)) << "trial " << trial;
  }
}

TEST(Quantizer, Idempotent) {
  auto gen = at::make_generator<at::CPUGeneratorImpl>(5);
  auto table = torch::randn({16, 8}, gen);
  auto x = torch::randn({2, 1, 8, 8}, gen);
  auto first = quantize(x, table);
  auto second = quantize(first.x_q, table);
  EXPECT_TRUE(torch::equal(first.z, second.z));
}

TEST(StraightThrough, EncoderGradientEqualsDecoderGradient) {
  auto gen = at::make_generator<at::CPUGeneratorImpl>(8);
  for (int trial = 0; trial < 20; ++trial) {
    auto table = torch::randn({16, 4}, gen);
    auto x_c = torch::randn({3, 4}, gen).requires_grad_(true);
    auto q = quantize(x_c.detach(), table);
    auto y = straight_through(x_c, q.x_q);
    EXPECT_TRUE(torch::equal(y, q.x_q));
    y.retain_grad();
    auto w = torch::randn({3, 4}, gen);
    (w * y * y).sum().backward();
    EXPECT_TRUE(torch::equal(x_c.grad(), y.grad()));
  }
}

TEST(TEncoder, PerPatchIndependence) {
  auto cfg = small_config();
  TvqvaeModel model(cfg, 1);
  auto gen = at::make_generator<at::CPUGeneratorImpl>(2);
  torch::NoGradGuard no_grad;
  auto image = torch::rand({1, 3, 32, 128}, gen);
  auto changed = image.clone();
  changed.index_put_({0, torch::indexing::Slice(), torch::indexing::Slice(),
                      torch::indexing::Slice(48, 64)},
                     torch::rand({3, 32, 16}, gen));
  auto a = model->encoder()->features(image);
  auto b = model->encoder()->features(changed);
  ASSERT_EQ(a.sizes(), torch::IntArrayRef({1, 1, 8, cfg.dim}));
  for (int64_t j = 0; j < 8; ++j) {
    const bool same = torch::equal(a[0][0][j], b[0][0][j]);
    EXPECT_EQ(same, j != 3) << "cell " << j;
  }
}

TEST(InstanceNorm, ConstantImageGivesZeros) {
  TvqvaeModel model(small_config(), 1);
  torch::NoGradGuard no_grad;
  auto x_c = model->t_encode(torch::zeros({1, 3, 32, 128}));
  EXPECT_EQ(x_c.abs().max().item<float>(), 0.0f);
}

TEST(InstanceNorm, MatchesLoopOracleAndStandardises) {
  auto gen = at::make_generator<at::CPUGeneratorImpl>(4);
  auto x = torch::randn({3, 2, 4, 5}, gen) * 3 + 1;
  auto out = instance_norm(x, 1e-5);
  auto ref = testing::instance_norm_loops(x, 1e-5);
  EXPECT_LT((out.to(torch::kFloat64) - ref).abs().max().item<double>(), 1e-6);
  auto mean = out.mean({1, 2});
  auto stdev = out.to(torch::kFloat64).var({1, 2}, /*unbiased=*/false).sqrt();
  EXPECT_LT(mean.abs().max().item<float>(), 1e-4);
  EXPECT_LT((stdev - 1).abs().max().item<double>(), 1e-3);
}

TEST(Model, ShapesDeterminismAndLossSigns) {
  TvqvaeModel model(small_config(), 3);
  auto gen = at::make_generator<at::CPUGeneratorImpl>(6);
  auto images = torch::rand({2, 3, 32, 128}, gen);
  auto r = model->forward(images);
  EXPECT_EQ(r.reconstruction.sizes(), images.sizes());
  EXPECT_TRUE(torch::equal(model->decode(r.quantized.x_q), model->decode(r.quantized.x_q)));
  for (auto& t : {r.loss.pixel, r.loss.perceptual, r.loss.codebook, r.loss.commitment, r.loss.total}) {
    EXPECT_GE(t.item<double>(), 0.0);
  }
  EXPECT_EQ(tvqvae_loss(images, images, model->perceptual()).item<double>(), 0.0);
}

TEST(Model, PixelTermMatchesSumOfSquares) {
  TvqvaeConfig cfg;
  cfg.image_h = 4;
  cfg.image_w = 4;
  cfg.patch_h = 2;
  cfg.patch_w = 2;
  cfg.hidden = 4;
  cfg.depth = 1;
  cfg.dim = 4;
  cfg.codebook_size = 4;
  cfg.decoder_hidden = 4;
  TvqvaeModel model(cfg, 9);
  model->to_dtype(torch::kFloat64);
  auto gen = at::make_generator<at::CPUGeneratorImpl>(10);
  auto image = torch::rand({1, 3, 4, 4}, gen, torch::kFloat64);
  auto r = model->forward(image);
  auto g = r.reconstruction.accessor<double, 4>();
  auto t = image.accessor<double, 4>();
  double sum = 0.0;
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) sum += (g[0][c][i][j] - t[0][c][i][j]) * (g[0][c][i][j] - t[0][c][i][j]);
  EXPECT_NEAR(r.loss.pixel.item<double>(), sum / 48.0, 1e-6);
}

TEST(Model, FiniteDifferenceGradient) {
  for (uint64_t seed : {1u, 2u}) {
    auto r = testing::check_tvqvae_loss(seed);
    EXPECT_GT(r.coordinates, 100);
    EXPECT_LT(r.relative_error, 1e-4) << "seed " << seed;
  }
}

TEST(CodebookFile, RoundTripAndCorruption) {
  TvqvaeModel model(small_config(), 12);
  auto dir = std::filesystem::temp_directory_path() / "lego_codebook_file_test";
  std::filesystem::create_directories(dir);
  auto path = dir / "codebook.bin";
  save_codebook_file(*model, path);
  auto loaded = load_codebook_file(path);
  EXPECT_TRUE(loaded->frozen());
  EXPECT_TRUE(torch::equal(loaded->embeddings(), model->embeddings()));
  auto gen = at::make_generator<at::CPUGeneratorImpl>(13);
  auto images = torch::rand({2, 3, 32, 128}, gen);
  torch::NoGradGuard no_grad;
  EXPECT_TRUE(torch::equal(loaded->t_encode(images), model->t_encode(images)));
  EXPECT_EQ(codebook_file_hash(path), codebook_file_hash(path));

  auto bytes = read_file(path);
  bytes[bytes.size() / 2] ^= 0x01;
  write_file_atomic(path, bytes);
  EXPECT_THROW(load_codebook_file(path), IoError);
  std::filesystem::remove_all(dir);
}

TEST(Train, RejectsSmallCorpusAndFreezes) {
  TvqvaeModel model(small_config(), 14);
  auto tiny = corpus::generate_samples({"ab", "cd"}, 10, 1);
  TrainOptions options;
  EXPECT_THROW(train_tvqvae(model, tiny, options), ValidationError);

  auto corpus = corpus::generate_samples(corpus::default_wordlist(), 100, 2);
  options.epochs = 2;
  options.batch_size = 50;
  auto stats = train_tvqvae(model, corpus, options);
  ASSERT_EQ(stats.size(), 2u);
  for (const auto& s : stats) {
    EXPECT_TRUE(std::isfinite(s.reconstruction));
    EXPECT_GT(s.utilization, 0.0);
    EXPECT_LE(s.utilization, 1.0);
  }
  EXPECT_TRUE(model->frozen());
  for (const auto& p : model->parameters()) EXPECT_FALSE(p.requires_grad());
}

}  // namespace
}  // namespace lego::tvqvae
