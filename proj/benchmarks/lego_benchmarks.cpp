#include <benchmark/benchmark.h>

#include "lego/codebook/codebook.hpp"
#include "lego/corpus/dataset.hpp"
#include "lego/downstream/ctc.hpp"
#include "lego/trainer/pretrain.hpp"
#include "lego/tvqvae/model.hpp"

namespace {

using namespace lego;

void BM_NearestIndices(benchmark::State& state) {
  torch::manual_seed(0);
  const auto rows = state.range(0);
  const auto x = torch::randn({rows, 384});
  const auto codebook = torch::randn({512, 384});
  for (auto _ : state) benchmark::DoNotOptimize(tvqvae::nearest_indices(x, codebook));
  state.SetItemsProcessed(state.iterations() * rows);
}
BENCHMARK(BM_NearestIndices)->Arg(8)->Arg(256)->Arg(2048);

const codebook::TextKnowledgeCodebook& random_codebook() {
  static const codebook::TextKnowledgeCodebook cb(tvqvae::TvqvaeModel(tvqvae::TvqvaeConfig{}, 3));
  return cb;
}

void BM_TokenizeBatch(benchmark::State& state) {
  const auto& cb = random_codebook();
  const auto samples = corpus::generate_samples(corpus::default_wordlist(), state.range(0), 1);
  std::vector<Image> images;
  for (const auto& s : samples) images.push_back(s.image);
  const auto batch = torch::stack(images);
  for (auto _ : state) benchmark::DoNotOptimize(cb.tokenize_batch(batch));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_TokenizeBatch)->Arg(1)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_CtcLoss(benchmark::State& state) {
  torch::manual_seed(0);
  const auto logits = torch::randn({64, 16, downstream::num_classes()}, torch::requires_grad());
  std::vector<std::vector<int64_t>> labels(64, downstream::encode_transcript("coffee"));
  for (auto _ : state) {
    auto loss = downstream::ctc_loss(logits, labels);
    loss.backward();
    benchmark::DoNotOptimize(loss);
  }
}
BENCHMARK(BM_CtcLoss)->Unit(benchmark::kMillisecond);

void BM_PretrainStep(benchmark::State& state) {
  const auto& cb = random_codebook();
  trainer::PretrainConfig config;
  config.vit_preset = state.range(0) == 0 ? "tiny" : "desk";
  config.batch_size = 32;
  config.proj_hidden = 512;
  config.pred_hidden = 512;
  config.proj_dim = 128;
  trainer::Pretrainer trainer(config, cb, corpus::generate_samples(corpus::default_wordlist(), 256, 2));
  for (auto _ : state) benchmark::DoNotOptimize(trainer.train_step());
  state.SetLabel(config.vit_preset);
}
BENCHMARK(BM_PretrainStep)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
