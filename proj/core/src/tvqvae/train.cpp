#include "lego/tvqvae/train.hpp"

#include <cmath>

#include "lego/rng.hpp"

namespace lego::tvqvae {

namespace {

torch::Tensor gather_batch(const std::vector<corpus::TextSample>& corpus, const std::vector<int>& order,
                           size_t begin, size_t end) {
  std::vector<torch::Tensor> images;
  images.reserve(end - begin);
  for (size_t i = begin; i < end; ++i) images.push_back(corpus[order[i]].image);
  return torch::stack(images);
}

}  // namespace

std::vector<EpochStats> train_tvqvae(TvqvaeModel& model, const std::vector<corpus::TextSample>& corpus,
                                     const TrainOptions& options, const EpochCallback& on_epoch) {
  if (corpus.size() < options.min_corpus) {
    throw ValidationError("T-VQVAE training needs at least " + std::to_string(options.min_corpus) +
                          " images, got " + std::to_string(corpus.size()));
  }
  if (model->frozen()) throw ConfigError("model is already frozen");
  model->train();

  torch::optim::AdamW optimizer(
      model->parameters(), torch::optim::AdamWOptions(options.lr)
                               .betas({options.beta1, options.beta2})
                               .weight_decay(options.weight_decay));
  const int64_t n_codes = model->config().codebook_size;
  std::vector<EpochStats> history;

  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    Rng rng(derive_seed(options.seed, {0x7476, static_cast<uint64_t>(epoch)}));
    const auto order = rng.permutation(static_cast<int>(corpus.size()));
    std::vector<int64_t> usage(n_codes, 0);
    std::vector<torch::Tensor> recent_content;
    EpochStats stats;
    stats.epoch = epoch;
    int batches = 0;

    for (size_t begin = 0; begin < order.size(); begin += options.batch_size) {
      const size_t end = std::min(order.size(), begin + static_cast<size_t>(options.batch_size));
      auto images = gather_batch(corpus, order, begin, end);
      auto out = model->forward(images);
      const double total = out.loss.total.item<double>();
      if (!std::isfinite(total)) {
        throw DivergenceError("T-VQVAE loss became non-finite at epoch " + std::to_string(epoch) +
                              " (pixel=" + std::to_string(out.loss.pixel.item<double>()) +
                              ", perceptual=" + std::to_string(out.loss.perceptual.item<double>()) +
                              ", codebook=" + std::to_string(out.loss.codebook.item<double>()) + ")");
      }
      optimizer.zero_grad();
      out.loss.total.backward();
      optimizer.step();

      stats.reconstruction += out.loss.reconstruction().item<double>();
      stats.pixel += out.loss.pixel.item<double>();
      stats.perceptual += out.loss.perceptual.item<double>();
      stats.codebook += out.loss.codebook.item<double>();
      stats.commitment += out.loss.commitment.item<double>();
      const auto z = out.quantized.z.flatten();
      const auto* zp = z.data_ptr<int64_t>();
      for (int64_t i = 0; i < z.numel(); ++i) ++usage[zp[i]];
      recent_content.push_back(out.x_c.detach().reshape({-1, model->config().dim}));
      if (recent_content.size() > 4) recent_content.erase(recent_content.begin());
      ++batches;
    }

    stats.reconstruction /= batches;
    stats.pixel /= batches;
    stats.perceptual /= batches;
    stats.codebook /= batches;
    stats.commitment /= batches;
    int64_t used = 0;
    for (auto u : usage) used += (u > 0);
    stats.utilization = static_cast<double>(used) / static_cast<double>(n_codes);

    // Replace codes nobody selected this epoch with recent encoder outputs.
    if (options.reseed_dead_codes && epoch + 1 < options.epochs) {
      auto pool = torch::cat(recent_content);
      torch::NoGradGuard no_grad;
      for (int64_t k = 0; k < n_codes; ++k) {
        if (usage[k] > 0) continue;
        model->embeddings()[k].copy_(pool[static_cast<int64_t>(rng.below(pool.size(0)))]);
        ++stats.reseeded;
      }
    }
    history.push_back(stats);
    if (on_epoch) on_epoch(stats);
  }
  model->freeze();
  return history;
}

}  // namespace lego::tvqvae
