#pragma once

#include <functional>
#include <vector>

#include "lego/corpus/render.hpp"
#include "lego/tvqvae/model.hpp"

namespace lego::tvqvae {

struct TrainOptions {
  int epochs = 30;
  int batch_size = 64;
  double lr = 1e-3;
  double weight_decay = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.95;
  uint64_t seed = 0;
  bool reseed_dead_codes = true;
  size_t min_corpus = 100;
};

struct EpochStats {
  int epoch = 0;
  double reconstruction = 0.0;  // pixel + perceptual, mean over batches
  double pixel = 0.0;
  double perceptual = 0.0;
  double codebook = 0.0;
  double commitment = 0.0;
  double utilization = 0.0;  // fraction of the N indices selected at least once
  int reseeded = 0;
};

using EpochCallback = std::function<void(const EpochStats&)>;

// Trains in place and freezes the model. Throws DivergenceError on a NaN loss.
std::vector<EpochStats> train_tvqvae(TvqvaeModel& model, const std::vector<corpus::TextSample>& corpus,
                                     const TrainOptions& options, const EpochCallback& on_epoch = {});

}  // namespace lego::tvqvae
