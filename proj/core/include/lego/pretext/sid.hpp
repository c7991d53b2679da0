#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <torch/torch.h>

#include "lego/rng.hpp"

namespace lego::pretext {

inline constexpr int kTopPositives = 5;

// Splits the token grid into 8 horizontal frames (bands of columns) and
// averages each one. tokens: [B, gh*gw, D] -> [B, 8, D].
torch::Tensor instance_map(const torch::Tensor& tokens, int64_t grid_h, int64_t grid_w);

// momentum <- m * momentum + (1 - m) * online, parameter by parameter.
void ema_update(std::vector<torch::Tensor>& momentum, const std::vector<torch::Tensor>& online, double m);
void ema_update(torch::nn::Module& momentum, const torch::nn::Module& online, double m);

// Positions of candidates whose index differs from the anchor's.
std::vector<size_t> filter_negatives(int64_t anchor_index, const std::vector<int64_t>& candidate_indices);

// Picks uniformly among the (up to) five most similar pool entries. Returns
// nullopt for an empty pool, meaning "use the augmented-view positive".
std::optional<size_t> select_positive(const std::vector<double>& pool_similarities, Rng& rng);

// -log( e^{q.k+/tau} / (e^{q.k+/tau} + sum e^{q.k-/tau}) ) for one anchor.
// q, positive: [d]; negatives: [K, d] (K may be 0).
torch::Tensor info_nce(const torch::Tensor& q, const torch::Tensor& positive, const torch::Tensor& negatives,
                       double tau);

struct SidStats {
  int64_t anchors = 0;
  int64_t substituted_positives = 0;  // anchors whose positive came from another image
  double mean_negatives = 0.0;
};

struct SidResult {
  torch::Tensor loss;
  SidStats stats;
  // Chosen positive column (into the flattened [B*8] key set) per anchor row.
  std::vector<int64_t> positive_column;
  // [B*8, B*8] bool: negatives used by each anchor.
  torch::Tensor negative_mask;
};

// Batched selective discrimination for one direction.
//   q:       [B, 8, d] online predictions
//   k:       [B, 8, d] momentum projections (no gradient needed)
//   indices: [B, 8] codebook slot indices of the source images
// Every q and k row is L2-normalised here. Negatives for anchor (i, f) are all
// key frames of other images with a different index; the positive is one of
// the top-5 same-index key frames of other images, or k[i, f] when there is
// none.
SidResult sid_loss(const torch::Tensor& q, const torch::Tensor& k, const torch::Tensor& indices, double tau,
                   uint64_t seed);

}  // namespace lego::pretext
