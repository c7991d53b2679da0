#pragma once

#include <cstdint>
#include <vector>

#include <torch/torch.h>

#include "lego/common.hpp"
#include "lego/rng.hpp"

namespace lego::pretext {

inline constexpr size_t kMaxValidLabels = 64;

using Labeling = std::vector<int>;

struct PermutationInstance {
  int n = 0;
  // order[j] = original position of the portion placed at slot j.
  std::vector<int> order;
  // Accepted answers; valid_labels[0] is the true labeling (== order).
  std::vector<Labeling> valid_labels;
  Image shuffled;
};

// All labelings reachable from the true one by exchanging labels among
// portions that share a codebook index. portion_indices is in original order.
// Enumerates index-preserving permutations lexicographically and stops at `cap`.
std::vector<Labeling> valid_orders(const std::vector<int64_t>& portion_indices, const std::vector<int>& order,
                                   size_t cap = kMaxValidLabels);

// Cuts the image into n equal vertical strips and shuffles them.
// portion_indices must hold one codebook index per portion.
PermutationInstance make_permutation(const Image& image, const std::vector<int64_t>& portion_indices, int n,
                                     Rng& rng);

// Two Mixer layers (token MLP, then channel MLP; pre-norm, residual) and a
// per-portion n-way position classifier.
class MixerRankHeadImpl : public torch::nn::Module {
 public:
  MixerRankHeadImpl(int64_t portions, int64_t dim, int64_t token_hidden, int64_t channel_hidden,
                    uint64_t seed = 0);
  // [B, n, D] -> logits [B, n, n]
  torch::Tensor forward(const torch::Tensor& portion_features);

 private:
  int64_t portions_;
  torch::nn::ModuleList token_norms_, token_mlps_, channel_norms_, channel_mlps_;
  torch::nn::LayerNorm norm_{nullptr};
  torch::nn::Linear classifier_{nullptr};
};
TORCH_MODULE(MixerRankHead);

// Per sample: minimum over accepted labelings of the mean per-portion
// cross-entropy; averaged over the batch.
torch::Tensor rtr_loss(const torch::Tensor& logits, const std::vector<std::vector<Labeling>>& valid_labels);

}  // namespace lego::pretext
