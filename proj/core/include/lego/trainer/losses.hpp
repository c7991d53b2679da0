#pragma once

#include <torch/torch.h>

namespace lego::trainer {

struct LossBundle {
  double contrastive = 0.0;     // L_c
  double masked = 0.0;          // L_m
  double rearrangement = 0.0;   // L_r
  double total = 0.0;
};

// L_c + alpha * L_m + beta * L_r. Throws DivergenceError naming the first
// non-finite task loss.
double combine_losses(double contrastive, double masked, double rearrangement, double alpha, double beta);
torch::Tensor combine_losses(const torch::Tensor& contrastive, const torch::Tensor& masked,
                             const torch::Tensor& rearrangement, double alpha, double beta);

}  // namespace lego::trainer
