#include "lego/trainer/losses.hpp"

#include <cmath>

#include "lego/common.hpp"

namespace lego::trainer {

namespace {

void require_finite(double v, const char* task) {
  if (!std::isfinite(v)) throw DivergenceError(std::string("non-finite ") + task + " loss");
}

}  // namespace

double combine_losses(double contrastive, double masked, double rearrangement, double alpha, double beta) {
  require_finite(contrastive, "SID (L_c)");
  require_finite(masked, "MIM (L_m)");
  require_finite(rearrangement, "RTR (L_r)");
  return contrastive + alpha * masked + beta * rearrangement;
}

torch::Tensor combine_losses(const torch::Tensor& contrastive, const torch::Tensor& masked,
                             const torch::Tensor& rearrangement, double alpha, double beta) {
  require_finite(contrastive.item<double>(), "SID (L_c)");
  require_finite(masked.item<double>(), "MIM (L_m)");
  require_finite(rearrangement.item<double>(), "RTR (L_r)");
  return contrastive + alpha * masked + beta * rearrangement;
}

}  // namespace lego::trainer
