#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "lego/corpus/sr_pair.hpp"
#include "lego/downstream/report.hpp"
#include "lego/pretext/vit.hpp"

namespace lego::downstream {

struct SrOptions {
  int64_t epochs = 50;
  int64_t batch_size = 32;
  double lr = 1e-3;
  double weight_decay = 0.0;
  bool train_encoder = true;
  uint64_t seed = 0;
};

// Bicubic upsample -> ViT -> per-token pixel projection -> three 3x3 convs
// predicting a residual over the bicubic image -> clamp to [0,1].
class SrModelImpl : public torch::nn::Module {
 public:
  SrModelImpl(pretext::ViTEncoder encoder, int64_t channels = 32, uint64_t seed = 0);

  // lr: [B,3,16,64] -> [B,3,32,128]
  torch::Tensor forward(const torch::Tensor& lr);
  pretext::ViTEncoder& encoder() { return encoder_; }

 private:
  pretext::ViTEncoder encoder_;
  torch::nn::Linear to_pixels_{nullptr};
  torch::nn::Conv2d conv1_{nullptr}, conv2_{nullptr}, conv3_{nullptr};
};
TORCH_MODULE(SrModel);

torch::Tensor stack_lr(const std::vector<corpus::SRPair>& pairs);
torch::Tensor stack_hr(const std::vector<corpus::SRPair>& pairs);

// Minimises pixel MSE against the HR images. Returns the mean loss per epoch.
std::vector<double> sr_finetune(SrModel& model, const std::vector<corpus::SRPair>& pairs, const SrOptions& options);

torch::Tensor sr_predict(SrModel& model, const torch::Tensor& lr);
// Model metrics plus the bicubic baseline on the same pairs.
EvalReport evaluate_sr(SrModel& model, const std::vector<corpus::SRPair>& pairs, const std::string& split);

}  // namespace lego::downstream
