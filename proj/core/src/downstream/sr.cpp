#include "lego/downstream/sr.hpp"

#include <cmath>

#include "lego/common.hpp"
#include "lego/downstream/metrics.hpp"
#include "lego/image_ops.hpp"
#include "lego/nn_init.hpp"
#include "lego/rng.hpp"

namespace lego::downstream {

namespace F = torch::nn::functional;

SrModelImpl::SrModelImpl(pretext::ViTEncoder encoder, int64_t channels, uint64_t seed)
    : encoder_(std::move(encoder)) {
  register_module("encoder", encoder_);
  const auto& v = encoder_->config();
  to_pixels_ = register_module("to_pixels", torch::nn::Linear(v.dim, v.patch_pixels()));
  auto conv = [](int64_t in, int64_t out) { return torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, 3).padding(1)); };
  conv1_ = register_module("conv1", conv(2 * kChannels, channels));
  conv2_ = register_module("conv2", conv(channels, channels));
  conv3_ = register_module("conv3", conv(channels, kChannels));
  init_parameters(*to_pixels_, derive_seed(seed, {1}));
  init_parameters(*conv1_, derive_seed(seed, {2}));
  init_parameters(*conv2_, derive_seed(seed, {3}));
  // Starts as the identity on the bicubic image.
  torch::NoGradGuard no_grad;
  conv3_->weight.zero_();
  conv3_->bias.zero_();
}

torch::Tensor SrModelImpl::forward(const torch::Tensor& lr) {
  if (lr.dim() != 4 || lr.size(1) != kChannels) throw ValidationError("sr input must be [B,3,h,w]");
  const auto& v = encoder_->config();
  auto up = bicubic_resize(lr, v.image_h, v.image_w);
  const int64_t b = up.size(0);
  auto patches = to_pixels_->forward(encoder_->forward(up));  // [B,T,3*ph*pw]
  auto image = F::fold(patches.transpose(1, 2),
                       F::FoldFuncOptions({v.image_h, v.image_w}, {v.patch_h, v.patch_w}).stride({v.patch_h, v.patch_w}));
  auto x = torch::cat({image.view({b, kChannels, v.image_h, v.image_w}), up}, 1);
  x = torch::gelu(conv1_->forward(x));
  x = torch::gelu(conv2_->forward(x));
  return (up + conv3_->forward(x)).clamp(0.0, 1.0);
}

torch::Tensor stack_lr(const std::vector<corpus::SRPair>& pairs) {
  std::vector<torch::Tensor> t;
  for (const auto& p : pairs) t.push_back(p.lr);
  return torch::stack(t);
}

torch::Tensor stack_hr(const std::vector<corpus::SRPair>& pairs) {
  std::vector<torch::Tensor> t;
  for (const auto& p : pairs) t.push_back(p.hr);
  return torch::stack(t);
}

std::vector<double> sr_finetune(SrModel& model, const std::vector<corpus::SRPair>& pairs, const SrOptions& options) {
  if (pairs.empty()) throw ValidationError("empty SR training set");
  for (auto& p : model->encoder()->parameters()) p.requires_grad_(options.train_encoder);
  std::vector<torch::Tensor> params;
  for (auto& p : model->parameters()) {
    if (p.requires_grad()) params.push_back(p);
  }
  torch::optim::AdamW optimizer(params, torch::optim::AdamWOptions(options.lr).weight_decay(options.weight_decay));
  const auto lr_all = stack_lr(pairs);
  const auto hr_all = stack_hr(pairs);
  const size_t n = pairs.size();
  std::vector<double> history;
  model->train();
  for (int64_t epoch = 0; epoch < options.epochs; ++epoch) {
    Rng rng(derive_seed(options.seed, {0x7372, static_cast<uint64_t>(epoch)}));
    const auto perm = rng.permutation(static_cast<int>(n));
    double sum = 0.0;
    int64_t batches = 0;
    for (size_t begin = 0; begin < n; begin += options.batch_size) {
      const size_t end = std::min(n, begin + static_cast<size_t>(options.batch_size));
      auto index = torch::tensor(std::vector<int64_t>(perm.begin() + begin, perm.begin() + end), torch::kInt64);
      optimizer.zero_grad();
      auto loss = F::mse_loss(model->forward(lr_all.index_select(0, index)), hr_all.index_select(0, index));
      if (!std::isfinite(loss.item<double>())) throw DivergenceError("SR loss is not finite");
      loss.backward();
      optimizer.step();
      sum += loss.item<double>();
      ++batches;
    }
    history.push_back(sum / static_cast<double>(batches));
  }
  return history;
}

torch::Tensor sr_predict(SrModel& model, const torch::Tensor& lr) {
  torch::NoGradGuard no_grad;
  std::vector<torch::Tensor> out;
  for (int64_t begin = 0; begin < lr.size(0); begin += 64) {
    out.push_back(model->forward(lr.narrow(0, begin, std::min<int64_t>(64, lr.size(0) - begin))));
  }
  return torch::cat(out);
}

EvalReport evaluate_sr(SrModel& model, const std::vector<corpus::SRPair>& pairs, const std::string& split) {
  if (pairs.empty()) throw ValidationError("empty SR evaluation set");
  const auto lr = stack_lr(pairs);
  const auto hr = stack_hr(pairs);
  const auto prediction = sr_predict(model, lr);
  const auto& v = model->encoder()->config();
  const auto bicubic = bicubic_resize(lr, v.image_h, v.image_w);
  EvalReport report;
  report.split = split;
  report.task = "super_resolution";
  report.psnr = mean_psnr(prediction, hr);
  report.ssim = mean_ssim(prediction, hr);
  report.baseline_psnr = mean_psnr(bicubic, hr);
  report.baseline_ssim = mean_ssim(bicubic, hr);
  report.samples = static_cast<int64_t>(pairs.size());
  report.validate();
  return report;
}

}  // namespace lego::downstream
