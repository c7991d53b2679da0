#include "lego/pretext/mim.hpp"

#include <cmath>

#include "lego/nn_init.hpp"
#include "lego/rng.hpp"

namespace lego::pretext {

int64_t MaskPlan::masked_count() const {
  int64_t n = 0;
  for (bool m : mask) n += m;
  return n;
}

torch::Tensor MaskPlan::as_tensor() const {
  auto t = torch::zeros({static_cast<int64_t>(mask.size())}, torch::kBool);
  auto a = t.accessor<bool, 1>();
  for (size_t i = 0; i < mask.size(); ++i) a[i] = mask[i];
  return t;
}

MaskPlan make_mask_plan(int64_t total, double ratio, uint64_t seed) {
  if (!(ratio >= 0.0 && ratio <= 1.0)) throw ValidationError("mask ratio must be in [0, 1]");
  if (total < 0) throw ValidationError("patch count must be non-negative");
  const auto count = static_cast<int>(std::llround(ratio * static_cast<double>(total)));
  MaskPlan plan;
  plan.ratio = ratio;
  plan.seed = seed;
  plan.mask.assign(total, false);
  Rng rng(derive_seed(seed, {0x6d61736b}));
  for (int i : rng.choose(static_cast<int>(total), count)) plan.mask[i] = true;
  return plan;
}

torch::Tensor apply_mask(const torch::Tensor& tokens, const torch::Tensor& mask, const torch::Tensor& mask_token) {
  if (mask.dim() < 1 || mask.dim() + 1 > tokens.dim() || mask.size(-1) != tokens.size(-2)) {
    throw ValidationError("mask does not match token layout");
  }
  return torch::where(mask.unsqueeze(-1), mask_token.to(tokens.scalar_type()).expand_as(tokens), tokens);
}

CrossAttentionImpl::CrossAttentionImpl(int64_t dim, int64_t latent_dim, int64_t heads)
    : dim_(dim), latent_dim_(latent_dim), heads_(heads) {
  if (heads <= 0 || dim % heads != 0) throw ConfigError("cross-attention width must be divisible by heads");
  q_ = register_module("q", torch::nn::Linear(dim, dim));
  k_ = register_module("k", torch::nn::Linear(latent_dim, dim));
  v_ = register_module("v", torch::nn::Linear(latent_dim, dim));
  out_ = register_module("out", torch::nn::Linear(dim, dim));
}

torch::Tensor CrossAttentionImpl::attend(const torch::Tensor& features, const torch::Tensor& latents) {
  if (features.dim() != 3 || latents.dim() != 3 || features.size(0) != latents.size(0) ||
      features.size(2) != dim_ || latents.size(2) != latent_dim_) {
    throw ValidationError("cross-attention expects features [B,T," + std::to_string(dim_) + "] and latents [B,S," +
                          std::to_string(latent_dim_) + "]");
  }
  const int64_t b = features.size(0), t = features.size(1), s = latents.size(1), dh = dim_ / heads_;
  auto q = q_->forward(features).view({b, t, heads_, dh}).transpose(1, 2);
  auto k = k_->forward(latents).view({b, s, heads_, dh}).transpose(1, 2);
  auto v = v_->forward(latents).view({b, s, heads_, dh}).transpose(1, 2);
  auto attn = torch::softmax(torch::matmul(q, k.transpose(-2, -1)) / std::sqrt(static_cast<double>(dh)), -1);
  return out_->forward(torch::matmul(attn, v).transpose(1, 2).reshape({b, t, dim_}));
}

torch::Tensor CrossAttentionImpl::forward(const torch::Tensor& features, const torch::Tensor& latents) {
  return features + attend(features, latents);
}

PatchDecoderImpl::PatchDecoderImpl(const ViTConfig& vit) : vit_(vit) {
  proj_ = register_module("proj", torch::nn::Linear(vit.dim, vit.patch_pixels()));
}

torch::Tensor PatchDecoderImpl::forward(const torch::Tensor& tokens) {
  const int64_t b = tokens.size(0), gh = vit_.grid_h(), gw = vit_.grid_w();
  return proj_->forward(tokens)
      .view({b, gh, gw, kChannels, vit_.patch_h, vit_.patch_w})
      .permute({0, 3, 1, 4, 2, 5})
      .reshape({b, kChannels, vit_.image_h, vit_.image_w});
}

torch::Tensor pixel_mask(const torch::Tensor& patch_mask, const ViTConfig& vit) {
  const int64_t b = patch_mask.size(0);
  return patch_mask.view({b, 1, vit.grid_h(), 1, vit.grid_w(), 1})
      .expand({b, kChannels, vit.grid_h(), vit.patch_h, vit.grid_w(), vit.patch_w})
      .reshape({b, kChannels, vit.image_h, vit.image_w});
}

torch::Tensor masked_l1(const torch::Tensor& prediction, const torch::Tensor& target,
                        const torch::Tensor& pixel_mask) {
  if (prediction.sizes() != target.sizes() || pixel_mask.sizes() != target.sizes()) {
    throw ValidationError("masked L1 operands differ in shape");
  }
  const auto weight = pixel_mask.to(prediction.scalar_type());
  const auto count = weight.sum();
  if (count.item<double>() == 0.0) return (prediction * 0.0).sum();
  return ((prediction - target).abs() * weight).sum() / count;
}

MimHeadImpl::MimHeadImpl(const ViTConfig& vit, int64_t latent_dim, int64_t blocks, uint64_t seed) {
  if (blocks < 1) throw ConfigError("MIM head needs at least one cross-attention block");
  mask_token_ = register_parameter("mask_token", torch::zeros({vit.dim}));
  for (int64_t i = 0; i < blocks; ++i) cross_->push_back(CrossAttention(vit.dim, latent_dim, vit.heads));
  register_module("cross", cross_);
  decoder_ = register_module("decoder", PatchDecoder(vit));
  init_parameters(*this, seed);
  torch::NoGradGuard no_grad;
  mask_token_.copy_(seeded_normal({vit.dim}, 0.02, derive_seed(seed, {0x746f6b})));
}

torch::Tensor MimHeadImpl::forward(const torch::Tensor& encoded, const torch::Tensor& latents) {
  auto x = encoded;
  for (const auto& block : *cross_) x = block->as<CrossAttention>()->forward(x, latents);
  return decoder_->forward(x);
}

}  // namespace lego::pretext
