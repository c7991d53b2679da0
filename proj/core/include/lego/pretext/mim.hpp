#pragma once

#include <cstdint>
#include <vector>

#include <torch/torch.h>

#include "lego/pretext/vit.hpp"

namespace lego::pretext {

struct MaskPlan {
  std::vector<bool> mask;  // one flag per ViT patch, row-major
  double ratio = 0.75;
  uint64_t seed = 0;

  int64_t masked_count() const;
  torch::Tensor as_tensor() const;  // [T] bool
};

// Exactly round(ratio * total) patches masked, chosen uniformly at random.
MaskPlan make_mask_plan(int64_t total, double ratio, uint64_t seed);

// Replaces masked rows of tokens ([T,D] or [B,T,D]) by mask_token ([D]).
// mask: [T] (shared by the batch) or [B,T] bool.
torch::Tensor apply_mask(const torch::Tensor& tokens, const torch::Tensor& mask, const torch::Tensor& mask_token);

// Multi-head cross-attention: queries from the token features, keys and
// values from the retrieved codebook latents, followed by a residual add.
class CrossAttentionImpl : public torch::nn::Module {
 public:
  CrossAttentionImpl(int64_t dim, int64_t latent_dim, int64_t heads);

  // Attention output before the residual: softmax(Q K^T / sqrt(d_h)) V, projected.
  // features: [B, T, dim]; latents: [B, 8, latent_dim].
  torch::Tensor attend(const torch::Tensor& features, const torch::Tensor& latents);
  torch::Tensor forward(const torch::Tensor& features, const torch::Tensor& latents);

  torch::nn::Linear& q_proj() { return q_; }
  torch::nn::Linear& k_proj() { return k_; }
  torch::nn::Linear& v_proj() { return v_; }
  torch::nn::Linear& out_proj() { return out_; }

 private:
  int64_t dim_, latent_dim_, heads_;
  torch::nn::Linear q_{nullptr}, k_{nullptr}, v_{nullptr}, out_{nullptr};
};
TORCH_MODULE(CrossAttention);

// Per-token linear projection to a patch of pixels, folded back to an image.
class PatchDecoderImpl : public torch::nn::Module {
 public:
  explicit PatchDecoderImpl(const ViTConfig& vit);
  // [B, T, D] -> [B, 3, H, W]
  torch::Tensor forward(const torch::Tensor& tokens);

 private:
  ViTConfig vit_;
  torch::nn::Linear proj_{nullptr};
};
TORCH_MODULE(PatchDecoder);

// Pixel-level mask [B,3,H,W] from a patch mask [B,T].
torch::Tensor pixel_mask(const torch::Tensor& patch_mask, const ViTConfig& vit);

// Mean absolute error over masked pixel values; 0 when nothing is masked.
torch::Tensor masked_l1(const torch::Tensor& prediction, const torch::Tensor& target,
                        const torch::Tensor& pixel_mask);

// Learnable mask token, codebook cross-attention blocks and linear decoder.
class MimHeadImpl : public torch::nn::Module {
 public:
  MimHeadImpl(const ViTConfig& vit, int64_t latent_dim, int64_t blocks, uint64_t seed = 0);

  const torch::Tensor& mask_token() const { return mask_token_; }
  // encoded: [B,T,D] ViT output on the masked input; latents: [B,8,latent_dim].
  torch::Tensor forward(const torch::Tensor& encoded, const torch::Tensor& latents);

 private:
  torch::Tensor mask_token_;
  torch::nn::ModuleList cross_;
  PatchDecoder decoder_{nullptr};
};
TORCH_MODULE(MimHead);

}  // namespace lego::pretext
