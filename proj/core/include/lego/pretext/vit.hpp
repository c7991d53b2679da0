#pragma once

#include <cstdint>

#include <torch/torch.h>

#include "lego/common.hpp"

namespace lego::pretext {

struct ViTConfig {
  int64_t image_h = kHeight;
  int64_t image_w = kWidth;
  int64_t patch_h = 4;
  int64_t patch_w = 8;
  int64_t dim = 384;
  int64_t depth = 12;
  int64_t heads = 6;
  double mlp_ratio = 4.0;

  int64_t grid_h() const { return image_h / patch_h; }
  int64_t grid_w() const { return image_w / patch_w; }
  int64_t num_tokens() const { return grid_h() * grid_w(); }
  int64_t patch_pixels() const { return kChannels * patch_h * patch_w; }
  void validate() const;

  // 12 blocks, 6 heads, width 384.
  static ViTConfig small();
  // Reduced encoder for single-core experiments and tests.
  static ViTConfig desk();
  static ViTConfig tiny();
};

class MultiHeadSelfAttentionImpl : public torch::nn::Module {
 public:
  MultiHeadSelfAttentionImpl(int64_t dim, int64_t heads);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  int64_t heads_;
  torch::nn::Linear qkv_{nullptr}, proj_{nullptr};
};
TORCH_MODULE(MultiHeadSelfAttention);

class TransformerBlockImpl : public torch::nn::Module {
 public:
  TransformerBlockImpl(int64_t dim, int64_t heads, double mlp_ratio);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::LayerNorm norm1_{nullptr}, norm2_{nullptr};
  MultiHeadSelfAttention attn_{nullptr};
  torch::nn::Linear fc1_{nullptr}, fc2_{nullptr};
};
TORCH_MODULE(TransformerBlock);

// Plain ViT without class token. Tokens are laid out row-major over the
// (grid_h × grid_w) patch grid.
class ViTEncoderImpl : public torch::nn::Module {
 public:
  explicit ViTEncoderImpl(const ViTConfig& config, uint64_t seed = 0);

  // [B,3,H,W] -> patch embeddings [B,T,D] (no position information yet).
  torch::Tensor embed(const torch::Tensor& images);
  // Adds position embeddings and runs the blocks: [B,T,D] -> [B,T,D].
  torch::Tensor encode(const torch::Tensor& tokens);
  torch::Tensor forward(const torch::Tensor& images) { return encode(embed(images)); }

  const ViTConfig& config() const { return config_; }

 private:
  ViTConfig config_;
  torch::nn::Conv2d patch_embed_{nullptr};
  torch::Tensor pos_embed_;
  torch::nn::ModuleList blocks_;
  torch::nn::LayerNorm norm_{nullptr};
};
TORCH_MODULE(ViTEncoder);

// Two- or three-layer perceptron with GELU between layers.
class MlpImpl : public torch::nn::Module {
 public:
  MlpImpl(int64_t in, int64_t hidden, int64_t out, int layers);
  torch::Tensor forward(torch::Tensor x);

 private:
  torch::nn::ModuleList layers_;
};
TORCH_MODULE(Mlp);

// Mean of the tokens falling in each of `bands` equal-width vertical strips
// of the token grid (all rows). tokens: [B, gh*gw, D] -> [B, bands, D].
torch::Tensor banded_mean(const torch::Tensor& tokens, int64_t grid_h, int64_t grid_w, int64_t bands);

}  // namespace lego::pretext
