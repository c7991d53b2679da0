#include "lego/pretext/vit.hpp"

#include <cmath>

#include "lego/nn_init.hpp"
#include "lego/rng.hpp"

namespace lego::pretext {

namespace F = torch::nn::functional;

void ViTConfig::validate() const {
  if (patch_h <= 0 || patch_w <= 0 || image_h % patch_h != 0 || image_w % patch_w != 0) {
    throw ConfigError("ViT patch size must tile the image");
  }
  if (dim <= 0 || heads <= 0 || dim % heads != 0) throw ConfigError("ViT width must be divisible by heads");
  if (depth < 0 || mlp_ratio <= 0.0) throw ConfigError("invalid ViT depth or MLP ratio");
}

ViTConfig ViTConfig::small() { return ViTConfig{}; }

ViTConfig ViTConfig::desk() {
  ViTConfig c;
  c.dim = 64;
  c.depth = 4;
  c.heads = 4;
  c.mlp_ratio = 2.0;
  return c;
}

ViTConfig ViTConfig::tiny() {
  ViTConfig c;
  c.dim = 16;
  c.depth = 1;
  c.heads = 2;
  c.mlp_ratio = 2.0;
  return c;
}

MultiHeadSelfAttentionImpl::MultiHeadSelfAttentionImpl(int64_t dim, int64_t heads) : heads_(heads) {
  qkv_ = register_module("qkv", torch::nn::Linear(dim, 3 * dim));
  proj_ = register_module("proj", torch::nn::Linear(dim, dim));
}

torch::Tensor MultiHeadSelfAttentionImpl::forward(const torch::Tensor& x) {
  const int64_t b = x.size(0), t = x.size(1), d = x.size(2), dh = d / heads_;
  auto qkv = qkv_->forward(x).view({b, t, 3, heads_, dh}).permute({2, 0, 3, 1, 4});
  auto q = qkv[0], k = qkv[1], v = qkv[2];
  auto attn = torch::softmax(torch::matmul(q, k.transpose(-2, -1)) / std::sqrt(static_cast<double>(dh)), -1);
  auto out = torch::matmul(attn, v).transpose(1, 2).reshape({b, t, d});
  return proj_->forward(out);
}

TransformerBlockImpl::TransformerBlockImpl(int64_t dim, int64_t heads, double mlp_ratio) {
  const auto hidden = static_cast<int64_t>(std::llround(dim * mlp_ratio));
  norm1_ = register_module("norm1", torch::nn::LayerNorm(torch::nn::LayerNormOptions({dim})));
  attn_ = register_module("attn", MultiHeadSelfAttention(dim, heads));
  norm2_ = register_module("norm2", torch::nn::LayerNorm(torch::nn::LayerNormOptions({dim})));
  fc1_ = register_module("fc1", torch::nn::Linear(dim, hidden));
  fc2_ = register_module("fc2", torch::nn::Linear(hidden, dim));
}

torch::Tensor TransformerBlockImpl::forward(const torch::Tensor& x) {
  auto h = x + attn_->forward(norm1_->forward(x));
  return h + fc2_->forward(F::gelu(fc1_->forward(norm2_->forward(h))));
}

ViTEncoderImpl::ViTEncoderImpl(const ViTConfig& config, uint64_t seed) : config_(config) {
  config_.validate();
  patch_embed_ = register_module(
      "patch_embed", torch::nn::Conv2d(torch::nn::Conv2dOptions(kChannels, config_.dim, {config_.patch_h, config_.patch_w})
                                           .stride({config_.patch_h, config_.patch_w})));
  pos_embed_ = register_parameter("pos_embed", torch::zeros({1, config_.num_tokens(), config_.dim}));
  for (int64_t i = 0; i < config_.depth; ++i) {
    blocks_->push_back(TransformerBlock(config_.dim, config_.heads, config_.mlp_ratio));
  }
  register_module("blocks", blocks_);
  norm_ = register_module("norm", torch::nn::LayerNorm(torch::nn::LayerNormOptions({config_.dim})));
  init_parameters(*this, seed);
  torch::NoGradGuard no_grad;
  pos_embed_.copy_(seeded_normal(pos_embed_.sizes(), 0.02, derive_seed(seed, {0x706f73})));
}

torch::Tensor ViTEncoderImpl::embed(const torch::Tensor& images) {
  if (images.dim() != 4 || images.size(1) != kChannels || images.size(2) != config_.image_h ||
      images.size(3) != config_.image_w) {
    throw ValidationError("ViT expects [B,3," + std::to_string(config_.image_h) + "," +
                          std::to_string(config_.image_w) + "] input");
  }
  return patch_embed_->forward(images).flatten(2).transpose(1, 2);
}

torch::Tensor ViTEncoderImpl::encode(const torch::Tensor& tokens) {
  auto x = tokens + pos_embed_;
  for (const auto& block : *blocks_) x = block->as<TransformerBlock>()->forward(x);
  return norm_->forward(x);
}

MlpImpl::MlpImpl(int64_t in, int64_t hidden, int64_t out, int layers) {
  if (layers < 1) throw ConfigError("MLP needs at least one layer");
  int64_t width = in;
  for (int i = 0; i < layers; ++i) {
    const int64_t next = (i + 1 == layers) ? out : hidden;
    layers_->push_back(torch::nn::Linear(width, next));
    width = next;
  }
  register_module("layers", layers_);
}

torch::Tensor MlpImpl::forward(torch::Tensor x) {
  const size_t n = layers_->size();
  for (size_t i = 0; i < n; ++i) {
    x = layers_[i]->as<torch::nn::Linear>()->forward(x);
    if (i + 1 < n) x = F::gelu(x);
  }
  return x;
}

torch::Tensor banded_mean(const torch::Tensor& tokens, int64_t grid_h, int64_t grid_w, int64_t bands) {
  if (bands <= 0 || grid_w % bands != 0) {
    throw ConfigError("grid width " + std::to_string(grid_w) + " is not divisible by " + std::to_string(bands));
  }
  if (tokens.dim() != 3 || tokens.size(1) != grid_h * grid_w) {
    throw ValidationError("token count does not match the grid");
  }
  const int64_t b = tokens.size(0), d = tokens.size(2);
  return tokens.view({b, grid_h, bands, grid_w / bands, d}).mean({1, 3});
}

}  // namespace lego::pretext
