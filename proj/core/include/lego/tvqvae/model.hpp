#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>

#include <torch/torch.h>

#include "lego/common.hpp"

namespace lego::tvqvae {

struct TvqvaeConfig {
  int64_t image_h = kHeight;
  int64_t image_w = kWidth;
  int64_t patch_h = 32;  // r1
  int64_t patch_w = 16;  // r2
  int64_t hidden = 384;  // width of the residual linear blocks
  int64_t depth = 4;     // number of residual linear blocks
  int64_t dim = 384;     // C == D, feature and codebook embedding dimension
  int64_t codebook_size = 512;  // N
  int64_t decoder_hidden = 384;
  double in_eps = 1e-5;
  double commitment_weight = 0.25;
  uint64_t perceptual_seed = 20240517;

  int64_t grid_h() const { return image_h / patch_h; }
  int64_t grid_w() const { return image_w / patch_w; }
  void validate() const;
};

// Per-image, per-channel standardisation over the patch grid.
// x: [B, gh, gw, C]. Population variance, eps inside the square root.
torch::Tensor instance_norm(const torch::Tensor& x, double eps);

// Per-patch encoder: a strided convolution cuts non-overlapping r1×r2 patches,
// then residual linear blocks act on every cell independently.
class TEncoderImpl : public torch::nn::Module {
 public:
  explicit TEncoderImpl(const TvqvaeConfig& config);

  // Pre-normalisation features x_f: [B, gh, gw, C].
  torch::Tensor features(const torch::Tensor& images);
  // Content vectors x_c = IN(x_f).
  torch::Tensor forward(const torch::Tensor& images);

 private:
  TvqvaeConfig config_;
  torch::nn::Conv2d patchify_{nullptr};
  torch::nn::ModuleList blocks_;
  torch::nn::Linear out_{nullptr};
};
TORCH_MODULE(TEncoder);

class DecoderImpl : public torch::nn::Module {
 public:
  explicit DecoderImpl(const TvqvaeConfig& config);
  // x_q: [B, gh, gw, D] -> images [B, 3, H, W] in (0, 1).
  torch::Tensor forward(const torch::Tensor& x_q);

 private:
  TvqvaeConfig config_;
  torch::nn::Linear fc1_{nullptr}, fc2_{nullptr};
  torch::nn::Conv2d refine1_{nullptr}, refine2_{nullptr};
};
TORCH_MODULE(Decoder);

// Frozen feature network used by the perceptual term.
class PerceptualExtractor {
 public:
  virtual ~PerceptualExtractor() = default;
  virtual torch::Tensor features(const torch::Tensor& images) = 0;
  virtual void to(torch::ScalarType dtype) = 0;
};

// Default backend: small convolutional network with seeded fixed weights.
std::shared_ptr<PerceptualExtractor> make_fixed_conv_extractor(uint64_t seed);
// Optional backend: any TorchScript module mapping [B,3,H,W] to a feature map
// (for example an exported VGG-16 feature stack).
std::shared_ptr<PerceptualExtractor> load_torchscript_extractor(const std::string& path);

struct QuantizedResult {
  torch::Tensor x_q;  // [..., D], rows copied from the codebook
  torch::Tensor z;    // [...] int64 indices in [0, N)
};

// Brute-force nearest codebook row for each row of x ([M, D]); ties resolve
// to the lowest index. Distances are accumulated in double precision.
torch::Tensor nearest_indices(const torch::Tensor& x, const torch::Tensor& embeddings);

QuantizedResult quantize(const torch::Tensor& x_c, const torch::Tensor& embeddings);

// Forward returns x_q unchanged; backward hands the incoming gradient to x_c
// untouched.
torch::Tensor straight_through(const torch::Tensor& x_c, const torch::Tensor& x_q);

struct LossTerms {
  torch::Tensor pixel;       // mean squared pixel error
  torch::Tensor perceptual;  // mean squared feature error
  torch::Tensor codebook;    // ||sg(x_c) - e_z||^2
  torch::Tensor commitment;  // ||x_c - sg(e_z)||^2
  torch::Tensor total;       // pixel + perceptual + codebook + w * commitment

  torch::Tensor reconstruction() const { return pixel + perceptual; }
};

// Pixel plus perceptual objective on two image batches.
torch::Tensor tvqvae_loss(const torch::Tensor& generated, const torch::Tensor& target,
                          PerceptualExtractor& extractor);

struct ForwardResult {
  torch::Tensor x_f;
  torch::Tensor x_c;
  QuantizedResult quantized;
  torch::Tensor reconstruction;
  LossTerms loss;
};

class TvqvaeModelImpl : public torch::nn::Module {
 public:
  explicit TvqvaeModelImpl(const TvqvaeConfig& config, uint64_t init_seed = 0);

  const TvqvaeConfig& config() const { return config_; }
  TEncoder& encoder() { return encoder_; }
  TEncoder encoder() const { return encoder_; }
  Decoder decoder() const { return decoder_; }
  Decoder& decoder() { return decoder_; }
  torch::Tensor& embeddings() { return embeddings_; }
  const torch::Tensor& embeddings() const { return embeddings_; }
  PerceptualExtractor& perceptual() { return *perceptual_; }
  void set_perceptual(std::shared_ptr<PerceptualExtractor> extractor);

  // images: [B,3,H,W].
  ForwardResult forward(const torch::Tensor& images);
  torch::Tensor decode(const torch::Tensor& x_q);
  torch::Tensor t_encode(const torch::Tensor& images) { return encoder_->forward(images); }

  // Makes every parameter immutable (no grad, eval mode) and records the
  // content hash.
  void freeze();
  bool frozen() const { return frozen_; }
  // SHA-256 over encoder, codebook and decoder state.
  std::string content_hash() const;
  void to_dtype(torch::ScalarType dtype);

 private:
  TvqvaeConfig config_;
  TEncoder encoder_{nullptr};
  Decoder decoder_{nullptr};
  torch::Tensor embeddings_;
  std::shared_ptr<PerceptualExtractor> perceptual_;
  bool frozen_ = false;
};
TORCH_MODULE(TvqvaeModel);

}  // namespace lego::tvqvae
