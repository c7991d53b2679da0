#include "lego/tvqvae/model.hpp"

#include <limits>

#include <torch/script.h>

#include "lego/hash.hpp"
#include "lego/binary_io.hpp"
#include "lego/nn_init.hpp"
#include "lego/rng.hpp"

namespace lego::tvqvae {

namespace F = torch::nn::functional;

void TvqvaeConfig::validate() const {
  if (patch_h <= 0 || patch_w <= 0 || image_h % patch_h != 0 || image_w % patch_w != 0) {
    throw ConfigError("image size must be divisible by the patch size");
  }
  if (codebook_size < 2) throw ConfigError("codebook needs at least two entries");
  if (dim <= 0 || hidden <= 0 || depth < 0 || decoder_hidden <= 0) {
    throw ConfigError("T-VQVAE widths must be positive");
  }
}

torch::Tensor instance_norm(const torch::Tensor& x, double eps) {
  auto mean = x.mean({1, 2}, /*keepdim=*/true);
  auto centered = x - mean;
  auto var = centered.pow(2).mean({1, 2}, /*keepdim=*/true);
  return centered / torch::sqrt(var + eps);
}

TEncoderImpl::TEncoderImpl(const TvqvaeConfig& config) : config_(config) {
  config_.validate();
  patchify_ = register_module(
      "patchify", torch::nn::Conv2d(torch::nn::Conv2dOptions(kChannels, config.hidden,
                                                             {config.patch_h, config.patch_w})
                                        .stride({config.patch_h, config.patch_w})));
  for (int64_t i = 0; i < config.depth; ++i) {
    torch::nn::Sequential block(torch::nn::Linear(config.hidden, config.hidden), torch::nn::GELU(),
                                torch::nn::Linear(config.hidden, config.hidden));
    blocks_->push_back(block);
  }
  register_module("blocks", blocks_);
  out_ = register_module("out", torch::nn::Linear(config.hidden, config.dim));
}

torch::Tensor TEncoderImpl::features(const torch::Tensor& images) {
  if (images.dim() != 4 || images.size(1) != kChannels || images.size(2) != config_.image_h ||
      images.size(3) != config_.image_w) {
    throw ValidationError("T-Encoder expects [B,3," + std::to_string(config_.image_h) + "," +
                          std::to_string(config_.image_w) + "] input");
  }
  auto h = patchify_->forward(images).permute({0, 2, 3, 1});
  for (const auto& block : *blocks_) h = h + block->as<torch::nn::Sequential>()->forward(h);
  return out_->forward(h);
}

torch::Tensor TEncoderImpl::forward(const torch::Tensor& images) {
  return instance_norm(features(images), config_.in_eps);
}

DecoderImpl::DecoderImpl(const TvqvaeConfig& config) : config_(config) {
  fc1_ = register_module("fc1", torch::nn::Linear(config.dim, config.decoder_hidden));
  fc2_ = register_module("fc2", torch::nn::Linear(config.decoder_hidden,
                                                  kChannels * config.patch_h * config.patch_w));
  refine1_ = register_module("refine1", torch::nn::Conv2d(torch::nn::Conv2dOptions(3, 16, 3).padding(1)));
  refine2_ = register_module("refine2", torch::nn::Conv2d(torch::nn::Conv2dOptions(16, 3, 3).padding(1)));
}

torch::Tensor DecoderImpl::forward(const torch::Tensor& x_q) {
  const int64_t gh = config_.grid_h(), gw = config_.grid_w();
  if (x_q.dim() != 4 || x_q.size(1) != gh || x_q.size(2) != gw || x_q.size(3) != config_.dim) {
    throw ValidationError("decoder expects [B," + std::to_string(gh) + "," + std::to_string(gw) + "," +
                          std::to_string(config_.dim) + "] input");
  }
  const int64_t b = x_q.size(0);
  auto patches = fc2_->forward(F::gelu(fc1_->forward(x_q)));
  auto logits = patches.view({b, gh, gw, kChannels, config_.patch_h, config_.patch_w})
                    .permute({0, 3, 1, 4, 2, 5})
                    .reshape({b, kChannels, config_.image_h, config_.image_w});
  logits = logits + refine2_->forward(F::gelu(refine1_->forward(logits)));
  return torch::sigmoid(logits);
}

namespace {

class FixedConvExtractor : public PerceptualExtractor {
 public:
  explicit FixedConvExtractor(uint64_t seed)
      : net_(torch::nn::Conv2d(torch::nn::Conv2dOptions(3, 16, 3).padding(1)), torch::nn::GELU(),
             torch::nn::Conv2d(torch::nn::Conv2dOptions(16, 32, 3).stride(2).padding(1)), torch::nn::GELU(),
             torch::nn::Conv2d(torch::nn::Conv2dOptions(32, 32, 3).stride(2).padding(1))) {
    init_parameters(*net_, seed);
    for (auto& p : net_->parameters()) p.requires_grad_(false);
    net_->eval();
  }
  torch::Tensor features(const torch::Tensor& images) override { return net_->forward(images); }
  void to(torch::ScalarType dtype) override { net_->to(dtype); }

 private:
  torch::nn::Sequential net_;
};

class TorchScriptExtractor : public PerceptualExtractor {
 public:
  explicit TorchScriptExtractor(const std::string& path) {
    try {
      module_ = torch::jit::load(path);
    } catch (const c10::Error& e) {
      throw IoError("cannot load perceptual network " + path + ": " + e.what_without_backtrace());
    }
    module_.eval();
    for (auto p : module_.parameters()) p.requires_grad_(false);
  }
  torch::Tensor features(const torch::Tensor& images) override {
    return module_.forward({images}).toTensor();
  }
  void to(torch::ScalarType dtype) override { module_.to(dtype); }

 private:
  torch::jit::script::Module module_;
};

struct StraightThroughFn : public torch::autograd::Function<StraightThroughFn> {
  static torch::Tensor forward(torch::autograd::AutogradContext* /*ctx*/, const torch::Tensor& x_c,
                               const torch::Tensor& x_q) {
    (void)x_c;
    return x_q.clone();
  }
  static torch::autograd::tensor_list backward(torch::autograd::AutogradContext* /*ctx*/,
                                               torch::autograd::tensor_list grads) {
    return {grads[0], torch::Tensor()};
  }
};

}  // namespace

std::shared_ptr<PerceptualExtractor> make_fixed_conv_extractor(uint64_t seed) {
  return std::make_shared<FixedConvExtractor>(seed);
}

std::shared_ptr<PerceptualExtractor> load_torchscript_extractor(const std::string& path) {
  return std::make_shared<TorchScriptExtractor>(path);
}

torch::Tensor nearest_indices(const torch::Tensor& x, const torch::Tensor& embeddings) {
  if (embeddings.dim() != 2 || embeddings.size(0) == 0) throw ConfigError("codebook is empty");
  if (x.dim() != 2 || x.size(1) != embeddings.size(1)) {
    throw ValidationError("quantizer input dimension does not match the codebook");
  }
  const auto xs = x.detach().to(torch::kFloat64).contiguous();
  const auto es = embeddings.detach().to(torch::kFloat64).contiguous();
  const int64_t m = xs.size(0), n = es.size(0), d = xs.size(1);
  const double* xp = xs.data_ptr<double>();
  const double* ep = es.data_ptr<double>();
  auto z = torch::empty({m}, torch::kInt64);
  auto* zp = z.data_ptr<int64_t>();
  for (int64_t i = 0; i < m; ++i) {
    const double* row = xp + i * d;
    double best = std::numeric_limits<double>::infinity();
    int64_t best_k = 0;
    for (int64_t k = 0; k < n; ++k) {
      const double* e = ep + k * d;
      double dist = 0.0;
      for (int64_t j = 0; j < d; ++j) {
        const double diff = row[j] - e[j];
        dist += diff * diff;
      }
      if (dist < best) {
        best = dist;
        best_k = k;
      }
    }
    zp[i] = best_k;
  }
  return z;
}

QuantizedResult quantize(const torch::Tensor& x_c, const torch::Tensor& embeddings) {
  if (!torch::isfinite(x_c).all().item<bool>()) throw ValidationError("quantizer input is not finite");
  const int64_t d = embeddings.size(-1);
  auto lead = x_c.sizes().vec();
  lead.pop_back();
  auto z = nearest_indices(x_c.reshape({-1, d}), embeddings);
  auto x_q = embeddings.detach().index_select(0, z);
  auto shape = lead;
  shape.push_back(d);
  return {x_q.view(shape), z.view(lead)};
}

torch::Tensor straight_through(const torch::Tensor& x_c, const torch::Tensor& x_q) {
  return StraightThroughFn::apply(x_c, x_q.detach());
}

torch::Tensor tvqvae_loss(const torch::Tensor& generated, const torch::Tensor& target,
                          PerceptualExtractor& extractor) {
  auto pixel = F::mse_loss(generated, target);
  torch::Tensor target_features;
  {
    torch::NoGradGuard no_grad;
    target_features = extractor.features(target);
  }
  return pixel + F::mse_loss(extractor.features(generated), target_features);
}

TvqvaeModelImpl::TvqvaeModelImpl(const TvqvaeConfig& config, uint64_t init_seed) : config_(config) {
  config_.validate();
  encoder_ = register_module("encoder", TEncoder(config_));
  decoder_ = register_module("decoder", Decoder(config_));
  init_parameters(*encoder_, derive_seed(init_seed, {1}));
  init_parameters(*decoder_, derive_seed(init_seed, {2}));
  const double bound = 1.0 / static_cast<double>(config_.codebook_size);
  embeddings_ = register_parameter(
      "embeddings", seeded_uniform({config_.codebook_size, config_.dim}, -bound, bound, derive_seed(init_seed, {3})));
  perceptual_ = make_fixed_conv_extractor(config_.perceptual_seed);
}

void TvqvaeModelImpl::set_perceptual(std::shared_ptr<PerceptualExtractor> extractor) {
  perceptual_ = std::move(extractor);
}

torch::Tensor TvqvaeModelImpl::decode(const torch::Tensor& x_q) { return decoder_->forward(x_q); }

ForwardResult TvqvaeModelImpl::forward(const torch::Tensor& images) {
  ForwardResult r;
  r.x_f = encoder_->features(images);
  r.x_c = instance_norm(r.x_f, config_.in_eps);
  r.quantized = quantize(r.x_c, embeddings_);
  const auto e_z = embeddings_.index_select(0, r.quantized.z.flatten()).view_as(r.x_c);
  r.reconstruction = decoder_->forward(straight_through(r.x_c, r.quantized.x_q));

  auto& l = r.loss;
  l.pixel = F::mse_loss(r.reconstruction, images);
  {
    torch::Tensor target_features;
    {
      torch::NoGradGuard no_grad;
      target_features = perceptual_->features(images);
    }
    l.perceptual = F::mse_loss(perceptual_->features(r.reconstruction), target_features);
  }
  l.codebook = F::mse_loss(e_z, r.x_c.detach());
  l.commitment = F::mse_loss(r.x_c, e_z.detach());
  l.total = l.pixel + l.perceptual + l.codebook + config_.commitment_weight * l.commitment;
  return r;
}

void TvqvaeModelImpl::freeze() {
  for (auto& p : parameters()) p.requires_grad_(false);
  eval();
  frozen_ = true;
}

std::string TvqvaeModelImpl::content_hash() const { return hash_module(*this); }

void TvqvaeModelImpl::to_dtype(torch::ScalarType dtype) {
  to(dtype);
  perceptual_->to(dtype);
}

}  // namespace lego::tvqvae
