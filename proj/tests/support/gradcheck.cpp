#include "gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "lego/pretext/mim.hpp"
#include "lego/pretext/rtr.hpp"
#include "lego/pretext/sid.hpp"
#include "lego/tvqvae/model.hpp"

namespace lego::testing {

namespace F = torch::nn::functional;

namespace {

torch::Tensor rand64(torch::IntArrayRef shape, uint64_t seed, double lo = -1.0, double hi = 1.0) {
  auto gen = at::make_generator<at::CPUGeneratorImpl>(seed);
  return torch::empty(shape, torch::kFloat64).uniform_(lo, hi, gen);
}

std::vector<torch::Tensor> trainable(const std::vector<torch::Tensor>& params) {
  std::vector<torch::Tensor> out;
  for (const auto& p : params) {
    if (p.requires_grad()) out.push_back(p);
  }
  return out;
}

}  // namespace

GradCheckResult grad_check(const std::function<torch::Tensor()>& grad_loss,
                           const std::function<torch::Tensor()>& fd_loss, const std::vector<torch::Tensor>& params,
                           int64_t per_tensor, uint64_t seed, double h) {
  for (auto p : params) {
    if (p.grad().defined()) p.grad().zero_();
  }
  grad_loss().backward();
  std::mt19937_64 rng(seed);
  std::vector<double> analytic, numeric;
  torch::NoGradGuard no_grad;
  for (auto p : params) {
    auto flat = p.view(-1);
    auto grad = p.grad().defined() ? p.grad().view(-1) : torch::zeros_like(flat);
    const int64_t n = flat.numel();
    std::vector<int64_t> coords(n);
    for (int64_t i = 0; i < n; ++i) coords[i] = i;
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(std::min(n, per_tensor));
    for (auto i : coords) {
      const double orig = flat[i].item<double>();
      flat[i] = orig + h;
      const double up = fd_loss().item<double>();
      flat[i] = orig - h;
      const double down = fd_loss().item<double>();
      flat[i] = orig;
      numeric.push_back((up - down) / (2 * h));
      analytic.push_back(grad[i].item<double>());
    }
  }
  double diff = 0.0, na = 0.0, nn = 0.0;
  for (size_t i = 0; i < analytic.size(); ++i) {
    diff += (numeric[i] - analytic[i]) * (numeric[i] - analytic[i]);
    na += analytic[i] * analytic[i];
    nn += numeric[i] * numeric[i];
  }
  GradCheckResult r;
  r.coordinates = static_cast<int64_t>(analytic.size());
  r.relative_error = std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nn), 1e-300});
  return r;
}

GradCheckResult check_tvqvae_loss(uint64_t seed) {
  tvqvae::TvqvaeConfig cfg;
  cfg.image_h = 8;
  cfg.image_w = 16;
  cfg.patch_h = 4;
  cfg.patch_w = 4;
  cfg.hidden = 6;
  cfg.depth = 1;
  cfg.dim = 8;
  cfg.codebook_size = 16;
  cfg.decoder_hidden = 6;
  tvqvae::TvqvaeModel model(cfg, seed);
  model->to_dtype(torch::kFloat64);
  const auto images = rand64({2, 3, 8, 16}, seed + 1, 0.0, 1.0);

  // Indices and stop-gradient anchors frozen at the base point: around it the
  // straight-through loss is this smooth function of the parameters.
  torch::Tensor z0, x_c0, e_z0, target_features;
  {
    torch::NoGradGuard no_grad;
    auto r = model->forward(images);
    z0 = r.quantized.z.flatten();
    x_c0 = r.x_c.clone();
    e_z0 = r.quantized.x_q.clone();
    target_features = model->perceptual().features(images);
  }
  auto surrogate = [&] {
    auto x_c = tvqvae::instance_norm(model->encoder()->features(images), cfg.in_eps);
    auto e_z = model->embeddings().index_select(0, z0).view_as(x_c);
    auto recon = model->decoder()->forward(x_c + (e_z0 - x_c0));
    return F::mse_loss(recon, images) + F::mse_loss(model->perceptual().features(recon), target_features) +
           F::mse_loss(e_z, x_c0) + cfg.commitment_weight * F::mse_loss(x_c, e_z0);
  };
  auto real = [&] { return model->forward(images).loss.total; };
  return grad_check(real, surrogate, trainable(model->parameters()), 1 << 20, seed);
}

GradCheckResult check_info_nce(uint64_t seed) {
  auto q = rand64({6}, seed).requires_grad_(true);
  auto pos = rand64({6}, seed + 1).requires_grad_(true);
  auto negs = rand64({5, 6}, seed + 2).requires_grad_(true);
  auto loss = [&] { return pretext::info_nce(q, pos, negs, 0.2); };
  return grad_check(loss, loss, {q, pos, negs}, 30, seed);
}

GradCheckResult check_sid_loss(uint64_t seed) {
  auto q = rand64({3, 8, 6}, seed).requires_grad_(true);
  auto k = rand64({3, 8, 6}, seed + 1);
  auto gen = at::make_generator<at::CPUGeneratorImpl>(seed + 2);
  auto indices = torch::randint(0, 4, {3, 8}, gen, torch::kInt64);
  auto loss = [&] { return pretext::sid_loss(q, k, indices, 0.2, seed).loss; };
  return grad_check(loss, loss, {q}, 60, seed);
}

GradCheckResult check_masked_l1_cross_attention(uint64_t seed) {
  const auto vit = pretext::ViTConfig::tiny();
  pretext::MimHead head(vit, 5, 1, seed);
  head->to(torch::kFloat64);
  auto encoded = rand64({1, vit.num_tokens(), vit.dim}, seed + 1).requires_grad_(true);
  auto latents = rand64({1, 8, 5}, seed + 2).requires_grad_(true);
  const auto target = rand64({1, 3, vit.image_h, vit.image_w}, seed + 3, 0.0, 1.0);
  const auto mask = pretext::make_mask_plan(vit.num_tokens(), 0.75, seed).as_tensor().unsqueeze(0);
  const auto pix = pretext::pixel_mask(mask, vit);
  auto loss = [&] { return pretext::masked_l1(head->forward(encoded, latents), target, pix); };
  auto params = trainable(head->parameters());
  params.push_back(encoded);
  params.push_back(latents);
  return grad_check(loss, loss, params, 8, seed);
}

GradCheckResult check_mixer_rtr(uint64_t seed) {
  const int n = 6;
  pretext::MixerRankHead head(n, 8, 5, 7, seed);
  head->to(torch::kFloat64);
  auto features = rand64({2, n, 8}, seed + 1).requires_grad_(true);
  std::vector<std::vector<pretext::Labeling>> labels = {
      pretext::valid_orders({3, 1, 3, 2, 1, 0}, {2, 0, 5, 1, 4, 3}),
      pretext::valid_orders({0, 1, 2, 3, 4, 5}, {5, 4, 3, 2, 1, 0}),
  };
  auto loss = [&] { return pretext::rtr_loss(head->forward(features), labels); };
  auto params = trainable(head->parameters());
  params.push_back(features);
  return grad_check(loss, loss, params, 8, seed);
}

}  // namespace lego::testing
