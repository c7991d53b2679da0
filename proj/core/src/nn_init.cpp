#include "lego/nn_init.hpp"

#include <ATen/CPUGeneratorImpl.h>

#include <cmath>

#include "lego/rng.hpp"

namespace lego {

namespace {

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

torch::Tensor seeded_normal(at::IntArrayRef sizes, double stddev, uint64_t seed) {
  auto gen = at::make_generator<at::CPUGeneratorImpl>(seed);
  return torch::randn(sizes, gen, torch::kFloat32) * stddev;
}

torch::Tensor seeded_uniform(at::IntArrayRef sizes, double lo, double hi, uint64_t seed) {
  auto gen = at::make_generator<at::CPUGeneratorImpl>(seed);
  return torch::rand(sizes, gen, torch::kFloat32) * (hi - lo) + lo;
}

void init_parameters(torch::nn::Module& module, uint64_t seed) {
  torch::NoGradGuard no_grad;
  uint64_t k = 0;
  for (auto& item : module.named_parameters(true)) {
    auto& p = item.value();
    ++k;
    if (p.dim() >= 2) {
      const double fan_out = static_cast<double>(p.size(0)) * (p.dim() > 2 ? p[0][0].numel() : 1);
      const double fan_in = static_cast<double>(p[0].numel());
      const double bound = std::sqrt(6.0 / (fan_in + fan_out));
      p.copy_(seeded_uniform(p.sizes(), -bound, bound, derive_seed(seed, {k})));
    } else if (ends_with(item.key(), "bias")) {
      p.zero_();
    } else {
      p.fill_(1.0);
    }
  }
}

}  // namespace lego
