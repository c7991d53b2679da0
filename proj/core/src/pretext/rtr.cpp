#include "lego/pretext/rtr.hpp"

#include <limits>

#include "lego/nn_init.hpp"

namespace lego::pretext {

namespace F = torch::nn::functional;

namespace {

// Depth-first enumeration of index-preserving permutations sigma in
// lexicographic order: sigma[p] must carry the same index as p.
void enumerate(const std::vector<int64_t>& idx, std::vector<int>& sigma, std::vector<bool>& used, size_t pos,
               size_t cap, std::vector<std::vector<int>>& out) {
  if (out.size() >= cap) return;
  const size_t n = idx.size();
  if (pos == n) {
    out.push_back(sigma);
    return;
  }
  for (size_t c = 0; c < n && out.size() < cap; ++c) {
    if (used[c] || idx[c] != idx[pos]) continue;
    used[c] = true;
    sigma[pos] = static_cast<int>(c);
    enumerate(idx, sigma, used, pos + 1, cap, out);
    used[c] = false;
  }
}

}  // namespace

std::vector<Labeling> valid_orders(const std::vector<int64_t>& portion_indices, const std::vector<int>& order,
                                   size_t cap) {
  const size_t n = portion_indices.size();
  if (order.size() != n) throw ValidationError("order and portion indices differ in length");
  std::vector<bool> seen(n, false);
  for (int o : order) {
    if (o < 0 || static_cast<size_t>(o) >= n || seen[o]) throw ValidationError("order is not a permutation");
    seen[o] = true;
  }
  std::vector<std::vector<int>> sigmas;
  std::vector<int> sigma(n);
  std::vector<bool> used(n, false);
  enumerate(portion_indices, sigma, used, 0, cap, sigmas);
  // The identity is the lexicographically smallest index-preserving
  // permutation, so the true labeling is always first.
  std::vector<Labeling> labels;
  labels.reserve(sigmas.size());
  for (const auto& s : sigmas) {
    Labeling l(n);
    for (size_t j = 0; j < n; ++j) l[j] = s[order[j]];
    labels.push_back(std::move(l));
  }
  return labels;
}

PermutationInstance make_permutation(const Image& image, const std::vector<int64_t>& portion_indices, int n,
                                     Rng& rng) {
  check_image(image);
  if (n <= 0 || kWidth % n != 0) throw ConfigError("image width is not divisible by " + std::to_string(n));
  if (static_cast<int>(portion_indices.size()) != n) {
    throw ConfigError("need one codebook index per portion (" + std::to_string(n) + "), got " +
                      std::to_string(portion_indices.size()));
  }
  PermutationInstance inst;
  inst.n = n;
  inst.order = rng.permutation(n);
  inst.valid_labels = valid_orders(portion_indices, inst.order);
  const int64_t w = kWidth / n;
  auto strips = image.split(w, 2);
  std::vector<torch::Tensor> shuffled;
  for (int j = 0; j < n; ++j) shuffled.push_back(strips[inst.order[j]]);
  inst.shuffled = torch::cat(shuffled, 2).contiguous();
  return inst;
}

MixerRankHeadImpl::MixerRankHeadImpl(int64_t portions, int64_t dim, int64_t token_hidden, int64_t channel_hidden,
                                     uint64_t seed)
    : portions_(portions) {
  for (int layer = 0; layer < 2; ++layer) {
    token_norms_->push_back(torch::nn::LayerNorm(torch::nn::LayerNormOptions({dim})));
    token_mlps_->push_back(torch::nn::Sequential(torch::nn::Linear(portions, token_hidden), torch::nn::GELU(),
                                                 torch::nn::Linear(token_hidden, portions)));
    channel_norms_->push_back(torch::nn::LayerNorm(torch::nn::LayerNormOptions({dim})));
    channel_mlps_->push_back(torch::nn::Sequential(torch::nn::Linear(dim, channel_hidden), torch::nn::GELU(),
                                                   torch::nn::Linear(channel_hidden, dim)));
  }
  register_module("token_norms", token_norms_);
  register_module("token_mlps", token_mlps_);
  register_module("channel_norms", channel_norms_);
  register_module("channel_mlps", channel_mlps_);
  norm_ = register_module("norm", torch::nn::LayerNorm(torch::nn::LayerNormOptions({dim})));
  classifier_ = register_module("classifier", torch::nn::Linear(dim, portions));
  init_parameters(*this, seed);
}

torch::Tensor MixerRankHeadImpl::forward(const torch::Tensor& portion_features) {
  if (portion_features.dim() != 3 || portion_features.size(1) != portions_) {
    throw ValidationError("rank head expects [B," + std::to_string(portions_) + ",D] input");
  }
  auto x = portion_features;
  for (size_t layer = 0; layer < token_mlps_->size(); ++layer) {
    auto t = token_norms_[layer]->as<torch::nn::LayerNorm>()->forward(x).transpose(1, 2);
    x = x + token_mlps_[layer]->as<torch::nn::Sequential>()->forward(t).transpose(1, 2);
    auto c = channel_norms_[layer]->as<torch::nn::LayerNorm>()->forward(x);
    x = x + channel_mlps_[layer]->as<torch::nn::Sequential>()->forward(c);
  }
  return classifier_->forward(norm_->forward(x));
}

torch::Tensor rtr_loss(const torch::Tensor& logits, const std::vector<std::vector<Labeling>>& valid_labels) {
  if (logits.dim() != 3 || logits.size(1) != logits.size(2) || static_cast<size_t>(logits.size(0)) != valid_labels.size()) {
    throw ValidationError("rtr_loss expects [B,n,n] logits and one label set per sample");
  }
  const int64_t b = logits.size(0), n = logits.size(1);
  size_t max_sets = 1;
  for (const auto& v : valid_labels) {
    if (v.empty()) throw ValidationError("empty valid label set");
    max_sets = std::max(max_sets, v.size());
  }
  const auto m = static_cast<int64_t>(max_sets);
  auto labels = torch::zeros({b, m, n}, torch::kInt64);
  auto present = torch::zeros({b, m}, torch::kBool);
  auto la = labels.accessor<int64_t, 3>();
  auto pa = present.accessor<bool, 2>();
  for (int64_t i = 0; i < b; ++i) {
    for (size_t s = 0; s < valid_labels[i].size(); ++s) {
      const auto& l = valid_labels[i][s];
      if (static_cast<int64_t>(l.size()) != n) throw ValidationError("labeling length does not match logits");
      pa[i][s] = true;
      for (int64_t j = 0; j < n; ++j) la[i][s][j] = l[j];
    }
  }
  auto logp = F::log_softmax(logits, F::LogSoftmaxFuncOptions(-1));             // [B,n,n]
  auto picked = logp.unsqueeze(1).expand({b, m, n, n}).gather(3, labels.unsqueeze(-1)).squeeze(-1);
  auto ce = -picked.mean(2);                                                     // [B,m]
  ce = ce.masked_fill(present.logical_not(), std::numeric_limits<double>::infinity());
  return std::get<0>(ce.min(1)).mean();
}

}  // namespace lego::pretext
