#include "lego/pretext/sid.hpp"

#include <algorithm>
#include <numeric>

#include "lego/common.hpp"
#include "lego/pretext/vit.hpp"

namespace lego::pretext {

torch::Tensor instance_map(const torch::Tensor& tokens, int64_t grid_h, int64_t grid_w) {
  return banded_mean(tokens, grid_h, grid_w, kSlots);
}

void ema_update(std::vector<torch::Tensor>& momentum, const std::vector<torch::Tensor>& online, double m) {
  if (m < 0.0 || m > 1.0) throw ConfigError("EMA momentum must be in [0, 1]");
  if (momentum.size() != online.size()) throw ValidationError("EMA parameter lists differ in length");
  torch::NoGradGuard no_grad;
  for (size_t i = 0; i < momentum.size(); ++i) {
    if (momentum[i].sizes() != online[i].sizes()) throw ValidationError("EMA parameter shape mismatch");
  }
  for (size_t i = 0; i < momentum.size(); ++i) {
    momentum[i].mul_(m).add_(online[i].detach(), 1.0 - m);
  }
}

void ema_update(torch::nn::Module& momentum, const torch::nn::Module& online, double m) {
  auto target = momentum.parameters();
  ema_update(target, online.parameters(), m);
}

std::vector<size_t> filter_negatives(int64_t anchor_index, const std::vector<int64_t>& candidate_indices) {
  std::vector<size_t> keep;
  for (size_t i = 0; i < candidate_indices.size(); ++i) {
    if (candidate_indices[i] != anchor_index) keep.push_back(i);
  }
  return keep;
}

std::optional<size_t> select_positive(const std::vector<double>& pool_similarities, Rng& rng) {
  if (pool_similarities.empty()) return std::nullopt;
  std::vector<size_t> order(pool_similarities.size());
  std::iota(order.begin(), order.end(), size_t{0});
  // Stable so equal scores keep pool order.
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return pool_similarities[a] > pool_similarities[b]; });
  const size_t top = std::min<size_t>(kTopPositives, order.size());
  return order[rng.below(top)];
}

torch::Tensor info_nce(const torch::Tensor& q, const torch::Tensor& positive, const torch::Tensor& negatives,
                       double tau) {
  if (tau <= 0.0) throw ConfigError("InfoNCE temperature must be positive");
  if (q.dim() != 1 || positive.sizes() != q.sizes() || (negatives.numel() > 0 && negatives.size(-1) != q.size(0))) {
    throw ValidationError("InfoNCE operands must share one dimension");
  }
  auto pos = (q * positive).sum().unsqueeze(0) / tau;
  torch::Tensor logits = pos;
  if (negatives.numel() > 0) logits = torch::cat({pos, torch::matmul(negatives, q) / tau});
  return torch::logsumexp(logits, 0) - pos.squeeze(0);
}

SidResult sid_loss(const torch::Tensor& q, const torch::Tensor& k, const torch::Tensor& indices, double tau,
                   uint64_t seed) {
  if (tau <= 0.0) throw ConfigError("InfoNCE temperature must be positive");
  if (q.dim() != 3 || q.sizes() != k.sizes() || indices.size(0) != q.size(0) || indices.size(1) != q.size(1)) {
    throw ValidationError("SID expects q, k of shape [B,8,d] and indices [B,8]");
  }
  const int64_t b = q.size(0), f = q.size(1), rows = b * f;
  auto qn = torch::nn::functional::normalize(q.reshape({rows, -1}), torch::nn::functional::NormalizeFuncOptions().dim(1));
  auto kn = torch::nn::functional::normalize(k.reshape({rows, -1}), torch::nn::functional::NormalizeFuncOptions().dim(1)).detach();

  auto idx = indices.reshape({rows}).to(torch::kInt64).contiguous();
  auto image_of = torch::arange(rows, torch::kInt64).div(f, "floor");
  auto same_image = image_of.unsqueeze(1) == image_of.unsqueeze(0);
  auto same_index = idx.unsqueeze(1) == idx.unsqueeze(0);
  auto negative_mask = same_image.logical_not() & same_index.logical_not();

  // Positive selection uses cosine similarity of the current (detached) vectors.
  auto sims = torch::matmul(qn.detach(), kn.t()).to(torch::kFloat64).contiguous();
  auto pool_mask = (same_image.logical_not() & same_index).contiguous();
  auto sa = sims.accessor<double, 2>();
  auto pa = pool_mask.accessor<bool, 2>();

  SidResult result;
  result.positive_column.resize(rows);
  Rng rng(seed);
  for (int64_t a = 0; a < rows; ++a) {
    std::vector<int64_t> cols;
    std::vector<double> pool;
    for (int64_t c = 0; c < rows; ++c) {
      if (pa[a][c]) {
        cols.push_back(c);
        pool.push_back(sa[a][c]);
      }
    }
    auto pick = select_positive(pool, rng);
    if (pick) {
      result.positive_column[a] = cols[*pick];
      ++result.stats.substituted_positives;
    } else {
      result.positive_column[a] = a;  // same image, same frame, other view
    }
  }

  auto logits = torch::matmul(qn, kn.t()) / tau;
  auto pos_col = torch::tensor(result.positive_column, torch::kInt64);
  auto keep = negative_mask.clone();
  keep.index_put_({torch::arange(rows), pos_col}, true);
  auto masked = logits.masked_fill(keep.logical_not(), -std::numeric_limits<double>::infinity());
  auto pos_logit = logits.gather(1, pos_col.unsqueeze(1)).squeeze(1);
  result.loss = (torch::logsumexp(masked, 1) - pos_logit).mean();
  result.negative_mask = negative_mask;
  result.stats.anchors = rows;
  result.stats.mean_negatives = negative_mask.sum().item<double>() / static_cast<double>(rows);
  return result;
}

}  // namespace lego::pretext
