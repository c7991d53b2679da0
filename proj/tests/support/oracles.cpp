#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace lego::testing {

int64_t brute_nearest(const std::vector<double>& x, const std::vector<std::vector<double>>& codebook) {
  int64_t best = -1;
  double best_d = 0.0;
  for (size_t k = 0; k < codebook.size(); ++k) {
    double d = 0.0;
    for (size_t i = 0; i < x.size(); ++i) d += (x[i] - codebook[k][i]) * (x[i] - codebook[k][i]);
    if (best < 0 || d < best_d) {
      best = static_cast<int64_t>(k);
      best_d = d;
    }
  }
  return best;
}

torch::Tensor instance_norm_loops(const torch::Tensor& x, double eps) {
  auto in = x.to(torch::kFloat64).contiguous();
  auto out = torch::empty_like(in);
  auto a = in.accessor<double, 4>();
  auto o = out.accessor<double, 4>();
  const int64_t B = in.size(0), H = in.size(1), W = in.size(2), C = in.size(3);
  for (int64_t b = 0; b < B; ++b) {
    for (int64_t c = 0; c < C; ++c) {
      double mean = 0.0;
      for (int64_t i = 0; i < H; ++i)
        for (int64_t j = 0; j < W; ++j) mean += a[b][i][j][c];
      mean /= static_cast<double>(H * W);
      double var = 0.0;
      for (int64_t i = 0; i < H; ++i)
        for (int64_t j = 0; j < W; ++j) var += (a[b][i][j][c] - mean) * (a[b][i][j][c] - mean);
      var /= static_cast<double>(H * W);
      for (int64_t i = 0; i < H; ++i)
        for (int64_t j = 0; j < W; ++j) o[b][i][j][c] = (a[b][i][j][c] - mean) / std::sqrt(var + eps);
    }
  }
  return out;
}

std::vector<int64_t> collapse_reference(const std::vector<int64_t>& path, int64_t blank) {
  std::vector<int64_t> merged(path);
  merged.erase(std::unique(merged.begin(), merged.end()), merged.end());
  merged.erase(std::remove(merged.begin(), merged.end(), blank), merged.end());
  return merged;
}

namespace {

template <typename Visit>
void for_each_path(int64_t steps, int64_t classes, Visit visit) {
  std::vector<int64_t> path(steps, 0);
  while (true) {
    visit(path);
    int64_t i = steps - 1;
    while (i >= 0 && path[i] == classes - 1) path[i--] = 0;
    if (i < 0) return;
    ++path[i];
  }
}

}  // namespace

double ctc_brute_force(const torch::Tensor& logits, const std::vector<int64_t>& labels) {
  auto lp = torch::log_softmax(logits.to(torch::kFloat64), -1).contiguous();
  auto a = lp.accessor<double, 2>();
  const int64_t T = lp.size(0), C = lp.size(1);
  double total = 0.0;
  for_each_path(T, C, [&](const std::vector<int64_t>& path) {
    if (collapse_reference(path) != labels) return;
    double s = 0.0;
    for (int64_t t = 0; t < T; ++t) s += a[t][path[t]];
    total += std::exp(s);
  });
  return -std::log(total);
}

int64_t ctc_alignment_count(int64_t steps, int64_t classes, const std::vector<int64_t>& labels) {
  int64_t count = 0;
  for_each_path(steps, classes, [&](const std::vector<int64_t>& path) { count += collapse_reference(path) == labels; });
  return count;
}

std::set<std::vector<int>> valid_orders_brute(const std::vector<int64_t>& index, const std::vector<int>& order) {
  std::set<std::vector<int>> out;
  std::vector<int> perm(index.size());
  std::iota(perm.begin(), perm.end(), 0);
  do {
    bool ok = true;
    for (size_t j = 0; j < perm.size() && ok; ++j) ok = index[perm[j]] == index[order[j]];
    if (ok) out.insert(perm);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return out;
}

double ssim_window_reference(const std::vector<double>& a, const std::vector<double>& b, double k1, double k2) {
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double va = 0.0, vb = 0.0, cov = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    va += (a[i] - ma) * (a[i] - ma);
    vb += (b[i] - mb) * (b[i] - mb);
    cov += (a[i] - ma) * (b[i] - mb);
  }
  va /= n;
  vb /= n;
  cov /= n;
  const double c1 = k1 * k1, c2 = k2 * k2;
  return ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
}

double info_nce_reference(const std::vector<double>& q, const std::vector<double>& pos,
                          const std::vector<std::vector<double>>& negs, double tau) {
  auto dot = [&](const std::vector<double>& v) { return std::inner_product(q.begin(), q.end(), v.begin(), 0.0); };
  const double sp = std::exp(dot(pos) / tau);
  double denom = sp;
  for (const auto& n : negs) denom += std::exp(dot(n) / tau);
  return -std::log(sp / denom);
}

}  // namespace lego::testing
