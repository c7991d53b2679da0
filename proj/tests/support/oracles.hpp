#pragma once

// Independent reference implementations used by the unit and acceptance
// tests. Nothing here calls into the library code under test.

#include <cstdint>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include <torch/torch.h>

namespace lego::testing {

// Linear scan, squared Euclidean distance, first minimum wins.
int64_t brute_nearest(const std::vector<double>& x, const std::vector<std::vector<double>>& codebook);

// Per-image, per-channel standardisation written with plain loops.
// x: [B, gh, gw, C] (any floating dtype); result is float64.
torch::Tensor instance_norm_loops(const torch::Tensor& x, double eps);

// Collapse rule written independently: remove blanks between runs after
// merging runs of equal symbols.
std::vector<int64_t> collapse_reference(const std::vector<int64_t>& path, int64_t blank = 0);

// -log of the summed probability of every length-T path collapsing to
// `labels`, enumerating all C^T paths. logits: [T, C].
double ctc_brute_force(const torch::Tensor& logits, const std::vector<int64_t>& labels);
// Number of length-T paths over C symbols collapsing to `labels`.
int64_t ctc_alignment_count(int64_t steps, int64_t classes, const std::vector<int64_t>& labels);

// Every permutation L of 0..n-1 with index[L[j]] == index[order[j]] for all j.
std::set<std::vector<int>> valid_orders_brute(const std::vector<int64_t>& index, const std::vector<int>& order);

// Single-window SSIM of two equally sized single-channel patches, expanded
// by hand.
double ssim_window_reference(const std::vector<double>& a, const std::vector<double>& b, double k1, double k2);

// ln(K+1) and friends for InfoNCE sanity checks.
double info_nce_reference(const std::vector<double>& q, const std::vector<double>& pos,
                          const std::vector<std::vector<double>>& negs, double tau);

}  // namespace lego::testing
