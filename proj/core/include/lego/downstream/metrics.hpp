#pragma once

#include <limits>
#include <string>
#include <vector>

#include <torch/torch.h>

namespace lego::downstream {

// Returned by psnr when the images are identical.
inline constexpr double kPsnrIdentical = std::numeric_limits<double>::infinity();

inline constexpr int64_t kSsimWindow = 8;
inline constexpr double kSsimK1 = 0.01;
inline constexpr double kSsimK2 = 0.03;

// 10 log10(1 / MSE) for images in [0,1]. Shapes must match.
double psnr(const torch::Tensor& a, const torch::Tensor& b);
// Mean SSIM over all 8x8 windows (stride 1) and channels of [C,H,W] images.
double ssim(const torch::Tensor& a, const torch::Tensor& b);

// Per-image means for [B,C,H,W] batches. Infinite PSNRs are skipped in the
// mean unless every image is identical.
double mean_psnr(const torch::Tensor& a, const torch::Tensor& b);
double mean_ssim(const torch::Tensor& a, const torch::Tensor& b);

// Exact-match rate after case folding.
double word_accuracy(const std::vector<std::string>& predictions, const std::vector<std::string>& references);

}  // namespace lego::downstream
