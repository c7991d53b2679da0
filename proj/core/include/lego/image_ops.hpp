#pragma once

#include <filesystem>

#include <opencv2/core.hpp>

#include "lego/common.hpp"

namespace lego {

// [3,H,W] float tensor <-> HxW CV_32FC3 (RGB order preserved).
cv::Mat to_mat(const Image& image);
Image from_mat(const cv::Mat& mat);

// 8-bit RGB PNG. Values are rounded to the nearest of 256 levels.
void write_png(const std::filesystem::path& path, const Image& image);
Image read_png(const std::filesystem::path& path);

// Stack images into [B,3,H,W].
torch::Tensor stack_images(const std::vector<Image>& images);

// Bicubic resize with align_corners=false, results clamped to [0,1].
torch::Tensor bicubic_resize(const torch::Tensor& batch, int64_t height, int64_t width);

}  // namespace lego
