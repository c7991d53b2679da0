#include "lego/image_ops.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

namespace lego {

cv::Mat to_mat(const Image& image) {
  auto hwc = image.detach().to(torch::kFloat32).permute({1, 2, 0}).contiguous();
  cv::Mat view(static_cast<int>(hwc.size(0)), static_cast<int>(hwc.size(1)), CV_32FC3, hwc.data_ptr<float>());
  return view.clone();
}

Image from_mat(const cv::Mat& mat) {
  cv::Mat m;
  if (mat.type() == CV_32FC3) {
    m = mat.isContinuous() ? mat : mat.clone();
  } else {
    mat.convertTo(m, CV_32FC3);
  }
  auto t = torch::from_blob(m.data, {m.rows, m.cols, 3}, torch::kFloat32);
  return t.permute({2, 0, 1}).contiguous().clone();
}

void write_png(const std::filesystem::path& path, const Image& image) {
  auto bytes = (image.detach().clamp(0.0, 1.0) * 255.0).round().to(torch::kUInt8);
  auto hwc = bytes.permute({1, 2, 0}).contiguous();
  cv::Mat rgb(static_cast<int>(hwc.size(0)), static_cast<int>(hwc.size(1)), CV_8UC3, hwc.data_ptr<uint8_t>());
  cv::Mat bgr;
  cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
  if (!cv::imwrite(path.string(), bgr)) throw IoError("cannot write image " + path.string());
}

Image read_png(const std::filesystem::path& path) {
  cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) throw IoError("cannot read image " + path.string());
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  auto t = torch::from_blob(rgb.data, {rgb.rows, rgb.cols, 3}, torch::kUInt8);
  return t.permute({2, 0, 1}).to(torch::kFloat32).div(255.0).contiguous();
}

torch::Tensor stack_images(const std::vector<Image>& images) { return torch::stack(images); }

torch::Tensor bicubic_resize(const torch::Tensor& batch, int64_t height, int64_t width) {
  namespace F = torch::nn::functional;
  auto out = F::interpolate(batch, F::InterpolateFuncOptions()
                                       .size(std::vector<int64_t>{height, width})
                                       .mode(torch::kBicubic)
                                       .align_corners(false));
  return out.clamp(0.0, 1.0);
}

}  // namespace lego
