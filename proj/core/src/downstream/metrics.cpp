#include "lego/downstream/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "lego/common.hpp"

namespace lego::downstream {

namespace {

void check_same_shape(const torch::Tensor& a, const torch::Tensor& b) {
  if (!a.sizes().equals(b.sizes())) throw ValidationError("metric inputs differ in shape");
}

std::string fold(const std::string& s) {
  std::string out = s;
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

}  // namespace

double psnr(const torch::Tensor& a, const torch::Tensor& b) {
  check_same_shape(a, b);
  const double mse = (a.to(torch::kFloat64) - b.to(torch::kFloat64)).pow(2).mean().item<double>();
  if (mse == 0.0) return kPsnrIdentical;
  return 10.0 * std::log10(1.0 / mse);
}

double ssim(const torch::Tensor& a, const torch::Tensor& b) {
  check_same_shape(a, b);
  if (a.dim() != 3) throw ValidationError("ssim expects [C,H,W] images");
  if (a.size(1) < kSsimWindow || a.size(2) < kSsimWindow) throw ValidationError("image smaller than SSIM window");
  const double c1 = kSsimK1 * kSsimK1, c2 = kSsimK2 * kSsimK2;
  auto x = a.to(torch::kFloat64).unsqueeze(1);
  auto y = b.to(torch::kFloat64).unsqueeze(1);
  auto mean = [](const torch::Tensor& t) { return torch::avg_pool2d(t, {kSsimWindow, kSsimWindow}, {1, 1}); };
  auto mx = mean(x), my = mean(y);
  auto vx = mean(x * x) - mx * mx;
  auto vy = mean(y * y) - my * my;
  auto cxy = mean(x * y) - mx * my;
  auto map = ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
  return map.mean().item<double>();
}

double mean_psnr(const torch::Tensor& a, const torch::Tensor& b) {
  check_same_shape(a, b);
  double sum = 0.0;
  int64_t finite = 0;
  for (int64_t i = 0; i < a.size(0); ++i) {
    const double v = psnr(a[i], b[i]);
    if (std::isfinite(v)) {
      sum += v;
      ++finite;
    }
  }
  return finite == 0 ? kPsnrIdentical : sum / static_cast<double>(finite);
}

double mean_ssim(const torch::Tensor& a, const torch::Tensor& b) {
  check_same_shape(a, b);
  double sum = 0.0;
  for (int64_t i = 0; i < a.size(0); ++i) sum += ssim(a[i], b[i]);
  return a.size(0) == 0 ? 0.0 : sum / static_cast<double>(a.size(0));
}

double word_accuracy(const std::vector<std::string>& predictions, const std::vector<std::string>& references) {
  if (predictions.size() != references.size()) throw ValidationError("prediction and reference counts differ");
  if (predictions.empty()) return 0.0;
  size_t hits = 0;
  for (size_t i = 0; i < predictions.size(); ++i) hits += fold(predictions[i]) == fold(references[i]);
  return static_cast<double>(hits) / static_cast<double>(predictions.size());
}

}  // namespace lego::downstream
