#include "lego/corpus/sr_pair.hpp"

#include <opencv2/imgproc.hpp>

#include "lego/image_ops.hpp"
#include "lego/rng.hpp"

namespace lego::corpus {

Image box_downsample2(const Image& image) {
  return torch::nn::functional::avg_pool2d(image.unsqueeze(0),
                                           torch::nn::functional::AvgPool2dFuncOptions(2).stride(2))
      .squeeze(0)
      .contiguous();
}

SRPair make_sr_pair(const TextSample& sample, uint64_t seed, const Degradation& degradation) {
  check_image(sample.image);
  Rng rng(derive_seed(seed, {0x7372}));
  const double sigma = rng.uniform(degradation.blur_sigma_min, degradation.blur_sigma_max);
  Image blurred = sample.image;
  if (sigma > 0.0) {
    cv::Mat out;
    cv::GaussianBlur(to_mat(sample.image), out, cv::Size(0, 0), sigma, sigma, cv::BORDER_REFLECT_101);
    blurred = from_mat(out);
  }
  Image lr = box_downsample2(blurred);
  if (degradation.noise_sigma > 0.0) {
    auto noise = torch::empty_like(lr);
    auto* p = noise.data_ptr<float>();
    for (int64_t i = 0; i < noise.numel(); ++i) {
      p[i] = static_cast<float>(rng.normal(0.0, degradation.noise_sigma));
    }
    lr = lr + noise;
  }
  return SRPair{lr.clamp(0.0, 1.0).contiguous(), sample.image};
}

}  // namespace lego::corpus
