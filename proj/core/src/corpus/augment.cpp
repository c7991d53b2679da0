#include "lego/corpus/augment.hpp"

#include <cmath>

#include <opencv2/imgproc.hpp>

#include "lego/image_ops.hpp"
#include "lego/rng.hpp"

namespace lego::corpus {

namespace {

Image contrast(const Image& img, double factor) {
  auto mean = img.mean();
  return (img - mean) * factor + mean;
}

cv::Mat gaussian(const cv::Mat& m, double sigma) {
  cv::Mat out;
  cv::GaussianBlur(m, out, cv::Size(0, 0), sigma, sigma, cv::BORDER_REFLECT_101);
  return out;
}

Image crop_and_pad(const Image& img, Rng& rng, const AugmentationMagnitudes& mag) {
  // Remove up to crop_max_dx/dy pixels in total, then pad back with replicated
  // borders on a random split so the content shifts but keeps its scale.
  const int dx = static_cast<int>(rng.below(static_cast<uint64_t>(mag.crop_max_dx) + 1));
  const int dy = static_cast<int>(rng.below(static_cast<uint64_t>(mag.crop_max_dy) + 1));
  const int left = static_cast<int>(rng.below(static_cast<uint64_t>(dx) + 1));
  const int top = static_cast<int>(rng.below(static_cast<uint64_t>(dy) + 1));
  const int pad_left = static_cast<int>(rng.below(static_cast<uint64_t>(dx) + 1));
  const int pad_top = static_cast<int>(rng.below(static_cast<uint64_t>(dy) + 1));
  cv::Mat m = to_mat(img);
  cv::Rect box(left, top, static_cast<int>(kWidth) - dx, static_cast<int>(kHeight) - dy);
  cv::Mat out;
  cv::copyMakeBorder(m(box), out, pad_top, dy - pad_top, pad_left, dx - pad_left, cv::BORDER_REPLICATE);
  return from_mat(out);
}

Image perspective_or_affine(const Image& img, Rng& rng, const AugmentationMagnitudes& mag) {
  cv::Mat m = to_mat(img);
  cv::Mat out;
  const auto w = static_cast<float>(kWidth - 1);
  const auto h = static_cast<float>(kHeight - 1);
  if (rng.below(2) == 0) {
    cv::Point2f src[4] = {{0, 0}, {w, 0}, {w, h}, {0, h}};
    cv::Point2f dst[4];
    for (int i = 0; i < 4; ++i) {
      dst[i] = src[i] + cv::Point2f(static_cast<float>(rng.uniform(-mag.perspective_px, mag.perspective_px)),
                                    static_cast<float>(rng.uniform(-mag.perspective_px, mag.perspective_px)));
    }
    cv::warpPerspective(m, out, cv::getPerspectiveTransform(src, dst), m.size(), cv::INTER_LINEAR,
                        cv::BORDER_REPLICATE);
  } else {
    const double angle = rng.uniform(-mag.affine_degrees, mag.affine_degrees);
    cv::Mat a = cv::getRotationMatrix2D(cv::Point2f(w / 2, h / 2), angle, 1.0);
    a.at<double>(0, 1) += rng.uniform(-mag.affine_shear, mag.affine_shear);
    cv::warpAffine(m, out, a, m.size(), cv::INTER_LINEAR, cv::BORDER_REPLICATE);
  }
  return from_mat(out);
}

}  // namespace

std::string augmentation_name(Augmentation a) {
  switch (a) {
    case Augmentation::kContrast: return "contrast";
    case Augmentation::kBlur: return "blur";
    case Augmentation::kSharpen: return "sharpen";
    case Augmentation::kCrop: return "crop";
    case Augmentation::kGray: return "gray";
    case Augmentation::kColorJitter: return "color-jitter";
    case Augmentation::kPerspective: return "perspective/affine";
  }
  return "unknown";
}

std::vector<Augmentation> select_augmentations(const AugmentationPolicy& policy, uint64_t seed) {
  const int n = static_cast<int>(policy.menu.size());
  if (policy.picks_per_view < 0 || policy.picks_per_view > n) {
    throw ConfigError("picks_per_view must be in [0, menu size]");
  }
  Rng rng(derive_seed(seed, {policy.seed, 0x73656c}));
  std::vector<Augmentation> picked;
  for (int i : rng.choose(n, policy.picks_per_view)) picked.push_back(policy.menu[i]);
  return picked;
}

Image apply_augmentation(const Image& image, Augmentation a, const AugmentationMagnitudes& mag,
                         uint64_t seed) {
  Rng rng(seed);
  Image out;
  switch (a) {
    case Augmentation::kContrast:
      out = contrast(image, rng.uniform(mag.contrast_min, mag.contrast_max));
      break;
    case Augmentation::kBlur:
      out = from_mat(gaussian(to_mat(image), rng.uniform(mag.blur_sigma_min, mag.blur_sigma_max)));
      break;
    case Augmentation::kSharpen: {
      // Unsharp mask: x + amount * (x - blur(x)).
      const double amount = rng.uniform(mag.sharpen_min, mag.sharpen_max);
      auto blurred = from_mat(gaussian(to_mat(image), 1.0));
      out = image + amount * (image - blurred);
      break;
    }
    case Augmentation::kCrop:
      out = crop_and_pad(image, rng, mag);
      break;
    case Augmentation::kGray: {
      auto y = 0.299 * image[0] + 0.587 * image[1] + 0.114 * image[2];
      out = y.unsqueeze(0).expand({3, -1, -1}).contiguous();
      break;
    }
    case Augmentation::kColorJitter: {
      auto gain = torch::empty({3, 1, 1});
      for (int c = 0; c < 3; ++c) gain[c] = rng.uniform(1.0 - mag.jitter_gain, 1.0 + mag.jitter_gain);
      const double shift = rng.uniform(-mag.jitter_shift, mag.jitter_shift);
      out = image * gain + shift;
      break;
    }
    case Augmentation::kPerspective:
      out = perspective_or_affine(image, rng, mag);
      break;
  }
  return torch::nan_to_num(out, 0.0, 1.0, 0.0).clamp(0.0, 1.0).contiguous();
}

Image augment(const Image& image, const AugmentationPolicy& policy, uint64_t seed) {
  check_image(image);
  Image out = image.contiguous();
  uint64_t k = 0;
  for (Augmentation a : select_augmentations(policy, seed)) {
    out = apply_augmentation(out, a, policy.magnitudes, derive_seed(seed, {policy.seed, ++k}));
  }
  return out;
}

ViewPair make_view_pair(const Image& image, const AugmentationPolicy& policy, uint64_t seed,
                        std::string source_id) {
  return ViewPair{augment(image, policy, derive_seed(seed, {0xa})),
                  augment(image, policy, derive_seed(seed, {0xb})), std::move(source_id)};
}

}  // namespace lego::corpus
