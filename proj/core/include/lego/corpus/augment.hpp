#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "lego/common.hpp"

namespace lego::corpus {

enum class Augmentation { kContrast, kBlur, kSharpen, kCrop, kGray, kColorJitter, kPerspective };

inline constexpr std::array<Augmentation, 7> kAugmentationMenu = {
    Augmentation::kContrast, Augmentation::kBlur,        Augmentation::kSharpen,
    Augmentation::kCrop,     Augmentation::kGray,        Augmentation::kColorJitter,
    Augmentation::kPerspective};

std::string augmentation_name(Augmentation a);

// Magnitudes for each menu item. Defaults are mild so words stay legible.
struct AugmentationMagnitudes {
  double contrast_min = 0.5, contrast_max = 1.5;
  double blur_sigma_min = 0.4, blur_sigma_max = 1.2;
  double sharpen_min = 0.5, sharpen_max = 1.5;
  int crop_max_dx = 12, crop_max_dy = 4;
  double jitter_gain = 0.2, jitter_shift = 0.1;
  double perspective_px = 3.0;
  double affine_degrees = 3.0, affine_shear = 0.08;
};

struct AugmentationPolicy {
  std::vector<Augmentation> menu{kAugmentationMenu.begin(), kAugmentationMenu.end()};
  int picks_per_view = 3;
  uint64_t seed = 0;
  AugmentationMagnitudes magnitudes{};
};

struct ViewPair {
  Image view_a;
  Image view_b;
  std::string source_id;
};

// Which menu items a given seed selects (distinct, draw order).
std::vector<Augmentation> select_augmentations(const AugmentationPolicy& policy, uint64_t seed);

// Applies one augmentation with its own random magnitude.
Image apply_augmentation(const Image& image, Augmentation a, const AugmentationMagnitudes& mag,
                         uint64_t seed);

// Applies exactly policy.picks_per_view distinct menu items; output stays
// 3×32×128 in [0,1].
Image augment(const Image& image, const AugmentationPolicy& policy, uint64_t seed);

ViewPair make_view_pair(const Image& image, const AugmentationPolicy& policy, uint64_t seed,
                        std::string source_id = {});

}  // namespace lego::corpus
