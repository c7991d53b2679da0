#pragma once

#include <cstdint>

#include "lego/corpus/render.hpp"

namespace lego::corpus {

// Stand-in for camera LR/HR pairs: blur, 2x box downsample, additive noise.
struct Degradation {
  double blur_sigma_min = 0.5;
  double blur_sigma_max = 1.5;
  double noise_sigma = 0.02;
};

struct SRPair {
  Image lr;  // [3,16,64]
  Image hr;  // [3,32,128]
};

SRPair make_sr_pair(const TextSample& sample, uint64_t seed, const Degradation& degradation = {});

// Exact 2x2 average pooling of a [3,H,W] image.
Image box_downsample2(const Image& image);

}  // namespace lego::corpus
