#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "lego/common.hpp"

namespace lego::corpus {

using Rgb = std::array<float, 3>;

struct RenderSpec {
  std::string word;
  int font_id = 0;
  Rgb fg_color{0.05f, 0.05f, 0.05f};
  Rgb bg_color{0.95f, 0.95f, 0.95f};
  double noise_level = 0.0;
  uint64_t geometry_seed = 0;
  // Seeds the additive pixel noise only; irrelevant when noise_level == 0.
  uint64_t noise_seed = 0;
};

struct TextSample {
  Image image;
  std::string transcript;
  std::string sample_id;
};

inline constexpr size_t kMaxWordLength = 10;

// Number of bundled faces (OpenCV Hershey vector fonts).
int font_count();
std::string font_name(int font_id);

// Renders one word left-to-right inside a 32×128 frame. Bit-identical for
// identical specs.
TextSample render_sample(const RenderSpec& spec, std::string sample_id = {});

// Draws a plausible random spec for `word`: font, contrasting colors, small noise.
RenderSpec random_spec(const std::string& word, uint64_t seed);

// Built-in word list whose union of characters covers the whole charset.
const std::vector<std::string>& default_wordlist();

}  // namespace lego::corpus
