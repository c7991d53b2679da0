#include "lego/corpus/render.hpp"

#include <algorithm>
#include <cmath>

#include <opencv2/imgproc.hpp>

#include "lego/rng.hpp"

namespace lego::corpus {

namespace {

struct Face {
  int cv_face;
  const char* name;
};

constexpr Face kFaces[] = {
    {cv::FONT_HERSHEY_SIMPLEX, "hershey-simplex"},
    {cv::FONT_HERSHEY_DUPLEX, "hershey-duplex"},
    {cv::FONT_HERSHEY_COMPLEX, "hershey-complex"},
    {cv::FONT_HERSHEY_TRIPLEX, "hershey-triplex"},
    {cv::FONT_HERSHEY_PLAIN, "hershey-plain"},
    {cv::FONT_HERSHEY_SIMPLEX | cv::FONT_ITALIC, "hershey-simplex-italic"},
};

constexpr int kSupersample = 2;

double luma(const Rgb& c) { return 0.299 * c[0] + 0.587 * c[1] + 0.114 * c[2]; }

}  // namespace

int font_count() { return static_cast<int>(std::size(kFaces)); }

std::string font_name(int font_id) {
  if (font_id < 0 || font_id >= font_count()) throw ConfigError("unknown font_id " + std::to_string(font_id));
  return kFaces[font_id].name;
}

TextSample render_sample(const RenderSpec& spec, std::string sample_id) {
  if (spec.font_id < 0 || spec.font_id >= font_count()) {
    throw ConfigError("unknown font_id " + std::to_string(spec.font_id));
  }
  if (spec.word.empty() || spec.word.size() > kMaxWordLength) {
    throw ValidationError("word length must be in [1, 10], got " + std::to_string(spec.word.size()));
  }
  if (spec.noise_level < 0.0) throw ValidationError("noise_level must be non-negative");
  const std::string word = normalize_transcript(spec.word);
  const int face = kFaces[spec.font_id].cv_face;

  Rng geo(derive_seed(spec.geometry_seed, {0x67656f}));
  const int canvas_h = static_cast<int>(kHeight) * kSupersample;
  const int canvas_w = static_cast<int>(kWidth) * kSupersample;
  const int thickness = 1 + static_cast<int>(geo.below(3));
  const int margin = 2 * kSupersample + thickness;

  int baseline = 0;
  const cv::Size unit = cv::getTextSize(word, face, 1.0, thickness, &baseline);
  const double target_h = geo.uniform(0.55, 0.85) * (canvas_h - 2 * margin);
  const double max_w = geo.uniform(0.6, 1.0) * (canvas_w - 2 * margin);
  double scale = std::min(target_h / (unit.height + baseline), max_w / std::max(unit.width, 1));
  // Thickness does not scale with the glyphs; re-measure so the box is exact.
  cv::Size size = cv::getTextSize(word, face, scale, thickness, &baseline);
  while (size.width > canvas_w - 2 * margin || size.height + baseline > canvas_h - 2 * margin) {
    scale *= 0.95;
    size = cv::getTextSize(word, face, scale, thickness, &baseline);
  }
  const int slack_x = canvas_w - 2 * margin - size.width;
  const int slack_y = canvas_h - 2 * margin - size.height - baseline;
  const int x = margin + static_cast<int>(geo.below(static_cast<uint64_t>(slack_x) + 1));
  const int y = margin + size.height + static_cast<int>(geo.below(static_cast<uint64_t>(slack_y) + 1));

  cv::Mat canvas = cv::Mat::zeros(canvas_h, canvas_w, CV_8UC1);
  cv::putText(canvas, word, cv::Point(x, y), face, scale, cv::Scalar(255), thickness, cv::LINE_AA);
  cv::Mat alpha8;
  cv::resize(canvas, alpha8, cv::Size(static_cast<int>(kWidth), static_cast<int>(kHeight)), 0, 0,
             cv::INTER_AREA);

  auto alpha = torch::from_blob(alpha8.data, {kHeight, kWidth}, torch::kUInt8).to(torch::kFloat32).div(255.0);
  auto fg = torch::tensor({spec.fg_color[0], spec.fg_color[1], spec.fg_color[2]}).view({3, 1, 1});
  auto bg = torch::tensor({spec.bg_color[0], spec.bg_color[1], spec.bg_color[2]}).view({3, 1, 1});
  auto image = bg * (1.0 - alpha) + fg * alpha;

  if (spec.noise_level > 0.0) {
    Rng noise(derive_seed(spec.noise_seed, {0x6e6f697365}));
    auto n = torch::empty({kChannels, kHeight, kWidth});
    auto* p = n.data_ptr<float>();
    for (int64_t i = 0; i < n.numel(); ++i) p[i] = static_cast<float>(noise.normal(0.0, spec.noise_level));
    image = image + n;
  }
  image = image.clamp(0.0, 1.0).contiguous();
  return TextSample{image, word, std::move(sample_id)};
}

constexpr double kTint = 0.2;

RenderSpec random_spec(const std::string& word, uint64_t seed) {
  Rng rng(derive_seed(seed, {0x73706563}));
  RenderSpec spec;
  spec.word = word;
  spec.font_id = static_cast<int>(rng.below(static_cast<uint64_t>(font_count())));
  // Near-gray fg/bg pairs with a mild per-channel tint.
  do {
    const double lb = rng.uniform();
    const double lf = rng.uniform();
    for (auto& c : spec.bg_color) c = static_cast<float>(std::clamp(lb + kTint * (rng.uniform() - 0.5), 0.0, 1.0));
    for (auto& c : spec.fg_color) c = static_cast<float>(std::clamp(lf + kTint * (rng.uniform() - 0.5), 0.0, 1.0));
  } while (std::abs(luma(spec.fg_color) - luma(spec.bg_color)) < 0.35);
  spec.noise_level = rng.uniform(0.0, 0.03);
  spec.geometry_seed = rng.next();
  spec.noise_seed = rng.next();
  return spec;
}

const std::vector<std::string>& default_wordlist() {
  static const std::vector<std::string> words = {
      "the",     "and",     "coffee",  "tea",     "eat",    "ate",     "open",    "closed",  "exit",
      "enter",   "pizza",   "jazz",    "quick",   "brown",  "fox",     "jumps",   "over",    "lazy",
      "dog",     "hotel",   "market",  "street",  "avenue", "bank",    "cafe",    "bakery",  "quiet",
      "zone",    "video",   "music",   "books",   "sale",   "free",    "wifi",    "parking", "taxi",
      "metro",   "station", "school",  "garden",  "museum", "theatre", "cinema",  "police",  "pharmacy",
      "kiosk",   "yoga",    "gym",     "juice",   "bar",    "grill",   "kitchen", "express", "boutique",
      "gallery", "library", "office",  "center",  "north",  "south",   "west",    "east",    "road",
      "lane",    "way",     "drive",   "plaza",   "square", "tower",   "bridge",  "river",   "lake",
      "park",    "shop",    "store",   "mall",    "outlet", "fresh",   "fruit",   "wine",    "beer",
      "vodka",   "whiskey", "jungle",  "oxygen",  "galaxy", "quartz",  "zebra",   "wax",     "joker",
      "2024",    "1999",    "365",     "24",      "7",      "route66", "b52",     "4u",      "50off",
      "no1",     "k9",      "area51",  "r2d2",    "c3po",   "8ball",   "911",     "360",     "12",
      "mp3",     "usb",     "3d",      "gate7",   "lot9",   "room101", "pier39",  "exit12",  "apt4b",
      "hello",   "world",   "text",    "scene",   "image",  "lego",    "word",    "spell",   "read",
      "write",   "letter",  "order",   "random",  "sign",   "board",   "neon",    "light",   "night",
      "day",     "city",    "town",    "village", "house",  "home",    "food",    "drink",   "menu",
  };
  return words;
}

}  // namespace lego::corpus
