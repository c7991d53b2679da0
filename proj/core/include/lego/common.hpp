#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

#include <torch/torch.h>

namespace lego {

// Canonical input geometry: every text image is 3×32×128, channels first.
inline constexpr int64_t kChannels = 3;
inline constexpr int64_t kHeight = 32;
inline constexpr int64_t kWidth = 128;

// Number of codebook slots per image and of horizontal frames / portions.
inline constexpr int64_t kSlots = 8;

// Lowercase letters then digits; CTC class c+1 corresponds to kCharset[c].
inline constexpr std::string_view kCharset = "abcdefghijklmnopqrstuvwxyz0123456789";

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad or inconsistent configuration (unknown font, empty codebook, tau <= 0, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Input data violating an operation's precondition (shape, range, charset).
class ValidationError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Non-finite loss or similar numerical failure during training.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

// A single image is a float tensor [3, H, W] with values in [0, 1].
using Image = torch::Tensor;

void check_image(const Image& image, int64_t height = kHeight, int64_t width = kWidth);

// Lowercases and validates a transcript against kCharset.
std::string normalize_transcript(std::string_view text);
bool in_charset(char c);

}  // namespace lego
