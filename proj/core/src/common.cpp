#include "lego/common.hpp"

#include <cctype>
#include <sstream>

namespace lego {

void check_image(const Image& image, int64_t height, int64_t width) {
  if (!image.defined() || image.dim() != 3 || image.size(0) != kChannels ||
      image.size(1) != height || image.size(2) != width) {
    std::ostringstream msg;
    msg << "expected image of shape [3," << height << "," << width << "], got ";
    if (image.defined()) {
      msg << image.sizes();
    } else {
      msg << "undefined tensor";
    }
    throw ValidationError(msg.str());
  }
}

bool in_charset(char c) { return kCharset.find(c) != std::string_view::npos; }

std::string normalize_transcript(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    char lower = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (!in_charset(lower)) {
      throw ValidationError("character '" + std::string(1, c) + "' is outside the charset");
    }
    out.push_back(lower);
  }
  return out;
}

}  // namespace lego
