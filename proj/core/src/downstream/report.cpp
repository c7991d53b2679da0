#include "lego/downstream/report.hpp"

#include <cmath>
#include <limits>
#include <fstream>

#include "lego/binary_io.hpp"
#include "lego/common.hpp"

namespace lego::downstream {

namespace {

// JSON has no infinity; identical images are written as null.
nlohmann::ordered_json number_or_null(double v) {
  return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr);
}

}  // namespace

void EvalReport::validate() const {
  if (word_accuracy && (*word_accuracy < 0.0 || *word_accuracy > 1.0)) {
    throw ValidationError("word accuracy outside [0,1]");
  }
  for (const auto& s : {ssim, baseline_ssim}) {
    if (s && (*s < -1.0 || *s > 1.0)) throw ValidationError("ssim outside [-1,1]");
  }
  if (samples < 0) throw ValidationError("negative sample count");
}

nlohmann::ordered_json EvalReport::to_json() const {
  validate();
  nlohmann::ordered_json j;
  j["split"] = split;
  j["task"] = task;
  if (word_accuracy) j["word_accuracy"] = *word_accuracy;
  if (psnr) j["psnr"] = number_or_null(*psnr);
  if (ssim) j["ssim"] = *ssim;
  if (baseline_psnr) j["baseline_psnr"] = number_or_null(*baseline_psnr);
  if (baseline_ssim) j["baseline_ssim"] = *baseline_ssim;
  j["samples"] = samples;
  j["config_hash"] = config_hash;
  return j;
}

EvalReport EvalReport::from_json(const nlohmann::json& j) {
  EvalReport r;
  r.split = j.at("split").get<std::string>();
  r.task = j.at("task").get<std::string>();
  auto opt = [&](const char* key, std::optional<double>& out) {
    if (!j.contains(key)) return;
    out = j[key].is_null() ? std::numeric_limits<double>::infinity() : j[key].get<double>();
  };
  opt("word_accuracy", r.word_accuracy);
  opt("psnr", r.psnr);
  opt("ssim", r.ssim);
  opt("baseline_psnr", r.baseline_psnr);
  opt("baseline_ssim", r.baseline_ssim);
  r.samples = j.at("samples").get<int64_t>();
  r.config_hash = j.value("config_hash", "");
  r.validate();
  return r;
}

void write_report(const std::filesystem::path& path, const EvalReport& report) {
  const auto text = report.to_json().dump(2) + "\n";
  write_file_atomic(path, std::vector<unsigned char>(text.begin(), text.end()));
}

}  // namespace lego::downstream
