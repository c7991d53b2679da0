#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

namespace lego::downstream {

struct EvalReport {
  std::string split;
  std::string task;  // "recognition" or "super_resolution"
  std::optional<double> word_accuracy;
  std::optional<double> psnr;
  std::optional<double> ssim;
  std::optional<double> baseline_psnr;  // bicubic, SR only
  std::optional<double> baseline_ssim;
  int64_t samples = 0;
  std::string config_hash;

  // Throws ValidationError when a metric is outside its range.
  void validate() const;
  nlohmann::ordered_json to_json() const;
  static EvalReport from_json(const nlohmann::json& j);
};

void write_report(const std::filesystem::path& path, const EvalReport& report);

}  // namespace lego::downstream
