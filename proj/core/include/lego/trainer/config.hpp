#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "lego/pretext/vit.hpp"

namespace lego::trainer {

// Every field maps to a key of the same name in the config file.
struct PretrainConfig {
  double lr_init = 1.5e-4;
  double weight_decay = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.95;
  int64_t epochs = 10;
  int64_t warmup_epochs = 1;
  int64_t batch_size = 64;
  // 0 derives ceil(corpus / batch_size).
  int64_t steps_per_epoch = 0;
  double alpha = 0.1;  // weight of the MIM loss
  double beta = 1.0;   // weight of the RTR loss
  double tau = 0.2;
  double ema_m = 0.99;
  double mask_ratio = 0.75;
  int64_t n_portions = 8;
  double grad_clip = 1.0;
  int64_t picks_per_view = 3;
  uint64_t seed = 0;

  bool enable_sid = true;
  bool enable_mim = true;
  bool enable_rtr = true;

  // "small" (12 blocks, width 384), "desk" or "tiny"; explicit vit_* keys
  // override the preset.
  std::string vit_preset = "small";
  int64_t vit_dim = 0;
  int64_t vit_depth = -1;
  int64_t vit_heads = 0;
  double vit_mlp_ratio = 0.0;

  int64_t proj_hidden = 4096;
  int64_t proj_dim = 256;
  int64_t pred_hidden = 4096;
  int64_t mim_blocks = 1;
  int64_t mixer_token_hidden = 32;
  int64_t mixer_channel_hidden = 0;  // 0 -> 4 * ViT width

  // Checkpoint every N steps (0: only at the end).
  int64_t checkpoint_every = 0;

  pretext::ViTConfig vit() const;
  void validate() const;

  // Canonical "key = value" text, one line per field, fixed order.
  std::string to_text() const;
  std::string hash() const;

  static PretrainConfig from_text(const std::string& text);
  static PretrainConfig from_file(const std::filesystem::path& path);
};

// Parses "key = value" lines; '#' starts a comment. Throws ConfigError on
// malformed lines or duplicate keys.
std::map<std::string, std::string> parse_key_values(const std::string& text);

}  // namespace lego::trainer
