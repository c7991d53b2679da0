#include "lego/trainer/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

#include "lego/hash.hpp"

namespace lego::trainer {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    size_t used = 0;
    double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "' expects a number, got '" + v + "'");
  }
}

int64_t parse_int(const std::string& key, const std::string& v) {
  try {
    size_t used = 0;
    long long i = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return i;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "' expects an integer, got '" + v + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config key '" + key + "' expects a boolean, got '" + v + "'");
}

struct Field {
  const char* key;
  std::function<std::string(const PretrainConfig&)> get;
  std::function<void(PretrainConfig&, const std::string&)> set;
};

#define LEGO_DOUBLE(name)                                                        \
  Field{#name, [](const PretrainConfig& c) { return fmt_double(c.name); },       \
        [](PretrainConfig& c, const std::string& v) { c.name = parse_double(#name, v); }}
#define LEGO_INT(name)                                                           \
  Field{#name, [](const PretrainConfig& c) { return std::to_string(c.name); },   \
        [](PretrainConfig& c, const std::string& v) { c.name = parse_int(#name, v); }}
#define LEGO_BOOL(name)                                                                   \
  Field{#name, [](const PretrainConfig& c) { return std::string(c.name ? "true" : "false"); }, \
        [](PretrainConfig& c, const std::string& v) { c.name = parse_bool(#name, v); }}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      LEGO_DOUBLE(lr_init),      LEGO_DOUBLE(weight_decay), LEGO_DOUBLE(beta1),
      LEGO_DOUBLE(beta2),        LEGO_INT(epochs),          LEGO_INT(warmup_epochs),
      LEGO_INT(batch_size),      LEGO_INT(steps_per_epoch), LEGO_DOUBLE(alpha),
      LEGO_DOUBLE(beta),         LEGO_DOUBLE(tau),          LEGO_DOUBLE(ema_m),
      LEGO_DOUBLE(mask_ratio),   LEGO_INT(n_portions),      LEGO_DOUBLE(grad_clip),
      LEGO_INT(picks_per_view),
      Field{"seed", [](const PretrainConfig& c) { return std::to_string(c.seed); },
            [](PretrainConfig& c, const std::string& v) { c.seed = static_cast<uint64_t>(parse_int("seed", v)); }},
      LEGO_BOOL(enable_sid),     LEGO_BOOL(enable_mim),     LEGO_BOOL(enable_rtr),
      Field{"vit_preset", [](const PretrainConfig& c) { return c.vit_preset; },
            [](PretrainConfig& c, const std::string& v) { c.vit_preset = v; }},
      LEGO_INT(vit_dim),         LEGO_INT(vit_depth),       LEGO_INT(vit_heads),
      LEGO_DOUBLE(vit_mlp_ratio), LEGO_INT(proj_hidden),    LEGO_INT(proj_dim),
      LEGO_INT(pred_hidden),     LEGO_INT(mim_blocks),      LEGO_INT(mixer_token_hidden),
      LEGO_INT(mixer_channel_hidden), LEGO_INT(checkpoint_every),
  };
  return table;
}

#undef LEGO_DOUBLE
#undef LEGO_INT
#undef LEGO_BOOL

}  // namespace

std::map<std::string, std::string> parse_key_values(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    auto key = trim(line.substr(0, eq));
    auto value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    if (!out.emplace(key, value).second) throw ConfigError("duplicate config key '" + key + "'");
  }
  return out;
}

pretext::ViTConfig PretrainConfig::vit() const {
  pretext::ViTConfig v;
  if (vit_preset == "small") v = pretext::ViTConfig::small();
  else if (vit_preset == "desk") v = pretext::ViTConfig::desk();
  else if (vit_preset == "tiny") v = pretext::ViTConfig::tiny();
  else throw ConfigError("unknown vit_preset '" + vit_preset + "'");
  if (vit_dim > 0) v.dim = vit_dim;
  if (vit_depth >= 0) v.depth = vit_depth;
  if (vit_heads > 0) v.heads = vit_heads;
  if (vit_mlp_ratio > 0.0) v.mlp_ratio = vit_mlp_ratio;
  return v;
}

void PretrainConfig::validate() const {
  if (!(lr_init > 0.0) || weight_decay < 0.0) throw ConfigError("lr_init must be positive and weight_decay >= 0");
  if (!(beta1 > 0.0 && beta1 < 1.0 && beta2 > 0.0 && beta2 < 1.0)) throw ConfigError("Adam betas must be in (0,1)");
  if (epochs <= 0 || warmup_epochs < 0 || warmup_epochs > epochs) throw ConfigError("invalid epoch counts");
  if (batch_size < 2) throw ConfigError("batch_size must be at least 2");
  if (steps_per_epoch < 0) throw ConfigError("steps_per_epoch must be >= 0");
  if (!std::isfinite(alpha) || !std::isfinite(beta)) throw ConfigError("alpha and beta must be finite");
  if (!(tau > 0.0)) throw ConfigError("tau must be positive");
  if (ema_m < 0.0 || ema_m > 1.0) throw ConfigError("ema_m must be in [0,1]");
  if (mask_ratio < 0.0 || mask_ratio > 1.0) throw ConfigError("mask_ratio must be in [0,1]");
  if (n_portions != kSlots) throw ConfigError("n_portions must equal the 8 codebook slots");
  if (!(grad_clip > 0.0)) throw ConfigError("grad_clip must be positive");
  if (picks_per_view < 0 || picks_per_view > 7) throw ConfigError("picks_per_view must be in [0,7]");
  if (!enable_sid && !enable_mim && !enable_rtr) throw ConfigError("at least one pretext task must be enabled");
  if (proj_hidden <= 0 || proj_dim <= 0 || pred_hidden <= 0 || mim_blocks <= 0 || mixer_token_hidden <= 0 ||
      mixer_channel_hidden < 0) {
    throw ConfigError("head widths must be positive");
  }
  auto v = vit();
  v.validate();
  if (v.grid_w() % kSlots != 0) throw ConfigError("ViT grid width must be a multiple of 8");
}

std::string PretrainConfig::to_text() const {
  std::string out;
  for (const auto& f : fields()) out += std::string(f.key) + " = " + f.get(*this) + "\n";
  return out;
}

std::string PretrainConfig::hash() const { return sha256_hex(to_text()); }

PretrainConfig PretrainConfig::from_text(const std::string& text) {
  PretrainConfig c;
  auto kv = parse_key_values(text);
  for (const auto& f : fields()) {
    if (auto it = kv.find(f.key); it != kv.end()) {
      f.set(c, it->second);
      kv.erase(it);
    }
  }
  if (!kv.empty()) throw ConfigError("unknown config key '" + kv.begin()->first + "'");
  c.validate();
  return c;
}

PretrainConfig PretrainConfig::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_text(ss.str());
}

}  // namespace lego::trainer
