#include "lego/trainer/pretrain.hpp"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "lego/binary_io.hpp"
#include "lego/hash.hpp"
#include "lego/nn_init.hpp"
#include "lego/pretext/sid.hpp"
#include "lego/rng.hpp"
#include "lego/trainer/schedule.hpp"

namespace lego::trainer {

namespace fs = std::filesystem;

namespace {

constexpr size_t kDigestBytes = 64;  // hex digest stored as text

int64_t channel_hidden(const PretrainConfig& c) {
  return c.mixer_channel_hidden > 0 ? c.mixer_channel_hidden : 4 * c.vit().dim;
}

torch::Tensor frames_of(pretext::ViTEncoder& vit, const torch::Tensor& images) {
  const auto& v = vit->config();
  return pretext::instance_map(vit->forward(images), v.grid_h(), v.grid_w());
}

}  // namespace

OnlineNetworkImpl::OnlineNetworkImpl(const PretrainConfig& config, int64_t latent_dim) {
  const auto v = config.vit();
  vit = register_module("vit", pretext::ViTEncoder(v, derive_seed(config.seed, {1})));
  projector = register_module("projector", pretext::Mlp(v.dim, config.proj_hidden, config.proj_dim, 3));
  predictor = register_module("predictor", pretext::Mlp(config.proj_dim, config.pred_hidden, config.proj_dim, 2));
  init_parameters(*projector, derive_seed(config.seed, {2}));
  init_parameters(*predictor, derive_seed(config.seed, {3}));
  mim = register_module("mim", pretext::MimHead(v, latent_dim, config.mim_blocks, derive_seed(config.seed, {4})));
  rank = register_module("rank", pretext::MixerRankHead(config.n_portions, v.dim, config.mixer_token_hidden,
                                                        channel_hidden(config), derive_seed(config.seed, {5})));
}

MomentumNetworkImpl::MomentumNetworkImpl(const PretrainConfig& config) {
  const auto v = config.vit();
  vit = register_module("vit", pretext::ViTEncoder(v));
  projector = register_module("projector", pretext::Mlp(v.dim, config.proj_hidden, config.proj_dim, 3));
}

void apply_determinism_from_env() {
  const char* flag = std::getenv("LEGO_DETERMINISTIC");
  if (flag != nullptr && std::strcmp(flag, "1") == 0) {
    at::globalContext().setDeterministicAlgorithms(true, false);
    torch::set_num_threads(1);
  }
}

Pretrainer::Pretrainer(PretrainConfig config, const codebook::TextKnowledgeCodebook& codebook,
                       std::vector<corpus::TextSample> corpus)
    : config_(std::move(config)), codebook_(codebook), corpus_(std::move(corpus)) {
  config_.validate();
  apply_determinism_from_env();
  if (corpus_.empty()) throw ValidationError("pretraining corpus is empty");
  codebook_hash_ = codebook_.hash();
  if (codebook_.recompute_hash() != codebook_hash_) throw ConfigError("codebook parameters changed after load");

  std::vector<torch::Tensor> token_chunks;
  for (size_t begin = 0; begin < corpus_.size(); begin += 64) {
    std::vector<torch::Tensor> images;
    for (size_t i = begin; i < std::min(corpus_.size(), begin + 64); ++i) {
      check_image(corpus_[i].image);
      images.push_back(corpus_[i].image);
    }
    token_chunks.push_back(codebook_.tokenize_batch(torch::stack(images)));
  }
  corpus_tokens_ = torch::cat(token_chunks);

  steps_per_epoch_ = config_.steps_per_epoch > 0
                         ? config_.steps_per_epoch
                         : (static_cast<int64_t>(corpus_.size()) + config_.batch_size - 1) / config_.batch_size;
  policy_.picks_per_view = static_cast<int>(config_.picks_per_view);
  policy_.seed = config_.seed;

  online_ = OnlineNetwork(config_, codebook_.dim());
  momentum_ = MomentumNetwork(config_);
  load_state(*momentum_->vit, state_of(*online_->vit));
  load_state(*momentum_->projector, state_of(*online_->projector));
  for (auto& p : momentum_->parameters()) p.requires_grad_(false);

  optimizer_ = std::make_unique<torch::optim::AdamW>(
      online_->parameters(), torch::optim::AdamWOptions(config_.lr_init)
                                 .betas({config_.beta1, config_.beta2})
                                 .weight_decay(config_.weight_decay));
}

double Pretrainer::current_lr() const {
  return lr_schedule(step_, config_.lr_init, warmup_steps(), total_steps());
}

void Pretrainer::set_lr(double lr) {
  for (auto& group : optimizer_->param_groups()) {
    static_cast<torch::optim::AdamWOptions&>(group.options()).lr(lr);
  }
}

PretrainBatch Pretrainer::make_batch(int64_t step) const {
  const auto n = static_cast<int64_t>(corpus_.size());
  const int64_t epoch = step / steps_per_epoch_;
  const int64_t pos = step % steps_per_epoch_;
  Rng epoch_rng(derive_seed(config_.seed, {0x65706f6368, static_cast<uint64_t>(epoch)}));
  const auto perm = epoch_rng.permutation(static_cast<int>(n));
  const auto vit = config_.vit();

  PretrainBatch batch;
  batch.step = step;
  std::vector<torch::Tensor> images, view_a, view_b, shuffled, masks;
  std::vector<int64_t> rows;
  for (int64_t i = 0; i < config_.batch_size; ++i) {
    const int64_t idx = perm[(pos * config_.batch_size + i) % n];
    rows.push_back(idx);
    const auto& image = corpus_[idx].image;
    const uint64_t s = derive_seed(config_.seed, {static_cast<uint64_t>(step), static_cast<uint64_t>(i)});
    images.push_back(image);
    if (config_.enable_sid) {
      auto pair = corpus::make_view_pair(image, policy_, derive_seed(s, {0x766965}));
      view_a.push_back(pair.view_a);
      view_b.push_back(pair.view_b);
    }
    if (config_.enable_mim) {
      masks.push_back(pretext::make_mask_plan(vit.num_tokens(), config_.mask_ratio, derive_seed(s, {0x6d}))
                          .as_tensor());
    }
    if (config_.enable_rtr) {
      auto tok = corpus_tokens_[idx];
      std::vector<int64_t> portion(tok.data_ptr<int64_t>(), tok.data_ptr<int64_t>() + kSlots);
      Rng rng(derive_seed(s, {0x727472}));
      auto inst = pretext::make_permutation(image, portion, static_cast<int>(config_.n_portions), rng);
      shuffled.push_back(inst.shuffled);
      batch.valid_labels.push_back(std::move(inst.valid_labels));
    }
  }
  batch.images = torch::stack(images);
  batch.tokens = corpus_tokens_.index_select(0, torch::tensor(rows, torch::kInt64));
  if (!view_a.empty()) {
    batch.view_a = torch::stack(view_a);
    batch.view_b = torch::stack(view_b);
  }
  if (!masks.empty()) batch.patch_mask = torch::stack(masks);
  if (!shuffled.empty()) batch.shuffled = torch::stack(shuffled);
  return batch;
}

torch::Tensor Pretrainer::forward_losses(const PretrainBatch& batch, LossBundle& bundle) {
  const auto zero = torch::zeros({});
  torch::Tensor l_c = zero, l_m = zero, l_r = zero;
  const auto& vit_cfg = online_->vit->config();

  if (config_.enable_sid) {
    auto qa = online_->predictor->forward(online_->projector->forward(frames_of(online_->vit, batch.view_a)));
    auto qb = online_->predictor->forward(online_->projector->forward(frames_of(online_->vit, batch.view_b)));
    torch::Tensor ka, kb;
    {
      torch::NoGradGuard no_grad;
      ka = momentum_->projector->forward(frames_of(momentum_->vit, batch.view_a));
      kb = momentum_->projector->forward(frames_of(momentum_->vit, batch.view_b));
    }
    const uint64_t s = derive_seed(config_.seed, {static_cast<uint64_t>(batch.step), 0x736964});
    auto ab = pretext::sid_loss(qa, kb, batch.tokens, config_.tau, derive_seed(s, {1}));
    auto ba = pretext::sid_loss(qb, ka, batch.tokens, config_.tau, derive_seed(s, {2}));
    l_c = 0.5 * (ab.loss + ba.loss);
  }
  if (config_.enable_mim) {
    auto embedded = online_->vit->embed(batch.images);
    auto masked = pretext::apply_mask(embedded, batch.patch_mask, online_->mim->mask_token());
    auto encoded = online_->vit->encode(masked);
    auto latents = codebook_.retrieve_latents(batch.tokens).to(encoded.scalar_type());
    auto prediction = online_->mim->forward(encoded, latents);
    l_m = pretext::masked_l1(prediction, batch.images, pretext::pixel_mask(batch.patch_mask, vit_cfg));
  }
  if (config_.enable_rtr) {
    auto tokens = online_->vit->forward(batch.shuffled);
    auto portions = pretext::banded_mean(tokens, vit_cfg.grid_h(), vit_cfg.grid_w(), config_.n_portions);
    l_r = pretext::rtr_loss(online_->rank->forward(portions), batch.valid_labels);
  }
  auto total = combine_losses(l_c, l_m, l_r, config_.alpha, config_.beta);
  bundle.contrastive = l_c.item<double>();
  bundle.masked = l_m.item<double>();
  bundle.rearrangement = l_r.item<double>();
  bundle.total = total.item<double>();
  return total;
}

LossBundle Pretrainer::evaluate(const PretrainBatch& batch) {
  torch::NoGradGuard no_grad;
  LossBundle bundle;
  forward_losses(batch, bundle);
  return bundle;
}

StepRecord Pretrainer::train_step() { return train_step(make_batch(step_)); }

StepRecord Pretrainer::train_step(const PretrainBatch& batch) {
  StepRecord record;
  record.step = step_;
  record.lr = current_lr();
  set_lr(record.lr);
  optimizer_->zero_grad();
  auto total = forward_losses(batch, record.losses);
  total.backward();
  torch::nn::utils::clip_grad_norm_(online_->parameters(), config_.grad_clip);
  optimizer_->step();
  pretext::ema_update(*momentum_->vit, *online_->vit, config_.ema_m);
  pretext::ema_update(*momentum_->projector, *online_->projector, config_.ema_m);
  ++step_;
  return record;
}

std::vector<StepRecord> Pretrainer::run(std::optional<int64_t> last_step, const StepCallback& on_step) {
  const int64_t end = std::min(last_step.value_or(total_steps()), total_steps());
  std::vector<StepRecord> records;
  while (step_ < end) {
    records.push_back(train_step());
    if (on_step) on_step(records.back());
  }
  return records;
}

std::vector<unsigned char> Pretrainer::serialize_checkpoint() const {
  ByteWriter w;
  w.raw(kCheckpointMagic, sizeof kCheckpointMagic);
  w.u32(kCheckpointVersion);
  w.str(config_.to_text());
  w.str(config_.hash());
  w.str(codebook_hash_);
  w.u64(static_cast<uint64_t>(step_));
  w.named_tensors(state_of(*online_));
  w.named_tensors(state_of(*momentum_));
  const auto& state = optimizer_->state();
  for (const auto& p : online_->parameters()) {
    auto it = state.find(p.unsafeGetTensorImpl());
    if (it == state.end()) {
      w.u32(0);
      continue;
    }
    const auto& s = static_cast<const torch::optim::AdamWParamState&>(*it->second);
    w.u32(1);
    w.i64(s.step());
    w.tensor(s.exp_avg());
    w.tensor(s.exp_avg_sq());
  }
  const auto digest = sha256_hex(w.bytes());
  w.raw(digest.data(), digest.size());
  return w.bytes();
}

void Pretrainer::save_checkpoint(const fs::path& path) const { write_file_atomic(path, serialize_checkpoint()); }

namespace {

std::vector<unsigned char> verified_body(const std::vector<unsigned char>& bytes) {
  if (bytes.size() < sizeof kCheckpointMagic + kDigestBytes ||
      std::memcmp(bytes.data(), kCheckpointMagic, sizeof kCheckpointMagic) != 0) {
    throw IoError("not a pretraining checkpoint");
  }
  std::vector<unsigned char> body(bytes.begin(), bytes.end() - kDigestBytes);
  const std::string stored(bytes.end() - kDigestBytes, bytes.end());
  if (sha256_hex(body) != stored) throw IoError("checkpoint content hash mismatch");
  return body;
}

}  // namespace

void Pretrainer::load_checkpoint_bytes(const std::vector<unsigned char>& bytes) {
  const auto body = verified_body(bytes);
  ByteReader r(body, sizeof kCheckpointMagic);
  if (r.u32() != kCheckpointVersion) throw IoError("unsupported checkpoint version");
  const auto config_text = r.str();
  const auto config_hash = r.str();
  const auto codebook_hash = r.str();
  if (config_hash != config_.hash()) throw ConfigError("checkpoint was written with a different config");
  if (codebook_hash != codebook_hash_) throw ConfigError("checkpoint was written with a different codebook");
  (void)config_text;
  step_ = static_cast<int64_t>(r.u64());
  load_state(*online_, r.named_tensors());
  load_state(*momentum_, r.named_tensors());
  auto& state = optimizer_->state();
  state.clear();
  for (const auto& p : online_->parameters()) {
    if (r.u32() == 0) continue;
    auto s = std::make_unique<torch::optim::AdamWParamState>();
    s->step(r.i64());
    s->exp_avg(r.tensor());
    s->exp_avg_sq(r.tensor());
    state[p.unsafeGetTensorImpl()] = std::move(s);
  }
  if (r.remaining() != 0) throw IoError("trailing bytes in checkpoint");
}

void Pretrainer::load_checkpoint(const fs::path& path) { load_checkpoint_bytes(read_file(path)); }

CheckpointInfo read_checkpoint_info(const fs::path& path) {
  const auto bytes = read_file(path);
  const auto body = verified_body(bytes);
  ByteReader r(body, sizeof kCheckpointMagic);
  if (r.u32() != kCheckpointVersion) throw IoError("unsupported checkpoint version");
  CheckpointInfo info;
  info.config = PretrainConfig::from_text(r.str());
  info.config_hash = r.str();
  info.codebook_hash = r.str();
  info.step = static_cast<int64_t>(r.u64());
  return info;
}

pretext::ViTEncoder load_encoder(const fs::path& checkpoint) {
  const auto bytes = read_file(checkpoint);
  const auto body = verified_body(bytes);
  ByteReader r(body, sizeof kCheckpointMagic);
  r.u32();
  auto config = PretrainConfig::from_text(r.str());
  r.str();
  r.str();
  r.u64();
  std::vector<std::pair<std::string, torch::Tensor>> vit_state;
  for (auto& [name, t] : r.named_tensors()) {
    if (name.rfind("vit.", 0) == 0) vit_state.emplace_back(name.substr(4), t);
  }
  pretext::ViTEncoder encoder(config.vit());
  load_state(*encoder, vit_state);
  return encoder;
}

fs::path run_pretraining(const PretrainConfig& config, const std::vector<corpus::TextSample>& corpus,
                         const codebook::TextKnowledgeCodebook& codebook, const RunOptions& options) {
  std::error_code ec;
  fs::create_directories(options.out_dir, ec);
  if (ec) throw IoError("cannot create " + options.out_dir.string() + ": " + ec.message());
  Pretrainer trainer(config, codebook, corpus);
  if (options.resume) trainer.load_checkpoint(*options.resume);

  std::ofstream metrics(options.out_dir / "metrics.jsonl", options.resume ? std::ios::app : std::ios::trunc);
  if (!metrics) throw IoError("cannot write metrics log in " + options.out_dir.string());
  try {
    trainer.run(std::nullopt, [&](const StepRecord& rec) {
      nlohmann::ordered_json j;
      j["step"] = rec.step;
      j["L_c"] = rec.losses.contrastive;
      j["L_m"] = rec.losses.masked;
      j["L_r"] = rec.losses.rearrangement;
      j["total"] = rec.losses.total;
      j["lr"] = rec.lr;
      metrics << j.dump() << "\n";
      metrics.flush();
      if (config.checkpoint_every > 0 && trainer.step() % config.checkpoint_every == 0) {
        trainer.save_checkpoint(options.out_dir / ("checkpoint-" + std::to_string(trainer.step()) + ".bin"));
      }
    });
  } catch (const DivergenceError&) {
    trainer.save_checkpoint(options.out_dir / "checkpoint-diverged.bin");
    throw;
  }
  const auto path = options.out_dir / "checkpoint.bin";
  trainer.save_checkpoint(path);
  return path;
}

}  // namespace lego::trainer
