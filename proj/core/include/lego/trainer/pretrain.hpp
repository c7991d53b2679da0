#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "lego/codebook/codebook.hpp"
#include "lego/corpus/augment.hpp"
#include "lego/corpus/render.hpp"
#include "lego/pretext/mim.hpp"
#include "lego/pretext/rtr.hpp"
#include "lego/pretext/vit.hpp"
#include "lego/trainer/config.hpp"
#include "lego/trainer/losses.hpp"

namespace lego::trainer {

// Online branch: ViT, projection and prediction heads, MIM head, rank head.
class OnlineNetworkImpl : public torch::nn::Module {
 public:
  OnlineNetworkImpl(const PretrainConfig& config, int64_t latent_dim);

  pretext::ViTEncoder vit{nullptr};
  pretext::Mlp projector{nullptr};
  pretext::Mlp predictor{nullptr};
  pretext::MimHead mim{nullptr};
  pretext::MixerRankHead rank{nullptr};
};
TORCH_MODULE(OnlineNetwork);

// Momentum branch: ViT and projection head, updated only by EMA.
class MomentumNetworkImpl : public torch::nn::Module {
 public:
  explicit MomentumNetworkImpl(const PretrainConfig& config);

  pretext::ViTEncoder vit{nullptr};
  pretext::Mlp projector{nullptr};
};
TORCH_MODULE(MomentumNetwork);

struct PretrainBatch {
  int64_t step = 0;
  torch::Tensor images;   // [B,3,H,W] un-augmented
  torch::Tensor view_a;   // [B,3,H,W]
  torch::Tensor view_b;   // [B,3,H,W]
  torch::Tensor shuffled; // [B,3,H,W] RTR input
  torch::Tensor tokens;   // [B,8] codebook indices of `images`
  torch::Tensor patch_mask;  // [B,T] bool
  std::vector<std::vector<pretext::Labeling>> valid_labels;
};

struct StepRecord {
  int64_t step = 0;
  double lr = 0.0;
  LossBundle losses;
};

using StepCallback = std::function<void(const StepRecord&)>;

class Pretrainer {
 public:
  // The codebook must outlive the trainer.
  Pretrainer(PretrainConfig config, const codebook::TextKnowledgeCodebook& codebook,
             std::vector<corpus::TextSample> corpus);

  const PretrainConfig& config() const { return config_; }
  int64_t step() const { return step_; }
  int64_t steps_per_epoch() const { return steps_per_epoch_; }
  int64_t total_steps() const { return steps_per_epoch_ * config_.epochs; }
  int64_t warmup_steps() const { return steps_per_epoch_ * config_.warmup_epochs; }
  double current_lr() const;

  // Deterministic batch for a given global step.
  PretrainBatch make_batch(int64_t step) const;
  // One optimizer step on the online parameters plus one EMA update.
  StepRecord train_step();
  StepRecord train_step(const PretrainBatch& batch);
  // Loss bundle for a batch without touching any state.
  LossBundle evaluate(const PretrainBatch& batch);

  // Runs until `last_step` (exclusive) or the end of the schedule.
  std::vector<StepRecord> run(std::optional<int64_t> last_step = std::nullopt, const StepCallback& on_step = {});

  std::vector<unsigned char> serialize_checkpoint() const;
  void save_checkpoint(const std::filesystem::path& path) const;
  // Restores every piece of state; the config and codebook hashes must match.
  void load_checkpoint(const std::filesystem::path& path);
  void load_checkpoint_bytes(const std::vector<unsigned char>& bytes);

  OnlineNetwork& online() { return online_; }
  MomentumNetwork& momentum() { return momentum_; }
  const std::string& codebook_hash() const { return codebook_hash_; }

 private:
  torch::Tensor forward_losses(const PretrainBatch& batch, LossBundle& bundle);
  void set_lr(double lr);

  PretrainConfig config_;
  const codebook::TextKnowledgeCodebook& codebook_;
  std::string codebook_hash_;
  std::vector<corpus::TextSample> corpus_;
  torch::Tensor corpus_tokens_;  // [N,8]
  corpus::AugmentationPolicy policy_;
  int64_t steps_per_epoch_ = 1;
  int64_t step_ = 0;
  OnlineNetwork online_{nullptr};
  MomentumNetwork momentum_{nullptr};
  std::unique_ptr<torch::optim::AdamW> optimizer_;
};

// Checkpoint layout:
//   magic "LEGOCKPT" | u32 version | config text | config hash | codebook hash
//   | u64 step | online tensors | momentum tensors
//   | per online parameter: u32 has_state [i64 step, exp_avg, exp_avg_sq]
//   | hex SHA-256 of the preceding bytes (64 chars)
inline constexpr char kCheckpointMagic[8] = {'L', 'E', 'G', 'O', 'C', 'K', 'P', 'T'};
inline constexpr uint32_t kCheckpointVersion = 1;

struct CheckpointInfo {
  PretrainConfig config;
  std::string config_hash;
  std::string codebook_hash;
  int64_t step = 0;
};

CheckpointInfo read_checkpoint_info(const std::filesystem::path& path);
// Online ViT weights stored in a checkpoint.
pretext::ViTEncoder load_encoder(const std::filesystem::path& checkpoint);

// Honors LEGO_DETERMINISTIC=1 (deterministic kernels, one intra-op thread).
void apply_determinism_from_env();

struct RunOptions {
  std::filesystem::path out_dir;
  std::optional<std::filesystem::path> resume;
};

// Full run: writes metrics.jsonl and checkpoint.bin (plus periodic
// checkpoints) under out_dir. Returns the final checkpoint path.
std::filesystem::path run_pretraining(const PretrainConfig& config, const std::vector<corpus::TextSample>& corpus,
                                      const codebook::TextKnowledgeCodebook& codebook, const RunOptions& options);

}  // namespace lego::trainer
