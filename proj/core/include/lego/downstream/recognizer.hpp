#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "lego/corpus/render.hpp"
#include "lego/downstream/report.hpp"
#include "lego/pretext/vit.hpp"

namespace lego::downstream {

enum class ColumnPooling { kMean, kConcat };

ColumnPooling parse_pooling(const std::string& name);
std::string to_string(ColumnPooling pooling);

struct RecognizerOptions {
  ColumnPooling pooling = ColumnPooling::kConcat;
  // Subtract each image's mean column feature before standardisation.
  bool center_columns = true;
  int64_t epochs = 30;
  int64_t batch_size = 64;
  double lr = 1e-3;
  double weight_decay = 0.0;
  // Fine-tuning only: encoder learning rate = lr * encoder_lr_scale.
  double encoder_lr_scale = 0.1;
  uint64_t seed = 0;
};

// ViT encoder plus a linear CTC head over the token-grid columns: each of the
// grid_w columns is one timestep.
class RecognizerModelImpl : public torch::nn::Module {
 public:
  RecognizerModelImpl(pretext::ViTEncoder encoder, ColumnPooling pooling, bool center_columns = true,
                      uint64_t seed = 0);

  // Encoder output pooled per column: [B,3,H,W] -> [B, grid_w, F]
  torch::Tensor column_features(const torch::Tensor& images);
  // Centering and fixed per-dimension standardisation.
  torch::Tensor normalize(const torch::Tensor& features) const;
  // Sets the standardisation statistics from raw column features [N, grid_w, F].
  void fit_normalization(const torch::Tensor& features);
  // [B, grid_w, F] -> [B, grid_w, 37]
  torch::Tensor head_logits(const torch::Tensor& features);
  torch::Tensor forward(const torch::Tensor& images) { return head_logits(normalize(column_features(images))); }

  void set_encoder_frozen(bool frozen);
  bool encoder_frozen() const { return frozen_; }

  pretext::ViTEncoder& encoder() { return encoder_; }
  torch::nn::Linear& head() { return head_; }
  ColumnPooling pooling() const { return pooling_; }

 private:
  pretext::ViTEncoder encoder_;
  ColumnPooling pooling_;
  bool center_;
  bool frozen_ = false;
  torch::Tensor feat_mean_, feat_std_;
  torch::nn::Linear head_{nullptr};
};
TORCH_MODULE(RecognizerModel);

// Trains only the head; the encoder digest must be identical afterwards.
RecognizerModel probe_train(pretext::ViTEncoder encoder, const std::vector<corpus::TextSample>& train,
                            const RecognizerOptions& options);
// Trains encoder and head together.
RecognizerModel finetune(pretext::ViTEncoder encoder, const std::vector<corpus::TextSample>& train,
                         const RecognizerOptions& options);

std::vector<std::string> recognize(RecognizerModel& model, const std::vector<corpus::TextSample>& samples);
EvalReport evaluate_recognizer(RecognizerModel& model, const std::vector<corpus::TextSample>& samples,
                               const std::string& split);

}  // namespace lego::downstream
