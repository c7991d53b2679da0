#include "lego/downstream/recognizer.hpp"

#include <cmath>

#include "lego/common.hpp"
#include "lego/downstream/ctc.hpp"
#include "lego/downstream/metrics.hpp"
#include "lego/hash.hpp"
#include "lego/nn_init.hpp"
#include "lego/rng.hpp"

namespace lego::downstream {

namespace {

constexpr int64_t kChunk = 64;

torch::Tensor batch_images(const std::vector<corpus::TextSample>& samples, const std::vector<int>& rows) {
  std::vector<torch::Tensor> images;
  images.reserve(rows.size());
  for (int r : rows) images.push_back(samples[r].image);
  return torch::stack(images);
}

std::vector<std::vector<int64_t>> encoded_labels(const std::vector<corpus::TextSample>& samples) {
  std::vector<std::vector<int64_t>> labels;
  labels.reserve(samples.size());
  for (const auto& s : samples) labels.push_back(encode_transcript(s.transcript));
  return labels;
}

torch::Tensor all_images(const std::vector<corpus::TextSample>& samples, size_t begin, size_t end) {
  std::vector<torch::Tensor> images;
  for (size_t i = begin; i < end; ++i) images.push_back(samples[i].image);
  return torch::stack(images);
}

// Shared minibatch loop. `loss_for(rows)` returns the loss of one batch.
template <typename LossFn>
void train_loop(torch::optim::Optimizer& optimizer, size_t n, const RecognizerOptions& options, LossFn loss_for) {
  for (int64_t epoch = 0; epoch < options.epochs; ++epoch) {
    Rng rng(derive_seed(options.seed, {0x726563, static_cast<uint64_t>(epoch)}));
    const auto perm = rng.permutation(static_cast<int>(n));
    for (size_t begin = 0; begin < n; begin += options.batch_size) {
      const size_t end = std::min(n, begin + static_cast<size_t>(options.batch_size));
      std::vector<int> rows(perm.begin() + begin, perm.begin() + end);
      optimizer.zero_grad();
      torch::Tensor loss = loss_for(rows);
      if (!std::isfinite(loss.item<double>())) throw DivergenceError("recognizer loss is not finite");
      loss.backward();
      optimizer.step();
    }
  }
}

}  // namespace

ColumnPooling parse_pooling(const std::string& name) {
  if (name == "mean") return ColumnPooling::kMean;
  if (name == "concat") return ColumnPooling::kConcat;
  throw ConfigError("unknown column pooling: " + name);
}

std::string to_string(ColumnPooling pooling) { return pooling == ColumnPooling::kMean ? "mean" : "concat"; }

RecognizerModelImpl::RecognizerModelImpl(pretext::ViTEncoder encoder, ColumnPooling pooling, bool center_columns,
                                         uint64_t seed)
    : encoder_(std::move(encoder)), pooling_(pooling), center_(center_columns) {
  register_module("encoder", encoder_);
  const auto& v = encoder_->config();
  const int64_t features = pooling_ == ColumnPooling::kMean ? v.dim : v.dim * v.grid_h();
  feat_mean_ = register_buffer("feat_mean", torch::zeros({features}));
  feat_std_ = register_buffer("feat_std", torch::ones({features}));
  head_ = register_module("head", torch::nn::Linear(features, num_classes()));
  init_parameters(*head_, seed);
}

torch::Tensor RecognizerModelImpl::column_features(const torch::Tensor& images) {
  const auto& v = encoder_->config();
  auto run = [&] {
    auto tokens = encoder_->forward(images).view({images.size(0), v.grid_h(), v.grid_w(), v.dim});
    if (pooling_ == ColumnPooling::kMean) return tokens.mean(1);
    return tokens.permute({0, 2, 1, 3}).reshape({images.size(0), v.grid_w(), v.grid_h() * v.dim});
  };
  if (frozen_) {
    torch::NoGradGuard no_grad;
    return run();
  }
  return run();
}

torch::Tensor RecognizerModelImpl::normalize(const torch::Tensor& features) const {
  auto f = center_ ? features - features.mean(1, /*keepdim=*/true) : features;
  return (f - feat_mean_) / feat_std_;
}

void RecognizerModelImpl::fit_normalization(const torch::Tensor& features) {
  torch::NoGradGuard no_grad;
  auto f = center_ ? features - features.mean(1, /*keepdim=*/true) : features;
  feat_mean_.copy_(f.mean({0, 1}));
  feat_std_.copy_(f.std({0, 1}, /*unbiased=*/false) + 1e-5);
}

torch::Tensor RecognizerModelImpl::head_logits(const torch::Tensor& features) { return head_->forward(features); }

void RecognizerModelImpl::set_encoder_frozen(bool frozen) {
  frozen_ = frozen;
  for (auto& p : encoder_->parameters()) p.requires_grad_(!frozen);
}

RecognizerModel probe_train(pretext::ViTEncoder encoder, const std::vector<corpus::TextSample>& train,
                            const RecognizerOptions& options) {
  if (train.empty()) throw ValidationError("empty probe training set");
  const auto before = hash_module(*encoder);
  RecognizerModel model(encoder, options.pooling, options.center_columns, derive_seed(options.seed, {0x68656164}));
  model->set_encoder_frozen(true);
  model->encoder()->eval();

  // The encoder is fixed, so its column features are computed once.
  std::vector<torch::Tensor> chunks;
  for (size_t begin = 0; begin < train.size(); begin += kChunk) {
    chunks.push_back(model->column_features(all_images(train, begin, std::min(train.size(), begin + kChunk))));
  }
  const auto raw = torch::cat(chunks);
  model->fit_normalization(raw);
  const auto features = model->normalize(raw);
  const auto labels = encoded_labels(train);

  torch::optim::AdamW optimizer(model->head()->parameters(),
                                torch::optim::AdamWOptions(options.lr).weight_decay(options.weight_decay));
  train_loop(optimizer, train.size(), options, [&](const std::vector<int>& rows) {
    std::vector<std::vector<int64_t>> batch_labels;
    for (int r : rows) batch_labels.push_back(labels[r]);
    auto index = torch::tensor(std::vector<int64_t>(rows.begin(), rows.end()), torch::kInt64);
    return ctc_loss(model->head_logits(features.index_select(0, index)), batch_labels);
  });

  if (hash_module(*encoder) != before) throw Error("probe training modified the frozen encoder");
  return model;
}

RecognizerModel finetune(pretext::ViTEncoder encoder, const std::vector<corpus::TextSample>& train,
                         const RecognizerOptions& options) {
  if (train.empty()) throw ValidationError("empty fine-tuning set");
  RecognizerModel model(encoder, options.pooling, options.center_columns, derive_seed(options.seed, {0x68656164}));
  {
    // Statistics of the initial encoder stay fixed during fine-tuning.
    torch::NoGradGuard no_grad;
    std::vector<torch::Tensor> chunks;
    for (size_t begin = 0; begin < train.size(); begin += kChunk) {
      chunks.push_back(model->column_features(all_images(train, begin, std::min(train.size(), begin + kChunk))));
    }
    model->fit_normalization(torch::cat(chunks));
  }
  model->set_encoder_frozen(false);
  model->train();
  const auto labels = encoded_labels(train);

  std::vector<torch::optim::OptimizerParamGroup> groups;
  groups.emplace_back(model->encoder()->parameters(),
                      std::make_unique<torch::optim::AdamWOptions>(options.lr * options.encoder_lr_scale));
  groups.emplace_back(model->head()->parameters(), std::make_unique<torch::optim::AdamWOptions>(options.lr));
  for (auto& g : groups) static_cast<torch::optim::AdamWOptions&>(g.options()).weight_decay(options.weight_decay);
  torch::optim::AdamW optimizer(std::move(groups));
  train_loop(optimizer, train.size(), options, [&](const std::vector<int>& rows) {
    std::vector<std::vector<int64_t>> batch_labels;
    for (int r : rows) batch_labels.push_back(labels[r]);
    return ctc_loss(model->forward(batch_images(train, rows)), batch_labels);
  });
  return model;
}

std::vector<std::string> recognize(RecognizerModel& model, const std::vector<corpus::TextSample>& samples) {
  torch::NoGradGuard no_grad;
  std::vector<std::string> out;
  for (size_t begin = 0; begin < samples.size(); begin += kChunk) {
    auto logits = model->forward(all_images(samples, begin, std::min(samples.size(), begin + kChunk)));
    for (auto& s : ctc_greedy_decode_batch(logits)) out.push_back(std::move(s));
  }
  return out;
}

EvalReport evaluate_recognizer(RecognizerModel& model, const std::vector<corpus::TextSample>& samples,
                               const std::string& split) {
  std::vector<std::string> refs;
  for (const auto& s : samples) refs.push_back(s.transcript);
  EvalReport report;
  report.split = split;
  report.task = "recognition";
  report.word_accuracy = word_accuracy(recognize(model, samples), refs);
  report.samples = static_cast<int64_t>(samples.size());
  report.validate();
  return report;
}

}  // namespace lego::downstream
