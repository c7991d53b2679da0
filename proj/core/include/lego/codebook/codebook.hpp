#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "lego/common.hpp"
#include "lego/tvqvae/model.hpp"

namespace lego::codebook {

struct TokenSequence {
  std::array<int64_t, kSlots> indices{};
  std::string source_id;

  bool operator==(const TokenSequence&) const = default;
};

// A tokenized slot: (image, slot position 0..7).
struct SlotRef {
  std::string source_id;
  int slot = 0;
};

// Frozen T-VQVAE used as an image tokenizer. Immutable once constructed and
// safe to query from several threads.
class TextKnowledgeCodebook {
 public:
  // Freezes `model` if it is not already frozen.
  explicit TextKnowledgeCodebook(tvqvae::TvqvaeModel model);

  static TextKnowledgeCodebook load(const std::filesystem::path& path);

  TokenSequence tokenize(const Image& image, std::string source_id = {}) const;
  // images: [B,3,H,W] -> [B,8] int64 slot indices.
  torch::Tensor tokenize_batch(const torch::Tensor& images) const;

  // Rows of the embedding table, one per slot: [8, D].
  torch::Tensor retrieve_latents(const TokenSequence& tokens) const;
  // [B,8] indices -> [B,8,D].
  torch::Tensor retrieve_latents(const torch::Tensor& indices) const;

  int64_t size() const { return model_->config().codebook_size; }
  int64_t dim() const { return model_->config().dim; }
  const tvqvae::TvqvaeConfig& geometry() const { return model_->config(); }
  // Digest of the frozen parameters; stable for the lifetime of the object.
  const std::string& hash() const { return hash_; }
  std::string recompute_hash() const { return model_->content_hash(); }
  const tvqvae::TvqvaeModel& model() const { return model_; }

 private:
  tvqvae::TvqvaeModel model_;
  torch::Tensor embeddings_;
  std::string hash_;
};

// Collapses a [B, gh, gw] index grid into [B, 8] slots: the columns are split
// into 8 equal bands and each band takes its most frequent index (lowest index
// wins ties). A 1×8 grid passes through unchanged.
torch::Tensor reduce_to_slots(const torch::Tensor& grid);

// Per-batch lookup table so slot comparisons never re-tokenize.
class TokenCache {
 public:
  void insert(TokenSequence tokens);
  bool contains(const std::string& source_id) const;
  const TokenSequence& at(const std::string& source_id) const;
  int64_t index_of(const SlotRef& slot) const;
  size_t size() const { return entries_.size(); }

 private:
  std::unordered_map<std::string, TokenSequence> entries_;
};

bool same_index(const TokenCache& cache, const SlotRef& a, const SlotRef& b);

}  // namespace lego::codebook
