#include "lego/codebook/codebook.hpp"

#include <map>

#include "lego/tvqvae/codebook_file.hpp"

namespace lego::codebook {

TextKnowledgeCodebook::TextKnowledgeCodebook(tvqvae::TvqvaeModel model) : model_(std::move(model)) {
  if (!model_->frozen()) model_->freeze();
  const auto& g = model_->config();
  if (g.grid_w() % kSlots != 0) {
    throw ConfigError("codebook grid width " + std::to_string(g.grid_w()) + " cannot be split into 8 slots");
  }
  embeddings_ = model_->embeddings().detach();
  hash_ = model_->content_hash();
}

TextKnowledgeCodebook TextKnowledgeCodebook::load(const std::filesystem::path& path) {
  return TextKnowledgeCodebook(tvqvae::load_codebook_file(path));
}

torch::Tensor reduce_to_slots(const torch::Tensor& grid) {
  const int64_t b = grid.size(0), gh = grid.size(1), gw = grid.size(2);
  if (gw % kSlots != 0) throw ConfigError("grid width must be a multiple of 8");
  if (gh == 1 && gw == kSlots) return grid.reshape({b, kSlots}).contiguous();
  const int64_t band = gw / kSlots;
  auto g = grid.contiguous();
  auto acc = g.accessor<int64_t, 3>();
  auto out = torch::empty({b, kSlots}, torch::kInt64);
  auto o = out.accessor<int64_t, 2>();
  for (int64_t i = 0; i < b; ++i) {
    for (int64_t s = 0; s < kSlots; ++s) {
      std::map<int64_t, int> votes;
      for (int64_t r = 0; r < gh; ++r)
        for (int64_t c = s * band; c < (s + 1) * band; ++c) ++votes[acc[i][r][c]];
      int64_t best = -1;
      int best_count = 0;
      for (const auto& [idx, count] : votes) {
        if (count > best_count) {  // map order gives the lowest index on ties
          best = idx;
          best_count = count;
        }
      }
      o[i][s] = best;
    }
  }
  return out;
}

torch::Tensor TextKnowledgeCodebook::tokenize_batch(const torch::Tensor& images) const {
  const auto& g = model_->config();
  if (images.dim() != 4 || images.size(1) != kChannels || images.size(2) != g.image_h ||
      images.size(3) != g.image_w) {
    throw ConfigError("image geometry does not match the codebook (expected [B,3," + std::to_string(g.image_h) +
                      "," + std::to_string(g.image_w) + "])");
  }
  torch::NoGradGuard no_grad;
  auto x_c = model_->encoder()->forward(images.to(embeddings_.scalar_type()));
  auto q = tvqvae::quantize(x_c, embeddings_);
  return reduce_to_slots(q.z);
}

TokenSequence TextKnowledgeCodebook::tokenize(const Image& image, std::string source_id) const {
  const auto& g = model_->config();
  if (image.dim() != 3 || image.size(0) != kChannels || image.size(1) != g.image_h || image.size(2) != g.image_w) {
    throw ConfigError("image geometry does not match the codebook");
  }
  auto z = tokenize_batch(image.unsqueeze(0));
  TokenSequence t;
  t.source_id = std::move(source_id);
  for (int64_t s = 0; s < kSlots; ++s) t.indices[s] = z[0][s].item<int64_t>();
  return t;
}

torch::Tensor TextKnowledgeCodebook::retrieve_latents(const TokenSequence& tokens) const {
  auto idx = torch::tensor(std::vector<int64_t>(tokens.indices.begin(), tokens.indices.end()), torch::kInt64);
  return retrieve_latents(idx.unsqueeze(0)).squeeze(0);
}

torch::Tensor TextKnowledgeCodebook::retrieve_latents(const torch::Tensor& indices) const {
  if (indices.numel() > 0 && (indices.min().item<int64_t>() < 0 || indices.max().item<int64_t>() >= size())) {
    throw ValidationError("codebook index out of range [0, " + std::to_string(size()) + ")");
  }
  auto flat = embeddings_.index_select(0, indices.flatten().to(torch::kInt64));
  auto shape = indices.sizes().vec();
  shape.push_back(dim());
  return flat.view(shape);
}

void TokenCache::insert(TokenSequence tokens) {
  auto id = tokens.source_id;
  entries_.insert_or_assign(std::move(id), std::move(tokens));
}

bool TokenCache::contains(const std::string& source_id) const { return entries_.count(source_id) > 0; }

const TokenSequence& TokenCache::at(const std::string& source_id) const {
  auto it = entries_.find(source_id);
  if (it == entries_.end()) throw ValidationError("source '" + source_id + "' has not been tokenized");
  return it->second;
}

int64_t TokenCache::index_of(const SlotRef& slot) const {
  if (slot.slot < 0 || slot.slot >= kSlots) throw ValidationError("slot position out of range");
  return at(slot.source_id).indices[slot.slot];
}

bool same_index(const TokenCache& cache, const SlotRef& a, const SlotRef& b) {
  return cache.index_of(a) == cache.index_of(b);
}

}  // namespace lego::codebook
