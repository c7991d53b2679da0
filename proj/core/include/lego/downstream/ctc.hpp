#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <torch/torch.h>

namespace lego::downstream {

inline constexpr int64_t kBlank = 0;
// Charset plus blank.
int64_t num_classes();

// Characters to labels 1..36. Throws ValidationError outside the charset.
std::vector<int64_t> encode_transcript(const std::string& transcript);
std::string decode_labels(const std::vector<int64_t>& labels);

// Minimum number of timesteps needed to emit `labels` (repeats need a blank
// in between).
int64_t min_ctc_length(const std::vector<int64_t>& labels);

// Negative log-likelihood of `labels` under per-step logits [T,C]
// (log-softmax applied here). Throws ValidationError when T is too short.
torch::Tensor ctc_loss(const torch::Tensor& logits, const std::vector<int64_t>& labels);
// Batched: logits [B,T,C]; mean over the batch.
torch::Tensor ctc_loss(const torch::Tensor& logits, const std::vector<std::vector<int64_t>>& labels);

// Collapse repeats, then drop blanks.
std::vector<int64_t> collapse_path(const std::vector<int64_t>& path);
// Per-step argmax of [T,C] logits, collapsed.
std::string ctc_greedy_decode(const torch::Tensor& logits);
std::vector<std::string> ctc_greedy_decode_batch(const torch::Tensor& logits);

}  // namespace lego::downstream
