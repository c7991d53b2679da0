#include "lego/downstream/ctc.hpp"

#include "lego/common.hpp"

namespace lego::downstream {

int64_t num_classes() { return static_cast<int64_t>(kCharset.size()) + 1; }

std::vector<int64_t> encode_transcript(const std::string& transcript) {
  const auto normalized = normalize_transcript(transcript);
  std::vector<int64_t> labels;
  labels.reserve(normalized.size());
  for (char c : normalized) labels.push_back(static_cast<int64_t>(kCharset.find(c)) + 1);
  return labels;
}

std::string decode_labels(const std::vector<int64_t>& labels) {
  std::string out;
  for (auto l : labels) {
    if (l <= 0 || l >= num_classes()) throw ValidationError("label out of range: " + std::to_string(l));
    out.push_back(kCharset[l - 1]);
  }
  return out;
}

int64_t min_ctc_length(const std::vector<int64_t>& labels) {
  int64_t n = static_cast<int64_t>(labels.size());
  for (size_t i = 1; i < labels.size(); ++i) {
    if (labels[i] == labels[i - 1]) ++n;
  }
  return n;
}

torch::Tensor ctc_loss(const torch::Tensor& logits, const std::vector<int64_t>& labels) {
  if (logits.dim() != 2) throw ValidationError("ctc_loss expects [T,C] logits");
  return ctc_loss(logits.unsqueeze(0), std::vector<std::vector<int64_t>>{labels});
}

torch::Tensor ctc_loss(const torch::Tensor& logits, const std::vector<std::vector<int64_t>>& labels) {
  if (logits.dim() != 3) throw ValidationError("ctc_loss expects [B,T,C] logits");
  const int64_t batch = logits.size(0), steps = logits.size(1), classes = logits.size(2);
  if (static_cast<int64_t>(labels.size()) != batch) throw ValidationError("ctc_loss: label count != batch size");

  int64_t max_len = 0;
  for (const auto& l : labels) {
    if (min_ctc_length(l) > steps) {
      throw ValidationError("transcript needs " + std::to_string(min_ctc_length(l)) + " steps, only " +
                            std::to_string(steps) + " available");
    }
    for (auto c : l) {
      if (c <= kBlank || c >= classes) throw ValidationError("ctc label out of range");
    }
    max_len = std::max<int64_t>(max_len, static_cast<int64_t>(l.size()));
  }
  const int64_t S = 2 * max_len + 1;

  // Blank-augmented targets, padded with blanks; states past 2L+1 are masked.
  std::vector<int64_t> ext(batch * S, kBlank);
  std::vector<uint8_t> skip(batch * S, 0), valid(batch * S, 0);
  std::vector<int64_t> last_a(batch), last_b(batch);
  for (int64_t b = 0; b < batch; ++b) {
    const auto& l = labels[b];
    const int64_t len = static_cast<int64_t>(l.size());
    for (int64_t s = 0; s < 2 * len + 1; ++s) {
      valid[b * S + s] = 1;
      if (s % 2 == 1) {
        ext[b * S + s] = l[s / 2];
        if (s >= 3 && l[s / 2] != l[s / 2 - 1]) skip[b * S + s] = 1;
      }
    }
    last_a[b] = 2 * len;
    last_b[b] = len > 0 ? 2 * len - 1 : 2 * len;
  }
  auto opts_i = torch::TensorOptions().dtype(torch::kInt64);
  auto ext_t = torch::from_blob(ext.data(), {batch, S}, opts_i).clone();
  auto skip_t = torch::from_blob(skip.data(), {batch, S}, torch::kUInt8).clone().to(torch::kBool);
  auto valid_t = torch::from_blob(valid.data(), {batch, S}, torch::kUInt8).clone().to(torch::kBool);

  const auto log_probs = torch::log_softmax(logits, -1);
  // [B,T,S] emission log-probabilities of each extended state.
  const auto emit = log_probs.gather(2, ext_t.unsqueeze(1).expand({batch, steps, S}));
  // Finite stand-in for log(0): keeps logsumexp gradients free of NaNs.
  const double neg_inf = -1e30;
  const auto ninf = torch::full({batch, 1}, neg_inf, logits.options());
  const auto ninf2 = torch::full({batch, 2}, neg_inf, logits.options());

  auto init_mask = torch::zeros({batch, S}, torch::kBool);
  init_mask.index_put_({torch::indexing::Slice(), 0}, true);
  if (S > 1) init_mask.index_put_({torch::indexing::Slice(), 1}, valid_t.index({torch::indexing::Slice(), 1}));
  auto alpha = torch::where(init_mask, emit.select(1, 0), torch::full_like(emit.select(1, 0), neg_inf));

  for (int64_t t = 1; t < steps; ++t) {
    auto stay = alpha;
    auto step1 = torch::cat({ninf, alpha.narrow(1, 0, S - 1)}, 1);
    auto step2 = S > 2 ? torch::cat({ninf2, alpha.narrow(1, 0, S - 2)}, 1) : torch::full_like(alpha, neg_inf);
    step2 = torch::where(skip_t, step2, torch::full_like(step2, neg_inf));
    auto combined = torch::logsumexp(torch::stack({stay, step1, step2}), 0);
    alpha = torch::where(valid_t, combined + emit.select(1, t), torch::full_like(combined, neg_inf));
  }
  auto ia = torch::tensor(last_a, opts_i).unsqueeze(1);
  auto ib = torch::tensor(last_b, opts_i).unsqueeze(1);
  auto end_a = alpha.gather(1, ia).squeeze(1);
  auto end_b = alpha.gather(1, ib).squeeze(1);
  // For empty transcripts both ends point at the same state.
  auto same = (ia == ib).squeeze(1);
  auto total = torch::where(same, end_a, torch::logaddexp(end_a, end_b));
  return (-total).mean();
}

std::vector<int64_t> collapse_path(const std::vector<int64_t>& path) {
  std::vector<int64_t> out;
  int64_t prev = -1;
  for (auto p : path) {
    if (p != prev && p != kBlank) out.push_back(p);
    prev = p;
  }
  return out;
}

std::string ctc_greedy_decode(const torch::Tensor& logits) {
  if (logits.dim() != 2) throw ValidationError("ctc_greedy_decode expects [T,C] logits");
  auto arg = logits.argmax(-1).to(torch::kInt64).contiguous();
  std::vector<int64_t> path(arg.data_ptr<int64_t>(), arg.data_ptr<int64_t>() + arg.numel());
  return decode_labels(collapse_path(path));
}

std::vector<std::string> ctc_greedy_decode_batch(const torch::Tensor& logits) {
  std::vector<std::string> out;
  for (int64_t b = 0; b < logits.size(0); ++b) out.push_back(ctc_greedy_decode(logits[b]));
  return out;
}

}  // namespace lego::downstream
