#pragma once

#include <span>
#include <string>
#include <vector>

#include <torch/torch.h>

namespace lego {

// Hex SHA-256 digest.
std::string sha256_hex(std::span<const unsigned char> bytes);
std::string sha256_hex(const std::string& text);

// Digest over names, shapes, dtypes and raw bytes of a parameter list.
std::string hash_tensors(const std::vector<std::pair<std::string, torch::Tensor>>& named);
std::string hash_module(const torch::nn::Module& module);

}  // namespace lego
