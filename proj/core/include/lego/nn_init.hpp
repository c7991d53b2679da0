#pragma once

#include <cstdint>

#include <torch/torch.h>

namespace lego {

// Deterministic initialisation from a private generator, independent of the
// global torch RNG. Matrices/kernels: Xavier-uniform; vectors named "bias":
// zero; other vectors (norm gains): one.
void init_parameters(torch::nn::Module& module, uint64_t seed);

torch::Tensor seeded_normal(at::IntArrayRef sizes, double stddev, uint64_t seed);
torch::Tensor seeded_uniform(at::IntArrayRef sizes, double lo, double hi, uint64_t seed);

}  // namespace lego
