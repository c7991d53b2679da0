#pragma once

#include <cstdint>

namespace lego::trainer {

// Linear warmup from 0 to lr_init over `warmup_steps`, then cosine decay to 0
// at `total_steps`.
double lr_schedule(int64_t step, double lr_init, int64_t warmup_steps, int64_t total_steps);

}  // namespace lego::trainer
