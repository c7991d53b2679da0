#include "lego/trainer/schedule.hpp"

#include <algorithm>
#include <cmath>

namespace lego::trainer {

double lr_schedule(int64_t step, double lr_init, int64_t warmup_steps, int64_t total_steps) {
  if (step <= 0) return 0.0;
  if (step < warmup_steps) return lr_init * static_cast<double>(step) / static_cast<double>(warmup_steps);
  if (step >= total_steps) return 0.0;
  const double span = static_cast<double>(std::max<int64_t>(total_steps - warmup_steps, 1));
  const double progress = static_cast<double>(step - warmup_steps) / span;
  return 0.5 * lr_init * (1.0 + std::cos(M_PI * progress));
}

}  // namespace lego::trainer
