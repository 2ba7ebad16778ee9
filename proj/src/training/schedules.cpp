#include "chimeramix/schedules.hpp"

#include <cmath>
#include <numbers>

#include "chimeramix/errors.hpp"

namespace chimeramix {

double step_lr(int64_t epoch, double lr0, std::span<const int64_t> milestones, double factor) {
  if (epoch < 0) throw InvalidArgument("step_lr: epoch must be >= 0");
  int64_t passed = 0;
  for (const int64_t m : milestones) {
    if (m <= epoch) ++passed;
  }
  return lr0 * std::pow(factor, static_cast<double>(passed));
}

double cosine_lr(int64_t epoch, int64_t total_epochs, double lr0) {
  if (total_epochs < 1 || epoch < 0 || epoch > total_epochs) {
    throw InvalidArgument("cosine_lr: epoch must lie in [0, total_epochs]");
  }
  const double progress = static_cast<double>(epoch) / static_cast<double>(total_epochs);
  return lr0 * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

}  // namespace chimeramix
