#pragma once

#include <cstdint>
#include <span>

namespace chimeramix {

/// lr0 * factor^(number of milestones <= epoch).
double step_lr(int64_t epoch, double lr0, std::span<const int64_t> milestones, double factor);

/// lr0 * 0.5 * (1 + cos(pi * epoch / total_epochs)).
double cosine_lr(int64_t epoch, int64_t total_epochs, double lr0);

}  // namespace chimeramix
