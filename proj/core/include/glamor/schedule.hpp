#pragma once

#include <cstddef>
#include <string_view>

namespace glamor {

enum class WarmupKind {
  none,
  /// linear ramp, updated every epoch
  warmup1,
  /// same ramp endpoints, updated only on even epochs
  warmup2,
};

std::string_view to_string(WarmupKind kind) noexcept;
WarmupKind parse_warmup_kind(std::string_view text);

struct ScheduleConfig {
  double base_lr = 1e-4;
  WarmupKind kind = WarmupKind::warmup1;
  std::size_t warmup_epochs = 10;
  double decay_gamma = 0.6;
  std::size_t decay_period = 20;

  void validate() const;
};

/// Warmup factor (0.1 at epoch 0 rising to 1 at warmup_epochs) times
/// decay_gamma^floor(epoch / decay_period).
double lr_at(const ScheduleConfig& config, std::size_t epoch);

}  // namespace glamor
