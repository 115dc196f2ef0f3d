#include "glamor/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "glamor/errors.hpp"

namespace glamor {

std::string_view to_string(WarmupKind kind) noexcept {
  switch (kind) {
    case WarmupKind::none: return "none";
    case WarmupKind::warmup1: return "warmup1";
    case WarmupKind::warmup2: return "warmup2";
  }
  return "?";
}

WarmupKind parse_warmup_kind(std::string_view text) {
  if (text == "none") return WarmupKind::none;
  if (text == "warmup1") return WarmupKind::warmup1;
  if (text == "warmup2") return WarmupKind::warmup2;
  throw ConfigError("unknown schedule kind '" + std::string(text) + "'");
}

void ScheduleConfig::validate() const {
  if (!(base_lr > 0.0) || !std::isfinite(base_lr)) throw ConfigError("base learning rate must be positive");
  if (!(decay_gamma > 0.0)) throw ConfigError("decay gamma must be positive");
  if (decay_period == 0) throw ConfigError("decay period must be positive");
  if (kind != WarmupKind::none && warmup_epochs == 0) throw ConfigError("warmup needs at least one epoch");
}

double lr_at(const ScheduleConfig& config, std::size_t epoch) {
  config.validate();
  double warm = 1.0;
  if (config.kind != WarmupKind::none && epoch < config.warmup_epochs) {
    std::size_t step = epoch;
    if (config.kind == WarmupKind::warmup2) step -= step % 2;
    const double t = static_cast<double>(step) / static_cast<double>(config.warmup_epochs);
    warm = 0.1 + 0.9 * t;
  }
  const auto decays = static_cast<int>(epoch / config.decay_period);
  return config.base_lr * warm * std::pow(config.decay_gamma, decays);
}

}  // namespace glamor
