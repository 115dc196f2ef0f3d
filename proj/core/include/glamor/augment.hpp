#pragma once

#include <cstddef>
#include <string_view>

#include "glamor/random.hpp"
#include "glamor/tensor.hpp"

namespace glamor {

enum class EraseFill { uniform_noise, constant };

struct EraseConfig {
  double probability = 0.5;
  double area_lo = 0.02;
  double area_hi = 0.4;
  double aspect_lo = 0.3;
  double aspect_hi = 3.33;
  EraseFill fill = EraseFill::uniform_noise;
  double fill_value = 0.0;

  void validate() const;
};

enum class EraseOutcome { untouched, erased, no_feasible_rectangle };

struct EraseRegion {
  std::size_t top = 0;
  std::size_t left = 0;
  std::size_t height = 0;
  std::size_t width = 0;
};

struct EraseResult {
  EraseOutcome outcome = EraseOutcome::untouched;
  EraseRegion region;
};

inline constexpr int kMaxEraseAttempts = 100;

/// With probability `config.probability`, overwrites one rectangle of sample
/// `sample` (all channels) whose area ratio and aspect are drawn from the
/// configured ranges. The rectangle always lies fully inside the image. When
/// no draw fits within kMaxEraseAttempts the image is left unchanged and the
/// outcome says so; callers decide whether to log it.
EraseResult random_erase(Tensor4& images, std::size_t sample, const EraseConfig& config, Rng& rng);

/// Mirrors sample `sample` left-to-right in place.
void horizontal_flip(Tensor4& images, std::size_t sample);

/// Bilinear resampling with half-pixel centers.
Tensor4 resize_bilinear(const Tensor4& images, std::size_t height, std::size_t width);

}  // namespace glamor
