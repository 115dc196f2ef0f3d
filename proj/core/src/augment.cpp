#include "glamor/augment.hpp"

#include <algorithm>
#include <cmath>

#include "glamor/errors.hpp"

namespace glamor {

void EraseConfig::validate() const {
  if (!(probability >= 0.0 && probability <= 1.0)) throw ConfigError("erase probability must lie in [0, 1]");
  if (!(area_lo > 0.0 && area_lo <= area_hi)) throw ConfigError("erase area range must satisfy 0 < lo <= hi");
  if (!(aspect_lo > 0.0 && aspect_lo <= aspect_hi)) {
    throw ConfigError("erase aspect range must satisfy 0 < lo <= hi");
  }
}

EraseResult random_erase(Tensor4& images, std::size_t sample, const EraseConfig& config, Rng& rng) {
  config.validate();
  const Shape4& s = images.shape();
  if (sample >= s.n || s.sample_size() == 0) throw ShapeError("random_erase: empty image or bad sample index");

  EraseResult result;
  if (!rng.bernoulli(config.probability)) return result;

  const double area = static_cast<double>(s.plane());
  for (int attempt = 0; attempt < kMaxEraseAttempts; ++attempt) {
    const double target = rng.uniform(config.area_lo, config.area_hi) * area;
    const double aspect = rng.uniform(config.aspect_lo, config.aspect_hi);
    const auto h = static_cast<std::size_t>(std::lround(std::sqrt(target * aspect)));
    const auto w = static_cast<std::size_t>(std::lround(std::sqrt(target / aspect)));
    if (h == 0 || w == 0 || h >= s.h || w >= s.w) continue;

    result.region = {rng.uniform_index(s.h - h + 1), rng.uniform_index(s.w - w + 1), h, w};
    for (std::size_t c = 0; c < s.c; ++c) {
      for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
          images(sample, c, result.region.top + y, result.region.left + x) =
              config.fill == EraseFill::constant ? config.fill_value : rng.uniform();
        }
      }
    }
    result.outcome = EraseOutcome::erased;
    return result;
  }
  result.outcome = EraseOutcome::no_feasible_rectangle;
  return result;
}

void horizontal_flip(Tensor4& images, std::size_t sample) {
  const Shape4& s = images.shape();
  if (sample >= s.n) throw ShapeError("horizontal_flip: sample index out of range");
  for (std::size_t c = 0; c < s.c; ++c) {
    auto p = images.plane(sample, c);
    for (std::size_t y = 0; y < s.h; ++y) {
      std::reverse(p.begin() + static_cast<std::ptrdiff_t>(y * s.w),
                   p.begin() + static_cast<std::ptrdiff_t>((y + 1) * s.w));
    }
  }
}

Tensor4 resize_bilinear(const Tensor4& images, std::size_t height, std::size_t width) {
  const Shape4& s = images.shape();
  if (height == 0 || width == 0 || s.h == 0 || s.w == 0) throw ShapeError("resize to or from an empty image");
  Tensor4 out({s.n, s.c, height, width});
  const double sy = static_cast<double>(s.h) / static_cast<double>(height);
  const double sx = static_cast<double>(s.w) / static_cast<double>(width);
  auto source_coord = [](std::size_t dst, double scale, std::size_t extent, std::size_t& i0,
                         std::size_t& i1, double& frac) {
    double src = (static_cast<double>(dst) + 0.5) * scale - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(extent - 1));
    i0 = static_cast<std::size_t>(std::floor(src));
    i1 = std::min(i0 + 1, extent - 1);
    frac = src - static_cast<double>(i0);
  };
  for (std::size_t y = 0; y < height; ++y) {
    std::size_t y0, y1;
    double fy;
    source_coord(y, sy, s.h, y0, y1, fy);
    for (std::size_t x = 0; x < width; ++x) {
      std::size_t x0, x1;
      double fx;
      source_coord(x, sx, s.w, x0, x1, fx);
      for (std::size_t n = 0; n < s.n; ++n)
        for (std::size_t c = 0; c < s.c; ++c) {
          const double top = images(n, c, y0, x0) * (1.0 - fx) + images(n, c, y0, x1) * fx;
          const double bottom = images(n, c, y1, x0) * (1.0 - fx) + images(n, c, y1, x1) * fx;
          out(n, c, y, x) = top * (1.0 - fy) + bottom * fy;
        }
    }
  }
  return out;
}

}  // namespace glamor
