#include "glamor/sparsity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "glamor/errors.hpp"
#include "glamor/random.hpp"
#include "glamor/text_format.hpp"

namespace glamor {

double SparsityReport::fraction(std::string_view layer) const {
  for (const auto& l : layers) {
    if (l.layer == layer) return l.fraction_zero;
  }
  throw ConfigError("layer '" + std::string(layer) + "' was not probed");
}

SparsityReport sparsity_from_activations(const std::vector<NamedActivation>& activations, double tau) {
  if (!(tau >= 0.0)) throw ConfigError("sparsity threshold must be non-negative");
  SparsityReport report;
  report.threshold = tau;
  for (const auto& a : activations) {
    const Shape4& s = a.values.shape();
    if (report.sample_count == 0) report.sample_count = s.n;
    double per_image_sum = 0.0;
    for (std::size_t n = 0; n < s.n; ++n) {
      std::size_t zero = 0;
      for (std::size_t c = 0; c < s.c; ++c) {
        double peak = 0.0;
        for (double v : a.values.plane(n, c)) peak = std::max(peak, std::abs(v));
        if (peak <= tau) ++zero;
      }
      per_image_sum += s.c == 0 ? 0.0 : static_cast<double>(zero) / static_cast<double>(s.c);
    }
    report.layers.push_back({a.name, s.n == 0 ? 0.0 : per_image_sum / static_cast<double>(s.n)});
  }
  return report;
}

SparsityReport sparsity_probe(const ModelConfig& config, const ModelParams& params, const Tensor4& images,
                              double tau, std::size_t sample_count, std::uint64_t seed) {
  const std::size_t available = images.shape().n;
  if (sample_count == 0 || sample_count > available) {
    throw ConfigError("sparsity probe asks for " + std::to_string(sample_count) + " images, " +
                      std::to_string(available) + " available");
  }
  std::vector<std::size_t> order(available);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(order));
  order.resize(sample_count);
  std::sort(order.begin(), order.end());
  const ForwardOutput out = forward(config, params, images.gather(order), NormMode::inference);
  return sparsity_from_activations(out.activations, tau);
}

std::string format_sparsity(const SparsityReport& report) {
  std::ostringstream out;
  out << "layer\tfraction_zero\n";
  for (const auto& l : report.layers) out << l.layer << '\t' << format_fixed(l.fraction_zero, 6) << '\n';
  out << "samples=" << report.sample_count << " tau=" << format_real(report.threshold) << '\n';
  return out.str();
}

}  // namespace glamor
