#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "glamor/attention.hpp"
#include "glamor/key_value.hpp"
#include "glamor/norms.hpp"

namespace glamor {

struct StemConfig {
  std::size_t out_channels = 8;
  std::size_t kernel = 3;
  std::size_t stride = 1;
};

/// Where global attention sits in the stem.
enum class GAPlacement {
  pre_norm,   // stem conv -> GA -> norm -> ReLU (GA sees signed conv output)
  post_relu,  // stem conv -> norm -> ReLU -> GA
};

std::string_view to_string(GAPlacement placement) noexcept;
GAPlacement parse_ga_placement(std::string_view text);

struct StageConfig {
  std::size_t blocks = 1;
  std::size_t channels = 8;
  std::size_t stride = 1;
};

/// Shape of the re-id network:
///   stem conv [-> global attention] -> norm -> ReLU [-> global attention]
///   -> stage 1 [-> local attention + channel-masked fusion]
///   -> remaining stages -> global average pool -> features
///   features -> neck (layer norm) -> classifier (training only)
struct ModelConfig {
  std::size_t in_channels = 3;
  StemConfig stem;
  std::vector<StageConfig> stages;
  NormSpec norm;
  std::size_t feature_dim = 0;
  std::size_t num_classes = 0;
  bool attach_ga = true;
  bool attach_la = true;
  GAPlacement ga_placement = GAPlacement::post_relu;
  double leaky_slope = kDefaultLeakySlope;
  std::size_t ga_mid_channels = 0;  // 0: same as the stem width
  std::size_t la_reduction = kDefaultReductionRatio;
  std::size_t la_kernel = kDefaultSpatialKernel;

  /// Throws ConfigError: empty stages, last stage stride != 1, feature_dim
  /// different from the last stage width, a norm spec that does not fit a
  /// layer's channel count, or an even stem kernel.
  void validate() const;

  /// stem 8 channels, stages 1x8 and 1x16 (both stride 1), group size 4,
  /// 16-dim features, 4 classes.
  static ModelConfig toy();
  /// ResNet-18-shaped layout (64/128/256/512, last stage stride 1, group size 16).
  static ModelConfig resnet18(std::size_t num_classes);
};

/// Consumes model keys from `file`:
///   in_channels, stem=OUT,KERNEL,STRIDE, stages=BxC[/S],..., norm, group_size,
///   norm_epsilon, feature_dim, num_classes, attach_ga, attach_la, leaky_slope,
///   ga_placement (pre_norm|post_relu), ga_mid_channels, la_reduction, la_kernel
/// Omitted stage strides default to 1 for the first and last stage, 2 otherwise;
/// an omitted feature_dim defaults to the last stage width.
ModelConfig parse_model_config(KeyValueFile& file);
std::string format_model_config(const ModelConfig& config);

}  // namespace glamor
