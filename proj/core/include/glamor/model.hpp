#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "glamor/attention.hpp"
#include "glamor/conv.hpp"
#include "glamor/matrix.hpp"
#include "glamor/model_config.hpp"
#include "glamor/norms.hpp"

namespace glamor {

/// conv1 -> norm1 -> ReLU -> conv2 -> norm2, plus the skip path, then ReLU.
/// The skip is the identity unless width or stride change, in which case it
/// is a 1x1 strided projection followed by its own norm.
struct ResidualBlockParams {
  ConvKernel conv1;
  NormState norm1;
  ConvKernel conv2;
  NormState norm2;
  std::optional<ConvKernel> projection;
  std::optional<NormState> projection_norm;
};

struct ModelParams {
  ConvKernel stem;
  NormState stem_norm;
  std::optional<GAParams> ga;
  std::vector<std::vector<ResidualBlockParams>> stages;
  std::optional<LAParams> la;
  NormState neck;
  Matrix classifier;  // num_classes x feature_dim, no bias

  /// Every array zero (gamma included); the layout used for gradients.
  static ModelParams zeros(const ModelConfig& config);
};

enum class ArrayRole { parameter, buffer };

/// A named view of one flat array inside ModelParams.
template <typename T>
struct NamedArray {
  std::string name;
  std::span<T> values;
  ArrayRole role = ArrayRole::parameter;
};

/// All arrays in a fixed order, e.g. "stem.weight", "stage1.block0.norm1.gamma",
/// "la.spatial.weight", "classifier.weight". Batch-norm running statistics are
/// buffers; everything else is trained.
std::vector<NamedArray<double>> named_arrays(ModelParams& params);
std::vector<NamedArray<const double>> named_arrays(const ModelParams& params);

std::size_t parameter_count(const ModelParams& params);

/// He fan-in normal init for convolutions, zero biases, identity norms,
/// classifier weights N(0, 0.01^2). Deterministic in `seed`.
ModelParams init_params(const ModelConfig& config, std::uint64_t seed);

/// Throws ConfigError when the arrays do not have the shapes `config` implies.
void check_params(const ModelConfig& config, const ModelParams& params);

/// Throws ShapeError when `input` cannot pass through the network.
void check_input(const ModelConfig& config, const Shape4& input);

struct NamedActivation {
  std::string name;
  Tensor4 values;
};

struct ForwardOutput {
  Matrix features;  // spatially averaged last-stage activations
  Matrix logits;    // classifier(neck(features))
  /// "input_conv", "stage1".."stageK", "features" (N x D x 1 x 1).
  std::vector<NamedActivation> activations;
};

struct BlockCache {
  Tensor4 input;
  NormContext norm1;
  Tensor4 norm1_out;
  Tensor4 hidden;
  NormContext norm2;
  Tensor4 pre_relu;
  NormContext projection_norm;
};

/// Everything backward() needs from a forward pass.
struct ForwardCache {
  Tensor4 images;
  GACache ga;
  NormContext stem_norm;
  Tensor4 stem_pre_relu;
  std::vector<std::vector<BlockCache>> blocks;
  Tensor4 stage1_out;
  LACache la;
  Shape4 last_shape;
  NormContext neck;
  Matrix neck_out;
};

ForwardOutput forward(const ModelConfig& config, const ModelParams& params, const Tensor4& images,
                      NormMode mode, ForwardCache* cache = nullptr);

/// Folds batch statistics of a training-mode forward into the running buffers.
/// A no-op unless the config uses batch normalization.
void apply_running_stats(const ModelConfig& config, ModelParams& params, const ForwardCache& cache);

/// Gradients of a scalar loss given its gradients w.r.t. features and logits.
/// The buffer entries of the result are zero.
ModelParams backward(const ModelConfig& config, const ModelParams& params, const ForwardCache& cache,
                     const Matrix& grad_features, const Matrix& grad_logits);

// Checkpoint format:
//   #params v1
//   <name> <length>
//   <length space-separated reals>
//   ...
struct CheckpointArray {
  std::string name;
  std::vector<double> values;
  friend bool operator==(const CheckpointArray&, const CheckpointArray&) = default;
};

void write_checkpoint(std::ostream& out, const std::vector<CheckpointArray>& arrays);
std::vector<CheckpointArray> read_checkpoint(std::istream& in);

std::vector<CheckpointArray> to_checkpoint(const ModelParams& params);
/// Throws DataError when names or lengths differ from what `config` expects.
ModelParams from_checkpoint(const ModelConfig& config, const std::vector<CheckpointArray>& arrays);

void save_params(const std::filesystem::path& path, const ModelParams& params);
ModelParams load_params(const ModelConfig& config, const std::filesystem::path& path);

}  // namespace glamor
