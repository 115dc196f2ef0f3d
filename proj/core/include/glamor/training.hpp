#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "glamor/augment.hpp"
#include "glamor/dataset.hpp"
#include "glamor/key_value.hpp"
#include "glamor/losses.hpp"
#include "glamor/model.hpp"
#include "glamor/optimizer.hpp"
#include "glamor/reid_eval.hpp"
#include "glamor/sampler.hpp"
#include "glamor/schedule.hpp"

namespace glamor {

enum class LossTerms {
  triplet,  // batch-hard triplet on features only
  trisoft,  // triplet on features + smoothed softmax on logits
};

std::string_view to_string(LossTerms terms) noexcept;
LossTerms parse_loss_terms(std::string_view text);

struct TrainConfig {
  PKSamplerConfig sampler{5, 4, 0};
  ScheduleConfig schedule;
  LossConfig loss{kDefaultMargin, SmoothingMode::inverse_identities, 0.0, 0, true, Reduction::mean};
  LossTerms terms = LossTerms::trisoft;
  EraseConfig erase;
  double flip_probability = 0.5;
  std::size_t input_size = 0;  // square resize before training; 0 keeps the stored size
  AdamConfig adam;

  void validate() const;
};

/// Consumes training keys from `file`:
///   p, k, base_lr, warmup, warmup_epochs, decay_gamma, decay_period, margin,
///   smoothing (inverse|explicit), smoothing_epsilon, loss (trisoft|triplet),
///   erase_probability, flip_probability, input_size, adam_beta1, adam_beta2,
///   adam_epsilon, weight_decay
TrainConfig parse_train_config(KeyValueFile& file);

struct StepResult {
  LossValue loss;
};

/// One forward/backward/Adam step on a prepared batch. `labels` are class
/// indices in [0, num_classes). Throws NumericalError, listing the max |value|
/// of every probed activation, when the loss is not finite.
StepResult train_step(const ModelConfig& model, const TrainConfig& train, ModelParams& params, AdamState& state,
                      const Tensor4& images, std::span<const std::int64_t> labels, double lr);

struct EpochStats {
  std::size_t epoch = 0;
  double lr = 0.0;
  double mean_loss = 0.0;
  std::size_t batches = 0;
  std::size_t erase_misses = 0;  // erase draws with no feasible rectangle
};

struct TrainResult {
  ModelParams params;
  std::vector<EpochStats> history;
};

using EpochCallback = std::function<void(const EpochStats&, const ModelParams&)>;

/// Initializes from `seed`, then runs `epochs` PK-sampled epochs with flip and
/// random erasing. Identities map to class indices in ascending order; the
/// model's num_classes must equal the number of distinct identities.
/// Bit-reproducible for a fixed seed and thread count independent.
TrainResult train(const ModelConfig& model, const TrainConfig& train, const Dataset& data, std::size_t epochs,
                  std::uint64_t seed, const EpochCallback& on_epoch = {});

/// Sorted distinct identities; position = class index.
std::vector<std::int64_t> class_index(const Dataset& data);

/// Inference-mode features for every image, computed in chunks.
Matrix embed(const ModelConfig& model, const ModelParams& params, const Tensor4& images,
             std::size_t chunk = 64);

/// Resizes to the training input size when the config asks for one.
Tensor4 prepare_images(const TrainConfig& train, const Tensor4& images);

/// Held-in retrieval split: the first `queries_per_identity` samples of each
/// identity (in dataset order) are queries, the rest form the gallery.
struct HeldInSplit {
  std::vector<std::size_t> query;
  std::vector<std::size_t> gallery;
};

HeldInSplit held_in_split(const Dataset& data, std::size_t queries_per_identity = 2);

/// Embeds the dataset and ranks the held-in split under the plain protocol.
RankingReport evaluate_held_in(const ModelConfig& model, const TrainConfig& train, const ModelParams& params,
                               const Dataset& data, std::size_t queries_per_identity = 2);

}  // namespace glamor
