#include "glamor/training.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "glamor/errors.hpp"
#include "glamor/random.hpp"
#include "glamor/text_format.hpp"

namespace glamor {

std::string_view to_string(LossTerms terms) noexcept {
  return terms == LossTerms::triplet ? "triplet" : "trisoft";
}

LossTerms parse_loss_terms(std::string_view text) {
  if (text == "triplet") return LossTerms::triplet;
  if (text == "trisoft") return LossTerms::trisoft;
  throw ConfigError("unknown loss '" + std::string(text) + "' (expected triplet or trisoft)");
}

void TrainConfig::validate() const {
  sampler.validate();
  schedule.validate();
  LossConfig probe = loss;
  probe.num_identities = std::max<std::size_t>(probe.num_identities, 2);
  probe.validate();
  erase.validate();
  if (!(flip_probability >= 0.0 && flip_probability <= 1.0)) {
    throw ConfigError("flip_probability must lie in [0, 1]");
  }
  adam.validate();
}

TrainConfig parse_train_config(KeyValueFile& file) {
  TrainConfig c;
  if (auto v = file.take_size("p")) c.sampler.identities_per_batch = *v;
  if (auto v = file.take_size("k")) c.sampler.instances_per_identity = *v;
  if (auto v = file.take_real("base_lr")) c.schedule.base_lr = *v;
  if (auto v = file.take("warmup")) c.schedule.kind = parse_warmup_kind(*v);
  if (auto v = file.take_size("warmup_epochs")) c.schedule.warmup_epochs = *v;
  if (auto v = file.take_real("decay_gamma")) c.schedule.decay_gamma = *v;
  if (auto v = file.take_size("decay_period")) c.schedule.decay_period = *v;
  if (auto v = file.take_real("margin")) c.loss.margin = *v;
  if (auto v = file.take("smoothing")) {
    if (*v == "inverse") {
      c.loss.smoothing = SmoothingMode::inverse_identities;
    } else if (*v == "explicit") {
      c.loss.smoothing = SmoothingMode::explicit_epsilon;
    } else {
      throw ConfigError("unknown smoothing '" + *v + "' (expected inverse or explicit)");
    }
  }
  if (auto v = file.take_real("smoothing_epsilon")) c.loss.epsilon = *v;
  if (auto v = file.take("loss")) c.terms = parse_loss_terms(*v);
  if (auto v = file.take_real("erase_probability")) c.erase.probability = *v;
  if (auto v = file.take_real("flip_probability")) c.flip_probability = *v;
  if (auto v = file.take_size("input_size")) c.input_size = *v;
  if (auto v = file.take_real("adam_beta1")) c.adam.beta1 = *v;
  if (auto v = file.take_real("adam_beta2")) c.adam.beta2 = *v;
  if (auto v = file.take_real("adam_epsilon")) c.adam.epsilon = *v;
  if (auto v = file.take_real("weight_decay")) c.adam.weight_decay = *v;
  c.validate();
  return c;
}

namespace {

std::string activation_dump(const std::vector<NamedActivation>& activations) {
  std::string out;
  for (const auto& a : activations) {
    out += "\n  " + a.name + " max|a|=" + format_real(max_abs(a.values));
  }
  return out;
}

}  // namespace

StepResult train_step(const ModelConfig& model, const TrainConfig& train, ModelParams& params, AdamState& state,
                      const Tensor4& images, std::span<const std::int64_t> labels, double lr) {
  ForwardCache cache;
  const ForwardOutput out = forward(model, params, images, NormMode::training, &cache);
  LossConfig loss_config = train.loss;
  loss_config.num_identities = model.num_classes;

  StepResult result;
  LossValue& loss = result.loss;
  if (train.terms == LossTerms::trisoft) {
    loss = trisoft_loss(out.features, out.logits, labels, loss_config);
  } else {
    LossFragment t = triplet_loss(out.features, batch_hard_mine(out.features, labels), loss_config);
    loss.total = loss.triplet_part = t.value;
    loss.embedding_gradient = std::move(t.gradient);
    loss.logit_gradient = Matrix(out.logits.rows(), out.logits.cols());
  }
  if (!std::isfinite(loss.total)) {
    throw NumericalError("non-finite training loss (triplet " + format_real(loss.triplet_part) + ", softmax " +
                         format_real(loss.softmax_part) + "); activation magnitudes:" +
                         activation_dump(out.activations));
  }
  const ModelParams grads = backward(model, params, cache, loss.embedding_gradient, loss.logit_gradient);
  adam_update(params, grads, state, lr, train.adam);
  apply_running_stats(model, params, cache);
  return result;
}

std::vector<std::int64_t> class_index(const Dataset& data) {
  std::vector<std::int64_t> ids = data.identities();
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

Tensor4 prepare_images(const TrainConfig& train, const Tensor4& images) {
  if (train.input_size == 0) return images;
  const Shape4& s = images.shape();
  if (s.h == train.input_size && s.w == train.input_size) return images;
  return resize_bilinear(images, train.input_size, train.input_size);
}

namespace {
constexpr std::uint64_t kSamplerSeedOffset = 1;
constexpr std::uint64_t kAugmentSeedOffset = 2;
}  // namespace

TrainResult train(const ModelConfig& model, const TrainConfig& config, const Dataset& data, std::size_t epochs,
                  std::uint64_t seed, const EpochCallback& on_epoch) {
  model.validate();
  config.validate();
  data.validate();
  const auto classes = class_index(data);
  if (model.num_classes != classes.size()) {
    throw ConfigError("model num_classes " + std::to_string(model.num_classes) + " does not match the " +
                      std::to_string(classes.size()) + " identities in the dataset");
  }
  const std::vector<std::int64_t> identities = data.identities();
  std::vector<std::int64_t> labels(identities.size());
  for (std::size_t i = 0; i < identities.size(); ++i) {
    labels[i] = std::lower_bound(classes.begin(), classes.end(), identities[i]) - classes.begin();
  }
  const Tensor4 images = prepare_images(config, data.images);
  check_input(model, images.shape());

  TrainResult result;
  result.params = init_params(model, seed);
  AdamState state = AdamState::for_params(result.params);
  PKSamplerConfig sampler = config.sampler;
  sampler.seed = seed + kSamplerSeedOffset;

  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    EpochStats stats;
    stats.epoch = epoch;
    stats.lr = lr_at(config.schedule, epoch);
    Rng aug(seed + kAugmentSeedOffset, epoch);
    double loss_sum = 0.0;
    for (const SampleBatch& batch : pk_sample(identities, sampler, epoch)) {
      Tensor4 x = images.gather(batch);
      std::vector<std::int64_t> y(batch.size());
      for (std::size_t i = 0; i < batch.size(); ++i) {
        y[i] = labels[batch[i]];
        if (aug.bernoulli(config.flip_probability)) horizontal_flip(x, i);
        if (random_erase(x, i, config.erase, aug).outcome == EraseOutcome::no_feasible_rectangle) {
          ++stats.erase_misses;
        }
      }
      loss_sum += train_step(model, config, result.params, state, x, y, stats.lr).loss.total;
      ++stats.batches;
    }
    stats.mean_loss = stats.batches > 0 ? loss_sum / static_cast<double>(stats.batches) : 0.0;
    result.history.push_back(stats);
    if (on_epoch) on_epoch(stats, result.params);
  }
  return result;
}

Matrix embed(const ModelConfig& model, const ModelParams& params, const Tensor4& images, std::size_t chunk) {
  const Shape4& s = images.shape();
  if (chunk == 0) chunk = 1;
  Matrix out(s.n, model.feature_dim);
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < s.n; start += chunk) {
    idx.clear();
    for (std::size_t i = start; i < std::min(s.n, start + chunk); ++i) idx.push_back(i);
    const ForwardOutput f = forward(model, params, images.gather(idx), NormMode::inference);
    for (std::size_t r = 0; r < idx.size(); ++r) {
      std::copy(f.features.row(r).begin(), f.features.row(r).end(), out.row(start + r).begin());
    }
  }
  return out;
}

HeldInSplit held_in_split(const Dataset& data, std::size_t queries_per_identity) {
  HeldInSplit split;
  std::map<std::int64_t, std::size_t> seen;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (seen[data.samples[i].identity]++ < queries_per_identity) {
      split.query.push_back(i);
    } else {
      split.gallery.push_back(i);
    }
  }
  return split;
}

namespace {

EmbeddingSet subset(const Matrix& features, const Dataset& data, const std::vector<std::size_t>& rows) {
  EmbeddingSet set;
  set.vectors = Matrix(rows.size(), features.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::copy(features.row(rows[r]).begin(), features.row(rows[r]).end(), set.vectors.row(r).begin());
    set.samples.push_back(data.samples[rows[r]]);
  }
  return set;
}

}  // namespace

RankingReport evaluate_held_in(const ModelConfig& model, const TrainConfig& train, const ModelParams& params,
                               const Dataset& data, std::size_t queries_per_identity) {
  const Matrix features = embed(model, params, prepare_images(train, data.images));
  const HeldInSplit split = held_in_split(data, queries_per_identity);
  return rank(subset(features, data, split.query), subset(features, data, split.gallery), Protocol::plain);
}

}  // namespace glamor
