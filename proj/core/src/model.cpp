#include "glamor/model.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <set>

#include "glamor/errors.hpp"
#include "glamor/random.hpp"
#include "glamor/text_format.hpp"

namespace glamor {

namespace {

NormState zero_norm(std::size_t channels) {
  NormState s;
  s.gamma.assign(channels, 0.0);
  s.beta.assign(channels, 0.0);
  s.running_mean.assign(channels, 0.0);
  s.running_var.assign(channels, 0.0);
  return s;
}

ModelParams make_layout(const ModelConfig& config) {
  config.validate();
  ModelParams p;
  const std::size_t stem_c = config.stem.out_channels;
  p.stem = ConvKernel::zeros(stem_c, config.in_channels, config.stem.kernel, config.stem.stride,
                             config.stem.kernel / 2);
  p.stem_norm = zero_norm(stem_c);
  if (config.attach_ga) {
    p.ga = GAParams::zeros(stem_c, config.ga_mid_channels);
    p.ga->leaky_slope = config.leaky_slope;
  }
  std::size_t in_c = stem_c;
  for (const auto& stage : config.stages) {
    std::vector<ResidualBlockParams> blocks;
    for (std::size_t b = 0; b < stage.blocks; ++b) {
      const std::size_t stride = b == 0 ? stage.stride : 1;
      ResidualBlockParams block;
      block.conv1 = ConvKernel::zeros(stage.channels, in_c, 3, stride, 1);
      block.norm1 = zero_norm(stage.channels);
      block.conv2 = ConvKernel::zeros(stage.channels, stage.channels, 3, 1, 1);
      block.norm2 = zero_norm(stage.channels);
      if (in_c != stage.channels || stride != 1) {
        block.projection = ConvKernel::zeros(stage.channels, in_c, 1, stride, 0);
        block.projection_norm = zero_norm(stage.channels);
      }
      blocks.push_back(std::move(block));
      in_c = stage.channels;
    }
    p.stages.push_back(std::move(blocks));
  }
  if (config.attach_la) p.la = LAParams::zeros(config.stages.front().channels, config.la_reduction, config.la_kernel);
  p.neck = zero_norm(config.feature_dim);
  p.neck.running_mean.clear();
  p.neck.running_var.clear();
  p.classifier = Matrix(config.num_classes, config.feature_dim);
  return p;
}

template <typename T>
class Collector {
 public:
  explicit Collector(std::vector<NamedArray<T>>& out) : out_(out) {}

  template <typename Vec>
  void vec(std::string name, Vec& v, ArrayRole role = ArrayRole::parameter) {
    out_.push_back({std::move(name), std::span<T>(v.data(), v.size()), role});
  }

  template <typename Conv>
  void conv(const std::string& prefix, Conv& k) {
    out_.push_back({prefix + ".weight", k.weight.data(), ArrayRole::parameter});
    vec(prefix + ".bias", k.bias);
  }

  template <typename Norm>
  void norm(const std::string& prefix, Norm& s) {
    vec(prefix + ".gamma", s.gamma);
    vec(prefix + ".beta", s.beta);
    if (!s.running_mean.empty()) vec(prefix + ".running_mean", s.running_mean, ArrayRole::buffer);
    if (!s.running_var.empty()) vec(prefix + ".running_var", s.running_var, ArrayRole::buffer);
  }

 private:
  std::vector<NamedArray<T>>& out_;
};

template <typename T, typename Params>
std::vector<NamedArray<T>> collect(Params& p) {
  std::vector<NamedArray<T>> out;
  Collector<T> c(out);
  c.conv("stem", p.stem);
  c.norm("stem_norm", p.stem_norm);
  if (p.ga) {
    c.conv("ga.conv1", p.ga->conv1);
    c.conv("ga.conv2", p.ga->conv2);
  }
  for (std::size_t s = 0; s < p.stages.size(); ++s) {
    for (std::size_t b = 0; b < p.stages[s].size(); ++b) {
      auto& block = p.stages[s][b];
      const std::string prefix = "stage" + std::to_string(s + 1) + ".block" + std::to_string(b);
      c.conv(prefix + ".conv1", block.conv1);
      c.norm(prefix + ".norm1", block.norm1);
      c.conv(prefix + ".conv2", block.conv2);
      c.norm(prefix + ".norm2", block.norm2);
      if (block.projection) {
        c.conv(prefix + ".projection", *block.projection);
        c.norm(prefix + ".projection_norm", *block.projection_norm);
      }
    }
  }
  if (p.la) {
    c.conv("la.fc1", p.la->fc1);
    c.conv("la.fc2", p.la->fc2);
    c.conv("la.spatial", p.la->spatial);
  }
  c.norm("neck", p.neck);
  out.push_back({"classifier.weight", p.classifier.data(), ArrayRole::parameter});
  return out;
}

void he_init(ConvKernel& k, Rng& rng) {
  const double fan_in = static_cast<double>(k.in_channels() * k.kernel_h() * k.kernel_w());
  const double sd = std::sqrt(2.0 / fan_in);
  for (double& w : k.weight.data()) w = rng.normal(0.0, sd);
}

void identity_norm(NormState& s) {
  std::fill(s.gamma.begin(), s.gamma.end(), 1.0);
  std::fill(s.running_var.begin(), s.running_var.end(), 1.0);
}

constexpr std::uint64_t kInitStream = 11;

}  // namespace

ModelParams ModelParams::zeros(const ModelConfig& config) { return make_layout(config); }

std::vector<NamedArray<double>> named_arrays(ModelParams& params) { return collect<double>(params); }

std::vector<NamedArray<const double>> named_arrays(const ModelParams& params) {
  return collect<const double>(params);
}

std::size_t parameter_count(const ModelParams& params) {
  std::size_t n = 0;
  for (const auto& a : named_arrays(params)) {
    if (a.role == ArrayRole::parameter) n += a.values.size();
  }
  return n;
}

ModelParams init_params(const ModelConfig& config, std::uint64_t seed) {
  ModelParams p = make_layout(config);
  Rng rng(seed, kInitStream);
  he_init(p.stem, rng);
  identity_norm(p.stem_norm);
  if (p.ga) {
    Rng ga_rng(seed, kInitStream + 1);
    he_init(p.ga->conv1, ga_rng);
    he_init(p.ga->conv2, ga_rng);
  }
  for (auto& stage : p.stages) {
    for (auto& block : stage) {
      he_init(block.conv1, rng);
      identity_norm(block.norm1);
      he_init(block.conv2, rng);
      identity_norm(block.norm2);
      if (block.projection) {
        he_init(*block.projection, rng);
        identity_norm(*block.projection_norm);
      }
    }
  }
  if (p.la) {
    Rng la_rng(seed, kInitStream + 2);
    he_init(p.la->fc1, la_rng);
    he_init(p.la->fc2, la_rng);
    he_init(p.la->spatial, la_rng);
  }
  identity_norm(p.neck);
  for (double& w : p.classifier.data()) w = rng.normal(0.0, 0.01);
  return p;
}

void check_params(const ModelConfig& config, const ModelParams& params) {
  const ModelParams layout = make_layout(config);
  const auto expected = named_arrays(layout);
  const auto actual = named_arrays(params);
  if (expected.size() != actual.size()) {
    throw ConfigError("parameters hold " + std::to_string(actual.size()) + " arrays, config implies " +
                      std::to_string(expected.size()));
  }
  for (std::size_t i = 0; i < expected.size(); ++i) {
    if (expected[i].name != actual[i].name || expected[i].values.size() != actual[i].values.size()) {
      throw ConfigError("parameter '" + actual[i].name + "' (" + std::to_string(actual[i].values.size()) +
                        " values) does not match config array '" + expected[i].name + "' (" +
                        std::to_string(expected[i].values.size()) + " values)");
    }
  }
  if (params.stem.weight.shape() != layout.stem.weight.shape() || params.stem.stride != layout.stem.stride) {
    throw ConfigError("stem kernel " + params.stem.weight.shape().str() + " does not match the config");
  }
}

void check_input(const ModelConfig& config, const Shape4& input) {
  if (input.n == 0 || input.h == 0 || input.w == 0) {
    throw ShapeError("model input must be non-empty, got " + input.str());
  }
  if (input.c != config.in_channels) {
    throw ShapeError("model expects " + std::to_string(config.in_channels) + " input channels, got " +
                     input.str());
  }
}

namespace {

Tensor4 block_forward(const NormSpec& spec, const ResidualBlockParams& p, const Tensor4& x, NormMode mode,
                      BlockCache* cache) {
  const Tensor4 a = normalize(conv2d(x, p.conv1), spec, p.norm1, mode, cache ? &cache->norm1 : nullptr);
  Tensor4 h = relu(a);
  const Tensor4 b = normalize(conv2d(h, p.conv2), spec, p.norm2, mode, cache ? &cache->norm2 : nullptr);
  Tensor4 pre;
  if (p.projection) {
    pre = add(b, normalize(conv2d(x, *p.projection), spec, *p.projection_norm, mode,
                           cache ? &cache->projection_norm : nullptr));
  } else {
    pre = add(b, x);
  }
  Tensor4 out = relu(pre);
  if (cache) {
    cache->input = x;
    cache->norm1_out = a;
    cache->hidden = std::move(h);
    cache->pre_relu = std::move(pre);
  }
  return out;
}

Tensor4 block_backward(const ResidualBlockParams& p, const BlockCache& c, const Tensor4& grad_out,
                       ResidualBlockParams& g) {
  const Tensor4 g_pre = relu_backward(c.pre_relu, grad_out);
  NormGrads n2 = norm_backward(g_pre, c.norm2, p.norm2);
  g.norm2.gamma = std::move(n2.gamma);
  g.norm2.beta = std::move(n2.beta);
  ConvGrads c2 = conv2d_backward(c.hidden, p.conv2, n2.input);
  g.conv2.weight = std::move(c2.weight);
  g.conv2.bias = std::move(c2.bias);
  NormGrads n1 = norm_backward(relu_backward(c.norm1_out, c2.input), c.norm1, p.norm1);
  g.norm1.gamma = std::move(n1.gamma);
  g.norm1.beta = std::move(n1.beta);
  ConvGrads c1 = conv2d_backward(c.input, p.conv1, n1.input);
  g.conv1.weight = std::move(c1.weight);
  g.conv1.bias = std::move(c1.bias);
  Tensor4 g_x = std::move(c1.input);
  if (p.projection) {
    NormGrads pn = norm_backward(g_pre, c.projection_norm, *p.projection_norm);
    g.projection_norm->gamma = std::move(pn.gamma);
    g.projection_norm->beta = std::move(pn.beta);
    ConvGrads pc = conv2d_backward(c.input, *p.projection, pn.input);
    g.projection->weight = std::move(pc.weight);
    g.projection->bias = std::move(pc.bias);
    add_inplace(g_x, pc.input);
  } else {
    add_inplace(g_x, g_pre);
  }
  return g_x;
}

Matrix average_pool(const Tensor4& x) {
  const Shape4& s = x.shape();
  Matrix out(s.n, s.c);
  const double area = static_cast<double>(s.plane());
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      double acc = 0.0;
      for (double v : x.plane(n, c)) acc += v;
      out(n, c) = acc / area;
    }
  }
  return out;
}

Tensor4 matrix_as_tensor(const Matrix& m) {
  return Tensor4({m.rows(), m.cols(), 1, 1}, std::vector<double>(m.data().begin(), m.data().end()));
}

}  // namespace

ForwardOutput forward(const ModelConfig& config, const ModelParams& params, const Tensor4& images, NormMode mode,
                      ForwardCache* cache) {
  check_params(config, params);
  check_input(config, images.shape());

  ForwardOutput out;
  Tensor4 x = conv2d(images, params.stem);
  const bool ga_first = config.ga_placement == GAPlacement::pre_norm;
  if (params.ga && ga_first) x = global_attention(x, *params.ga, cache ? &cache->ga : nullptr);
  x = normalize(x, config.norm, params.stem_norm, mode, cache ? &cache->stem_norm : nullptr);
  if (cache) {
    cache->images = images;
    cache->stem_pre_relu = x;
    cache->blocks.assign(params.stages.size(), {});
  }
  x = relu(x);
  if (params.ga && !ga_first) x = global_attention(x, *params.ga, cache ? &cache->ga : nullptr);
  out.activations.push_back({"input_conv", x});

  for (std::size_t s = 0; s < params.stages.size(); ++s) {
    if (cache) cache->blocks[s].resize(params.stages[s].size());
    for (std::size_t b = 0; b < params.stages[s].size(); ++b) {
      x = block_forward(config.norm, params.stages[s][b], x, mode, cache ? &cache->blocks[s][b] : nullptr);
    }
    if (s == 0 && params.la) {
      if (cache) cache->stage1_out = x;
      const Tensor4 local = local_attention(x, *params.la, cache ? &cache->la : nullptr);
      x = fuse(x, local, make_channel_masks(x.shape().c));
    }
    out.activations.push_back({"stage" + std::to_string(s + 1), x});
  }

  out.features = average_pool(x);
  out.activations.push_back({"features", matrix_as_tensor(out.features)});
  Matrix neck_out = neck(out.features, params.neck, config.norm.epsilon, cache ? &cache->neck : nullptr);

  const Matrix& w = params.classifier;
  out.logits = Matrix(neck_out.rows(), w.rows());
  for (std::size_t n = 0; n < neck_out.rows(); ++n) {
    const auto f = neck_out.row(n);
    for (std::size_t k = 0; k < w.rows(); ++k) {
      const auto wk = w.row(k);
      double acc = 0.0;
      for (std::size_t d = 0; d < f.size(); ++d) acc += f[d] * wk[d];
      out.logits(n, k) = acc;
    }
  }
  if (cache) {
    cache->last_shape = x.shape();
    cache->neck_out = std::move(neck_out);
  }
  return out;
}

void apply_running_stats(const ModelConfig& config, ModelParams& params, const ForwardCache& cache) {
  if (config.norm.kind != NormKind::batch) return;
  update_running_stats(params.stem_norm, cache.stem_norm);
  for (std::size_t s = 0; s < params.stages.size(); ++s) {
    for (std::size_t b = 0; b < params.stages[s].size(); ++b) {
      auto& block = params.stages[s][b];
      const auto& c = cache.blocks[s][b];
      update_running_stats(block.norm1, c.norm1);
      update_running_stats(block.norm2, c.norm2);
      if (block.projection_norm) update_running_stats(*block.projection_norm, c.projection_norm);
    }
  }
}

ModelParams backward(const ModelConfig& config, const ModelParams& params, const ForwardCache& cache,
                     const Matrix& grad_features, const Matrix& grad_logits) {
  const Shape4 last = cache.last_shape;
  if (grad_features.rows() != last.n || grad_features.cols() != last.c) {
    throw ShapeError("backward: feature gradient is " + std::to_string(grad_features.rows()) + "x" +
                     std::to_string(grad_features.cols()) + ", expected " + std::to_string(last.n) + "x" +
                     std::to_string(last.c));
  }
  if (grad_logits.rows() != last.n || grad_logits.cols() != params.classifier.rows()) {
    throw ShapeError("backward: logit gradient does not match the classifier output");
  }
  ModelParams g = make_layout(config);
  const Matrix& w = params.classifier;
  const Matrix& f = cache.neck_out;

  Matrix g_neck(f.rows(), f.cols());
  for (std::size_t n = 0; n < f.rows(); ++n) {
    for (std::size_t k = 0; k < w.rows(); ++k) {
      const double gl = grad_logits(n, k);
      for (std::size_t d = 0; d < f.cols(); ++d) {
        g.classifier(k, d) += gl * f(n, d);
        g_neck(n, d) += gl * w(k, d);
      }
    }
  }
  NeckGrads ng = neck_backward(g_neck, cache.neck, params.neck);
  g.neck.gamma = std::move(ng.gamma);
  g.neck.beta = std::move(ng.beta);

  Tensor4 gx(last);
  const double area = static_cast<double>(last.plane());
  for (std::size_t n = 0; n < last.n; ++n) {
    for (std::size_t c = 0; c < last.c; ++c) {
      const double v = (grad_features(n, c) + ng.input(n, c)) / area;
      for (double& e : gx.plane(n, c)) e = v;
    }
  }

  for (std::size_t s = params.stages.size(); s-- > 0;) {
    if (s == 0 && params.la) {
      FuseGrads fg = fuse_backward(gx, make_channel_masks(cache.stage1_out.shape().c));
      LAGrads lg = local_attention_backward(fg.local_features, *params.la, cache.la);
      g.la->fc1.weight = std::move(lg.fc1.weight);
      g.la->fc1.bias = std::move(lg.fc1.bias);
      g.la->fc2.weight = std::move(lg.fc2.weight);
      g.la->fc2.bias = std::move(lg.fc2.bias);
      g.la->spatial.weight = std::move(lg.spatial.weight);
      g.la->spatial.bias = std::move(lg.spatial.bias);
      gx = std::move(fg.global_features);
      add_inplace(gx, lg.input);
    }
    for (std::size_t b = params.stages[s].size(); b-- > 0;) {
      gx = block_backward(params.stages[s][b], cache.blocks[s][b], gx, g.stages[s][b]);
    }
  }

  auto ga_backward = [&] {
    GAGrads gg = global_attention_backward(gx, *params.ga, cache.ga);
    g.ga->conv1.weight = std::move(gg.conv1.weight);
    g.ga->conv1.bias = std::move(gg.conv1.bias);
    g.ga->conv2.weight = std::move(gg.conv2.weight);
    g.ga->conv2.bias = std::move(gg.conv2.bias);
    gx = std::move(gg.input);
  };
  const bool ga_first = config.ga_placement == GAPlacement::pre_norm;
  if (params.ga && !ga_first) ga_backward();
  gx = relu_backward(cache.stem_pre_relu, gx);
  NormGrads sn = norm_backward(gx, cache.stem_norm, params.stem_norm);
  g.stem_norm.gamma = std::move(sn.gamma);
  g.stem_norm.beta = std::move(sn.beta);
  gx = std::move(sn.input);
  if (params.ga && ga_first) ga_backward();
  ConvGrads stem = conv2d_backward(cache.images, params.stem, gx);
  g.stem.weight = std::move(stem.weight);
  g.stem.bias = std::move(stem.bias);
  return g;
}

namespace {
constexpr std::string_view kParamsHeader = "#params v1";
}

void write_checkpoint(std::ostream& out, const std::vector<CheckpointArray>& arrays) {
  out << kParamsHeader << '\n';
  for (const auto& a : arrays) {
    out << a.name << ' ' << a.values.size() << '\n';
    for (std::size_t i = 0; i < a.values.size(); ++i) {
      if (i > 0) out << ' ';
      out << format_real(a.values[i]);
    }
    out << '\n';
  }
}

std::vector<CheckpointArray> read_checkpoint(std::istream& in) {
  LineReader reader(in);
  std::string line;
  if (!reader.next(line) || trim(line) != kParamsHeader) throw DataError("expected header '#params v1'", 1);
  std::vector<CheckpointArray> arrays;
  std::set<std::string, std::less<>> seen;
  while (reader.next(line)) {
    if (trim(line).empty()) continue;
    const std::size_t header_line = reader.line_number();
    const auto fields = split_whitespace(line);
    if (fields.size() != 2) throw DataError("expected '<name> <length>'", header_line);
    CheckpointArray a;
    a.name = std::string(fields[0]);
    if (!seen.insert(a.name).second) throw DataError("duplicate array '" + a.name + "'", header_line);
    const std::size_t length = parse_size(fields[1], header_line);
    if (!reader.next(line)) {
      throw DataError("array '" + a.name + "' has no value line", header_line + 1);
    }
    const auto tokens = split_whitespace(line);
    if (tokens.size() != length) {
      throw DataError("array '" + a.name + "' declares " + std::to_string(length) + " values, found " +
                          std::to_string(tokens.size()),
                      reader.line_number());
    }
    a.values.reserve(length);
    for (auto t : tokens) a.values.push_back(parse_real(t, reader.line_number()));
    arrays.push_back(std::move(a));
  }
  return arrays;
}

std::vector<CheckpointArray> to_checkpoint(const ModelParams& params) {
  std::vector<CheckpointArray> out;
  for (const auto& a : named_arrays(params)) out.push_back({a.name, {a.values.begin(), a.values.end()}});
  return out;
}

ModelParams from_checkpoint(const ModelConfig& config, const std::vector<CheckpointArray>& arrays) {
  ModelParams p = make_layout(config);
  std::map<std::string, const CheckpointArray*, std::less<>> by_name;
  for (const auto& a : arrays) by_name[a.name] = &a;
  auto targets = named_arrays(p);
  for (auto& t : targets) {
    auto it = by_name.find(t.name);
    if (it == by_name.end()) throw DataError("checkpoint lacks array '" + t.name + "'");
    if (it->second->values.size() != t.values.size()) {
      throw DataError("array '" + t.name + "' has " + std::to_string(it->second->values.size()) +
                      " values, config expects " + std::to_string(t.values.size()));
    }
    std::copy(it->second->values.begin(), it->second->values.end(), t.values.begin());
    by_name.erase(it);
  }
  if (!by_name.empty()) {
    throw DataError("checkpoint array '" + by_name.begin()->first + "' is not part of this model");
  }
  return p;
}

void save_params(const std::filesystem::path& path, const ModelParams& params) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  write_checkpoint(out, to_checkpoint(params));
}

ModelParams load_params(const ModelConfig& config, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  try {
    return from_checkpoint(config, read_checkpoint(in));
  } catch (const DataError& e) {
    throw DataError::prefixed(e, path.string());
  }
}

}  // namespace glamor
