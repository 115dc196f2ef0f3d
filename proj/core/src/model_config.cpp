#include "glamor/model_config.hpp"

#include <sstream>

#include "glamor/errors.hpp"
#include "glamor/text_format.hpp"

namespace glamor {

void ModelConfig::validate() const {
  if (in_channels == 0) throw ConfigError("in_channels must be positive");
  if (stem.out_channels == 0 || stem.stride == 0) throw ConfigError("stem needs positive width and stride");
  if (stem.kernel % 2 == 0) throw ConfigError("stem kernel must be odd");
  if (stages.empty()) throw ConfigError("model needs at least one stage");
  for (std::size_t i = 0; i < stages.size(); ++i) {
    if (stages[i].blocks == 0 || stages[i].channels == 0 || stages[i].stride == 0) {
      throw ConfigError("stage " + std::to_string(i + 1) + " needs positive blocks, channels and stride");
    }
  }
  if (stages.back().stride != 1) throw ConfigError("the last stage must use stride 1");
  if (feature_dim != stages.back().channels) {
    throw ConfigError("feature_dim " + std::to_string(feature_dim) + " must equal the last stage width " +
                      std::to_string(stages.back().channels));
  }
  if (num_classes == 0) throw ConfigError("num_classes must be positive");
  if (!(leaky_slope > 0.0 && leaky_slope < 1.0)) throw ConfigError("leaky_slope must lie in (0, 1)");
  if (la_reduction == 0 || la_kernel % 2 == 0) throw ConfigError("la_reduction must be positive and la_kernel odd");
  norm.validate(stem.out_channels);
  for (const auto& s : stages) norm.validate(s.channels);
}

std::string_view to_string(GAPlacement placement) noexcept {
  return placement == GAPlacement::pre_norm ? "pre_norm" : "post_relu";
}

GAPlacement parse_ga_placement(std::string_view text) {
  if (text == "pre_norm") return GAPlacement::pre_norm;
  if (text == "post_relu") return GAPlacement::post_relu;
  throw ConfigError("ga_placement must be pre_norm or post_relu, got '" + std::string(text) + "'");
}

ModelConfig ModelConfig::toy() {
  ModelConfig c;
  c.stem = {8, 3, 1};
  c.stages = {{1, 8, 1}, {1, 16, 1}};
  c.norm = {NormKind::group, 4, kDefaultNormEpsilon};
  c.feature_dim = 16;
  c.num_classes = 4;
  return c;
}

ModelConfig ModelConfig::resnet18(std::size_t num_classes) {
  ModelConfig c;
  c.stem = {64, 7, 2};
  c.stages = {{2, 64, 1}, {2, 128, 2}, {2, 256, 2}, {2, 512, 1}};
  c.norm = {NormKind::group, kDefaultGroupSize, kDefaultNormEpsilon};
  c.feature_dim = 512;
  c.num_classes = num_classes;
  return c;
}

namespace {

std::vector<StageConfig> parse_stages(const std::string& text) {
  std::vector<StageConfig> stages;
  std::vector<bool> explicit_stride;
  for (auto item : split(text, ',')) {
    item = trim(item);
    const auto x = item.find('x');
    if (x == std::string_view::npos) throw ConfigError("stage '" + std::string(item) + "' is not BxC[/S]");
    StageConfig s;
    s.blocks = parse_size(item.substr(0, x));
    auto rest = item.substr(x + 1);
    const auto slash = rest.find('/');
    if (slash == std::string_view::npos) {
      s.channels = parse_size(rest);
      explicit_stride.push_back(false);
    } else {
      s.channels = parse_size(rest.substr(0, slash));
      s.stride = parse_size(rest.substr(slash + 1));
      explicit_stride.push_back(true);
    }
    stages.push_back(s);
  }
  for (std::size_t i = 0; i < stages.size(); ++i) {
    if (explicit_stride[i]) continue;
    stages[i].stride = (i == 0 || i + 1 == stages.size()) ? 1 : 2;
  }
  return stages;
}

}  // namespace

ModelConfig parse_model_config(KeyValueFile& file) {
  ModelConfig c = ModelConfig::toy();
  if (auto v = file.take_size("in_channels")) c.in_channels = *v;
  if (auto v = file.take("stem")) {
    const auto parts = split(*v, ',');
    if (parts.size() != 3) throw ConfigError("stem must be OUT,KERNEL,STRIDE");
    c.stem = {parse_size(trim(parts[0])), parse_size(trim(parts[1])), parse_size(trim(parts[2]))};
  }
  if (auto v = file.take("stages")) c.stages = parse_stages(*v);
  if (auto v = file.take("norm")) c.norm.kind = parse_norm_kind(*v);
  if (auto v = file.take_size("group_size")) c.norm.group_size = *v;
  if (auto v = file.take_real("norm_epsilon")) c.norm.epsilon = *v;
  c.feature_dim = c.stages.back().channels;
  if (auto v = file.take_size("feature_dim")) c.feature_dim = *v;
  if (auto v = file.take_size("num_classes")) c.num_classes = *v;
  if (auto v = file.take_bool("attach_ga")) c.attach_ga = *v;
  if (auto v = file.take("ga_placement")) c.ga_placement = parse_ga_placement(*v);
  if (auto v = file.take_bool("attach_la")) c.attach_la = *v;
  if (auto v = file.take_real("leaky_slope")) c.leaky_slope = *v;
  if (auto v = file.take_size("ga_mid_channels")) c.ga_mid_channels = *v;
  if (auto v = file.take_size("la_reduction")) c.la_reduction = *v;
  if (auto v = file.take_size("la_kernel")) c.la_kernel = *v;
  c.validate();
  return c;
}

std::string format_model_config(const ModelConfig& c) {
  std::ostringstream out;
  out << "in_channels=" << c.in_channels << '\n';
  out << "stem=" << c.stem.out_channels << ',' << c.stem.kernel << ',' << c.stem.stride << '\n';
  out << "stages=";
  for (std::size_t i = 0; i < c.stages.size(); ++i) {
    if (i > 0) out << ',';
    out << c.stages[i].blocks << 'x' << c.stages[i].channels << '/' << c.stages[i].stride;
  }
  out << '\n';
  out << "norm=" << to_string(c.norm.kind) << '\n';
  out << "group_size=" << c.norm.group_size << '\n';
  out << "norm_epsilon=" << format_real(c.norm.epsilon) << '\n';
  out << "feature_dim=" << c.feature_dim << '\n';
  out << "num_classes=" << c.num_classes << '\n';
  out << "attach_ga=" << (c.attach_ga ? "true" : "false") << '\n';
  out << "ga_placement=" << to_string(c.ga_placement) << '\n';
  out << "attach_la=" << (c.attach_la ? "true" : "false") << '\n';
  out << "leaky_slope=" << format_real(c.leaky_slope) << '\n';
  out << "ga_mid_channels=" << c.ga_mid_channels << '\n';
  out << "la_reduction=" << c.la_reduction << '\n';
  out << "la_kernel=" << c.la_kernel << '\n';
  return out.str();
}

}  // namespace glamor
