#include "glamor/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <ostream>
#include <set>

#include "glamor/errors.hpp"
#include "glamor/random.hpp"
#include "glamor/tensor_io.hpp"
#include "glamor/text_format.hpp"

namespace glamor {

std::vector<std::int64_t> Dataset::identities() const {
  std::vector<std::int64_t> ids;
  ids.reserve(samples.size());
  for (const auto& s : samples) ids.push_back(s.identity);
  return ids;
}

void Dataset::validate() const {
  if (images.shape().n != samples.size()) {
    throw DataError("dataset has " + std::to_string(images.shape().n) + " images but " +
                    std::to_string(samples.size()) + " metadata records");
  }
  std::set<std::string> seen;
  for (const auto& s : samples) {
    if (!seen.insert(s.sample_id).second) throw DataError("duplicate sample id '" + s.sample_id + "'");
  }
}

namespace {

constexpr std::size_t kMotifSize = 4;
constexpr std::size_t kPaletteSize = 4;

struct IdentityLook {
  std::vector<double> color;
  double semi_major = 0.0;  // fraction of image size
  double semi_minor = 0.0;
  std::vector<double> motif;  // channels x 4 x 4, values in {0, 1}
};

IdentityLook make_look(std::size_t identity, std::size_t channels, Rng& rng) {
  // A small palette makes several identities share a body colour, so colour
  // alone does not separate them.
  static constexpr std::array<std::array<double, 3>, kPaletteSize> kPalette{{
      {0.85, 0.20, 0.20}, {0.20, 0.35, 0.85}, {0.90, 0.85, 0.25}, {0.30, 0.75, 0.35}}};
  IdentityLook look;
  look.color.resize(channels);
  for (std::size_t c = 0; c < channels; ++c) {
    look.color[c] = std::clamp(kPalette[identity % kPaletteSize][c % 3] + rng.normal(0.0, 0.05), 0.0, 1.0);
  }
  look.semi_major = rng.uniform(0.28, 0.40);
  look.semi_minor = rng.uniform(0.16, 0.26);
  look.motif.resize(channels * kMotifSize * kMotifSize);
  for (auto& v : look.motif) v = rng.bernoulli(0.5) ? 1.0 : 0.0;
  return look;
}

void render_instance(const IdentityLook& look, Tensor4& images, std::size_t index, Rng& rng) {
  const Shape4& s = images.shape();
  const double size = static_cast<double>(s.h);

  const double background = rng.uniform(0.25, 0.6);
  const double tilt = rng.uniform(-0.15, 0.15);
  for (std::size_t c = 0; c < s.c; ++c)
    for (std::size_t y = 0; y < s.h; ++y)
      for (std::size_t x = 0; x < s.w; ++x) {
        images(index, c, y, x) = background + tilt * (static_cast<double>(y) / size - 0.5);
      }

  const double cy = size / 2.0 + rng.uniform(-0.12, 0.12) * size;
  const double cx = size / 2.0 + rng.uniform(-0.12, 0.12) * size;
  const double scale = rng.uniform(0.85, 1.15);
  const double brightness = rng.uniform(0.8, 1.2);
  const double ry = look.semi_minor * size * scale;
  const double rx = look.semi_major * size * scale;
  for (std::size_t y = 0; y < s.h; ++y)
    for (std::size_t x = 0; x < s.w; ++x) {
      const double dy = (static_cast<double>(y) + 0.5 - cy) / ry;
      const double dx = (static_cast<double>(x) + 0.5 - cx) / rx;
      if (dy * dy + dx * dx <= 1.0) {
        for (std::size_t c = 0; c < s.c; ++c) images(index, c, y, x) = std::min(1.0, look.color[c] * brightness);
      }
    }

  // Motif on the body, at one of several placements (stand-in for viewpoint).
  const double place = rng.uniform(-0.5, 0.5);
  const auto my = static_cast<std::ptrdiff_t>(std::lround(cy - kMotifSize / 2.0));
  const auto mx = static_cast<std::ptrdiff_t>(std::lround(cx + place * rx - kMotifSize / 2.0));
  for (std::size_t c = 0; c < s.c; ++c)
    for (std::size_t y = 0; y < kMotifSize; ++y)
      for (std::size_t x = 0; x < kMotifSize; ++x) {
        const std::ptrdiff_t py = my + static_cast<std::ptrdiff_t>(y);
        const std::ptrdiff_t px = mx + static_cast<std::ptrdiff_t>(x);
        if (py < 0 || px < 0 || py >= static_cast<std::ptrdiff_t>(s.h) || px >= static_cast<std::ptrdiff_t>(s.w)) continue;
        images(index, c, static_cast<std::size_t>(py), static_cast<std::size_t>(px)) =
            look.motif[(c * kMotifSize + y) * kMotifSize + x];
      }

  if (rng.bernoulli(0.5)) {
    const auto oh = static_cast<std::size_t>(std::max(1.0, rng.uniform(0.2, 0.45) * size));
    const auto ow = static_cast<std::size_t>(std::max(1.0, rng.uniform(0.2, 0.45) * size));
    const std::size_t top = rng.uniform_index(s.h - std::min(oh, s.h) + 1);
    const std::size_t left = rng.uniform_index(s.w - std::min(ow, s.w) + 1);
    const double shade = rng.uniform(0.0, 1.0);
    for (std::size_t c = 0; c < s.c; ++c)
      for (std::size_t y = top; y < std::min(s.h, top + oh); ++y)
        for (std::size_t x = left; x < std::min(s.w, left + ow); ++x) images(index, c, y, x) = shade;
  }

  for (double& v : images.sample(index)) v += rng.normal(0.0, 0.08);
}

}  // namespace

Dataset make_synthetic_dataset(const SyntheticConfig& config) {
  if (config.num_identities == 0 || config.images_per_identity == 0 || config.image_size == 0 ||
      config.channels == 0 || config.num_cameras == 0) {
    throw ConfigError("synthetic dataset counts must be positive");
  }
  Dataset ds;
  const std::size_t total = config.num_identities * config.images_per_identity;
  ds.images = Tensor4({total, config.channels, config.image_size, config.image_size});
  ds.samples.reserve(total);

  Rng look_rng(config.seed, 1);
  Rng image_rng(config.seed, 2);
  for (std::size_t id = 0; id < config.num_identities; ++id) {
    const IdentityLook look = make_look(id, config.channels, look_rng);
    for (std::size_t k = 0; k < config.images_per_identity; ++k) {
      const std::size_t index = id * config.images_per_identity + k;
      render_instance(look, ds.images, index, image_rng);
      std::string sid = "id" + std::to_string(id) + "_" + std::to_string(k);
      ds.samples.push_back({std::move(sid), static_cast<std::int64_t>(id),
                            static_cast<std::int64_t>(image_rng.uniform_index(config.num_cameras))});
    }
  }
  return ds;
}

void write_manifest(std::ostream& out, const std::vector<ManifestEntry>& entries) {
  for (const auto& e : entries) {
    out << e.meta.sample_id << '\t' << e.meta.identity << '\t' << e.meta.camera << '\t' << e.tensor_path << '\n';
  }
}

std::vector<ManifestEntry> read_manifest(std::istream& in) {
  LineReader reader(in);
  std::string line;
  std::vector<ManifestEntry> entries;
  while (reader.next(line)) {
    if (trim(line).empty()) continue;
    const auto fields = split(line, '\t');
    if (fields.size() != 4) {
      throw DataError("manifest rows need 4 tab-separated fields, found " + std::to_string(fields.size()),
                      reader.line_number());
    }
    if (fields[0].empty() || fields[3].empty()) throw DataError("empty sample id or path", reader.line_number());
    entries.push_back({{std::string(fields[0]), parse_int(fields[1], reader.line_number()),
                        parse_int(fields[2], reader.line_number())},
                       std::string(fields[3])});
  }
  return entries;
}

Dataset load_manifest_dataset(const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw DataError("cannot open manifest '" + manifest.string() + "'");
  std::vector<ManifestEntry> entries;
  try {
    entries = read_manifest(in);
  } catch (const DataError& e) {
    throw DataError::prefixed(e, manifest.string());
  }
  if (entries.empty()) throw DataError(manifest.string() + ": manifest lists no samples");

  const auto base = manifest.parent_path();
  Dataset ds;
  std::vector<double> values;
  Shape4 sample_shape;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    std::filesystem::path p(entries[i].tensor_path);
    if (p.is_relative()) p = base / p;
    const Tensor4 t = load_tensor(p);
    if (t.shape().n != 1) throw DataError(p.string() + ": expected a single image (N = 1)");
    if (i == 0) {
      sample_shape = t.shape();
    } else if (!(t.shape() == sample_shape)) {
      throw DataError(p.string() + ": shape " + t.shape().str() + " differs from " + sample_shape.str());
    }
    values.insert(values.end(), t.data().begin(), t.data().end());
    ds.samples.push_back(entries[i].meta);
  }
  ds.images = Tensor4({entries.size(), sample_shape.c, sample_shape.h, sample_shape.w}, std::move(values));
  ds.validate();
  return ds;
}

std::filesystem::path save_dataset(const Dataset& dataset, const std::filesystem::path& directory) {
  dataset.validate();
  std::filesystem::create_directories(directory);
  std::vector<ManifestEntry> entries;
  const Shape4& s = dataset.images.shape();
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const std::string file = dataset.samples[i].sample_id + ".tensor";
    const auto src = dataset.images.sample(i);
    save_tensor(directory / file, Tensor4({1, s.c, s.h, s.w}, std::vector<double>(src.begin(), src.end())));
    entries.push_back({dataset.samples[i], file});
  }
  const auto manifest = directory / "manifest.tsv";
  std::ofstream out(manifest);
  if (!out) throw DataError("cannot write '" + manifest.string() + "'");
  write_manifest(out, entries);
  return manifest;
}

}  // namespace glamor
