#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "glamor/tensor.hpp"

namespace glamor {

/// Per-sample metadata shared by datasets, manifests and embedding files.
struct SampleMeta {
  std::string sample_id;
  std::int64_t identity = 0;
  std::int64_t camera = 0;

  friend bool operator==(const SampleMeta&, const SampleMeta&) = default;
};

/// Images stacked along the batch axis, one metadata record per image.
struct Dataset {
  Tensor4 images;
  std::vector<SampleMeta> samples;

  std::size_t size() const noexcept { return samples.size(); }
  std::vector<std::int64_t> identities() const;
  /// Throws DataError when image count and metadata disagree or sample ids repeat.
  void validate() const;
};

struct SyntheticConfig {
  std::size_t num_identities = 10;
  std::size_t images_per_identity = 20;
  std::size_t image_size = 16;
  std::size_t channels = 3;
  std::size_t num_cameras = 4;
  std::uint64_t seed = 0;
};

/// Procedural stand-in for a vehicle re-id set. Each identity is a coloured
/// ellipse with its own binary motif; instances vary by translation, scale,
/// brightness, motif placement, occluding rectangles, background and pixel noise.
/// Identity labels are 0..num_identities-1 and cameras are drawn per image.
Dataset make_synthetic_dataset(const SyntheticConfig& config);

// Manifest format, one line per sample:
//   sample_id<TAB>identity<TAB>camera<TAB>tensor_file_path
// Relative tensor paths are resolved against the manifest's directory.

struct ManifestEntry {
  SampleMeta meta;
  std::string tensor_path;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

void write_manifest(std::ostream& out, const std::vector<ManifestEntry>& entries);
std::vector<ManifestEntry> read_manifest(std::istream& in);

/// Loads every tensor listed in the manifest (each 1 x C x H x W).
Dataset load_manifest_dataset(const std::filesystem::path& manifest);

/// Writes one tensor file per sample into `directory` plus `manifest.tsv`.
/// Returns the manifest path.
std::filesystem::path save_dataset(const Dataset& dataset, const std::filesystem::path& directory);

}  // namespace glamor
