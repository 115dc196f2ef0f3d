#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "glamor/dataset.hpp"
#include "glamor/matrix.hpp"

namespace glamor {

/// Feature vectors (one row per sample) with their metadata.
struct EmbeddingSet {
  Matrix vectors;
  std::vector<SampleMeta> samples;

  std::size_t size() const noexcept { return samples.size(); }
  std::size_t dim() const noexcept { return vectors.cols(); }
  /// Throws DataError on row/metadata count mismatch or repeated sample ids.
  void validate() const;
};

enum class Protocol {
  plain,
  /// drop gallery entries that share both identity and camera with the query
  veri,
};

std::string_view to_string(Protocol protocol) noexcept;
Protocol parse_protocol(std::string_view text);

struct QueryResult {
  double average_precision = 0.0;
  /// 1-based rank of the first correct match; 0 when there is none.
  std::size_t first_hit = 0;
  std::size_t num_positives = 0;
  /// false when filtering left no positives; such queries are not in the mAP.
  bool valid = false;
};

struct RankingReport {
  std::vector<QueryResult> queries;
  double mean_ap = 0.0;
  /// cmc[k] = fraction of valid queries with a correct match in the top k;
  /// cmc[0] is 0 and the last index is the gallery size.
  std::vector<double> cmc;
  std::size_t num_valid_queries = 0;
  std::size_t num_dropped_queries = 0;

  /// cmc[k], clamped to the gallery size.
  double rank(std::size_t k) const noexcept;
};

/// Ranks each query's gallery by ascending Euclidean distance (ties broken by
/// gallery index) and scores non-interpolated AP and CMC.
RankingReport rank(const EmbeddingSet& query, const EmbeddingSet& gallery, Protocol protocol);

/// Same scoring from a precomputed query x gallery distance matrix.
RankingReport rank_from_distances(const Matrix& distances, std::span<const SampleMeta> query,
                                  std::span<const SampleMeta> gallery, Protocol protocol);

/// Aligned table followed by `map=... rank1=... rank5=...` and a query-count line.
std::string format_report(const RankingReport& report);

// Embedding file:
//   #reid-embeddings v1 dim=D
//   sample_id<TAB>identity<TAB>camera<TAB>v1 v2 ... vD

void write_embeddings(std::ostream& out, const EmbeddingSet& set);
EmbeddingSet read_embeddings(std::istream& in);
void save_embeddings(const std::filesystem::path& path, const EmbeddingSet& set);
EmbeddingSet load_embeddings(const std::filesystem::path& path);

}  // namespace glamor
