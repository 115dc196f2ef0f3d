#include "glamor/reid_eval.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

#include "glamor/errors.hpp"
#include "glamor/losses.hpp"
#include "glamor/parallel.hpp"
#include "glamor/text_format.hpp"

namespace glamor {

void EmbeddingSet::validate() const {
  if (vectors.rows() != samples.size()) {
    throw DataError("embedding set has " + std::to_string(vectors.rows()) + " vectors but " +
                    std::to_string(samples.size()) + " metadata records");
  }
  std::set<std::string> seen;
  for (const auto& s : samples) {
    if (!seen.insert(s.sample_id).second) throw DataError("duplicate sample id '" + s.sample_id + "'");
  }
}

std::string_view to_string(Protocol protocol) noexcept {
  return protocol == Protocol::veri ? "veri" : "plain";
}

Protocol parse_protocol(std::string_view text) {
  if (text == "plain") return Protocol::plain;
  if (text == "veri") return Protocol::veri;
  throw ConfigError("unknown protocol '" + std::string(text) + "' (expected plain or veri)");
}

double RankingReport::rank(std::size_t k) const noexcept {
  if (cmc.empty()) return 0.0;
  return cmc[std::min(k, cmc.size() - 1)];
}

namespace {

QueryResult score_query(std::span<const double> dist, const SampleMeta& query,
                        std::span<const SampleMeta> gallery, Protocol protocol) {
  std::vector<std::size_t> kept;
  kept.reserve(gallery.size());
  for (std::size_t j = 0; j < gallery.size(); ++j) {
    const bool junk = protocol == Protocol::veri && gallery[j].identity == query.identity &&
                      gallery[j].camera == query.camera;
    if (!junk) kept.push_back(j);
  }
  std::sort(kept.begin(), kept.end(), [&](std::size_t a, std::size_t b) {
    return dist[a] < dist[b] || (dist[a] == dist[b] && a < b);
  });

  QueryResult r;
  double precision_sum = 0.0;
  for (std::size_t pos = 0; pos < kept.size(); ++pos) {
    if (gallery[kept[pos]].identity != query.identity) continue;
    ++r.num_positives;
    if (r.first_hit == 0) r.first_hit = pos + 1;
    precision_sum += static_cast<double>(r.num_positives) / static_cast<double>(pos + 1);
  }
  r.valid = r.num_positives > 0;
  r.average_precision = r.valid ? precision_sum / static_cast<double>(r.num_positives) : 0.0;
  return r;
}

}  // namespace

RankingReport rank_from_distances(const Matrix& distances, std::span<const SampleMeta> query,
                                  std::span<const SampleMeta> gallery, Protocol protocol) {
  if (distances.rows() != query.size() || distances.cols() != gallery.size()) {
    throw ShapeError("rank: distance matrix does not match query/gallery sizes");
  }
  RankingReport report;
  report.queries.resize(query.size());
  parallel_for(query.size(), [&](std::size_t i) {
    report.queries[i] = score_query(distances.row(i), query[i], gallery, protocol);
  });

  std::vector<std::size_t> hits_at(gallery.size() + 1, 0);
  double ap_sum = 0.0;
  for (const auto& q : report.queries) {
    if (!q.valid) {
      ++report.num_dropped_queries;
      continue;
    }
    ++report.num_valid_queries;
    ap_sum += q.average_precision;
    ++hits_at[q.first_hit];
  }
  report.cmc.assign(gallery.size() + 1, 0.0);
  if (report.num_valid_queries > 0) {
    report.mean_ap = ap_sum / static_cast<double>(report.num_valid_queries);
    std::size_t running = 0;
    for (std::size_t k = 1; k <= gallery.size(); ++k) {
      running += hits_at[k];
      report.cmc[k] = static_cast<double>(running) / static_cast<double>(report.num_valid_queries);
    }
  }
  return report;
}

RankingReport rank(const EmbeddingSet& query, const EmbeddingSet& gallery, Protocol protocol) {
  query.validate();
  gallery.validate();
  if (query.dim() != gallery.dim()) {
    throw ShapeError("rank: query dimension " + std::to_string(query.dim()) + " vs gallery dimension " +
                     std::to_string(gallery.dim()));
  }
  return rank_from_distances(distance_matrix(query.vectors, gallery.vectors), query.samples,
                             gallery.samples, protocol);
}

std::string format_report(const RankingReport& report) {
  std::ostringstream out;
  auto row = [&](std::string_view name, const std::string& value) {
    out << name;
    for (std::size_t pad = name.size(); pad < 18; ++pad) out << ' ';
    out << value << '\n';
  };
  row("metric", "value");
  row("mAP", format_fixed(report.mean_ap, 6));
  for (std::size_t k : {1, 5, 10}) row("rank-" + std::to_string(k), format_fixed(report.rank(k), 6));
  row("valid queries", std::to_string(report.num_valid_queries));
  row("dropped queries", std::to_string(report.num_dropped_queries));
  out << "map=" << format_fixed(report.mean_ap, 6) << " rank1=" << format_fixed(report.rank(1), 6)
      << " rank5=" << format_fixed(report.rank(5), 6) << '\n';
  out << "valid_queries=" << report.num_valid_queries << " dropped_queries=" << report.num_dropped_queries
      << '\n';
  return out.str();
}

namespace {
constexpr std::string_view kEmbeddingMagic = "#reid-embeddings";
constexpr std::string_view kDimKey = "dim=";
}  // namespace

void write_embeddings(std::ostream& out, const EmbeddingSet& set) {
  set.validate();
  out << kEmbeddingMagic << " v1 " << kDimKey << set.dim() << '\n';
  for (std::size_t i = 0; i < set.size(); ++i) {
    const auto& m = set.samples[i];
    out << m.sample_id << '\t' << m.identity << '\t' << m.camera << '\t';
    auto v = set.vectors.row(i);
    for (std::size_t k = 0; k < v.size(); ++k) {
      if (k > 0) out << ' ';
      out << format_real(v[k]);
    }
    out << '\n';
  }
}

EmbeddingSet read_embeddings(std::istream& in) {
  LineReader reader(in);
  std::string line;
  if (!reader.next(line)) throw DataError("empty embedding file", 1);
  const auto header = split_whitespace(line);
  if (header.size() != 3 || header[0] != kEmbeddingMagic || header[1] != "v1" ||
      header[2].substr(0, kDimKey.size()) != kDimKey) {
    throw DataError("expected header '#reid-embeddings v1 dim=D'", 1);
  }
  const std::size_t dim = parse_size(header[2].substr(kDimKey.size()), 1);
  if (dim == 0) throw DataError("embedding dimension must be positive", 1);

  std::vector<double> values;
  EmbeddingSet set;
  while (reader.next(line)) {
    if (trim(line).empty()) continue;
    const std::size_t n = reader.line_number();
    const auto fields = split(line, '\t');
    if (fields.size() < 4) throw DataError("expected sample_id, identity, camera and values", n);
    if (fields[0].empty()) throw DataError("empty sample id", n);
    std::size_t count = 0;
    for (std::size_t f = 3; f < fields.size(); ++f) {
      for (auto token : split_whitespace(fields[f])) {
        values.push_back(parse_real(token, n));
        ++count;
      }
    }
    if (count != dim) {
      throw DataError("expected " + std::to_string(dim) + " values, found " + std::to_string(count), n);
    }
    set.samples.push_back({std::string(fields[0]), parse_int(fields[1], n), parse_int(fields[2], n)});
  }
  set.vectors = Matrix(set.samples.size(), dim, std::move(values));
  set.validate();
  return set;
}

void save_embeddings(const std::filesystem::path& path, const EmbeddingSet& set) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  write_embeddings(out, set);
}

EmbeddingSet load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  try {
    return read_embeddings(in);
  } catch (const DataError& e) {
    throw DataError::prefixed(e, path.string());
  }
}

}  // namespace glamor
