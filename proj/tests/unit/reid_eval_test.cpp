#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "glamor/errors.hpp"
#include "glamor/random.hpp"
#include "glamor/reid_eval.hpp"
#include "glamor/testing/oracles.hpp"
#include "test_util.hpp"

namespace glamor {
namespace {

EmbeddingSet make_set(std::vector<std::vector<double>> rows, std::vector<std::int64_t> ids,
                      std::vector<std::int64_t> cams, const std::string& prefix) {
  EmbeddingSet s;
  s.vectors = Matrix(rows.size(), rows.empty() ? 0 : rows[0].size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) s.vectors(r, c) = rows[r][c];
    s.samples.push_back({prefix + std::to_string(r), ids[r], cams[r]});
  }
  return s;
}

EmbeddingSet random_set(Rng& rng, std::size_t n, std::size_t dim, std::size_t ids, std::size_t cams,
                        const std::string& prefix) {
  EmbeddingSet s;
  s.vectors = test::random_matrix(n, dim, rng);
  for (std::size_t i = 0; i < n; ++i) {
    s.samples.push_back({prefix + std::to_string(i), static_cast<std::int64_t>(rng.uniform_index(ids)),
                         static_cast<std::int64_t>(rng.uniform_index(cams))});
  }
  return s;
}

TEST(Rank, PerfectRetrieval) {
  const auto q = make_set({{0, 0}}, {1}, {0}, "q");
  const auto g = make_set({{0.1, 0}, {5, 5}, {6, 6}}, {1, 2, 3}, {1, 1, 1}, "g");
  const auto r = rank(q, g, Protocol::veri);
  EXPECT_EQ(r.mean_ap, 1.0);
  EXPECT_EQ(r.rank(1), 1.0);
  EXPECT_EQ(r.queries[0].first_hit, 1u);
}

TEST(Rank, HitsAtOneAndThree) {
  const auto q = make_set({{0}}, {7}, {0}, "q");
  const auto g = make_set({{1}, {2}, {3}, {4}}, {7, 8, 7, 9}, {1, 1, 1, 1}, "g");
  const auto r = rank(q, g, Protocol::plain);
  EXPECT_NEAR(r.mean_ap, 5.0 / 6.0, 1e-15);
  const std::string text = format_report(r);
  EXPECT_NE(text.find("map=0.833333 rank1=1.000000"), std::string::npos);
}

TEST(Rank, VeriDropsSameCameraTwin) {
  const auto q = make_set({{0}}, {7}, {2}, "q");
  // twin at distance 0 on the query's camera, true match at rank 3 once it is gone
  const auto g = make_set({{0}, {1}, {2}, {3}}, {7, 8, 9, 7}, {2, 1, 1, 0}, "g");
  const auto veri = rank(q, g, Protocol::veri);
  EXPECT_NEAR(veri.mean_ap, 1.0 / 3.0, 1e-15);
  EXPECT_EQ(veri.queries[0].first_hit, 3u);
  const auto plain = rank(q, g, Protocol::plain);
  EXPECT_EQ(plain.queries[0].first_hit, 1u);
}

TEST(Rank, QueryWithoutPositivesIsDropped) {
  const auto q = make_set({{0}, {1}}, {7, 8}, {0, 0}, "q");
  const auto g = make_set({{0}, {2}}, {7, 7}, {0, 1}, "g");
  const auto r = rank(q, g, Protocol::veri);
  EXPECT_EQ(r.num_valid_queries, 1u);
  EXPECT_EQ(r.num_dropped_queries, 1u);
  EXPECT_FALSE(r.queries[1].valid);
}

TEST(Rank, MatchesNaiveOracleLarge) {
  Rng rng(1);
  const auto q = random_set(rng, 200, 8, 30, 4, "q");
  const auto g = random_set(rng, 1000, 8, 30, 4, "g");
  for (Protocol p : {Protocol::plain, Protocol::veri}) {
    const auto r = rank(q, g, p);
    const auto n = testing::rank_naive(distance_matrix(q.vectors, g.vectors), q.samples, g.samples, p);
    EXPECT_NEAR(r.mean_ap, n.mean_ap, 1e-12);
    EXPECT_EQ(r.num_valid_queries, n.valid);
    ASSERT_EQ(r.cmc.size(), n.cmc.size());
    for (std::size_t k = 0; k < r.cmc.size(); ++k) EXPECT_NEAR(r.cmc[k], n.cmc[k], 1e-12);
  }
}

TEST(Rank, CmcPropertiesAndTopPositives) {
  Rng rng(2);
  const auto q = random_set(rng, 30, 4, 5, 3, "q");
  const auto g = random_set(rng, 80, 4, 5, 3, "g");
  const auto r = rank(q, g, Protocol::veri);
  EXPECT_LE(r.mean_ap, 1.0);
  EXPECT_EQ(r.rank(1), r.cmc[1]);
  for (std::size_t k = 1; k < r.cmc.size(); ++k) {
    EXPECT_GE(r.cmc[k], r.cmc[k - 1]);
    EXPECT_LE(r.cmc[k], 1.0);
  }
  // positives occupy the top ranks -> AP 1
  const auto q2 = make_set({{0}}, {1}, {0}, "q");
  const auto g2 = make_set({{1}, {1.5}, {2}, {9}}, {1, 1, 1, 2}, {1, 1, 1, 1}, "g");
  EXPECT_EQ(rank(q2, g2, Protocol::veri).mean_ap, 1.0);
}

TEST(Rank, RigidMotionAndMonotoneInvariance) {
  Rng rng(3);
  auto q = random_set(rng, 20, 2, 4, 2, "q");
  auto g = random_set(rng, 50, 2, 4, 2, "g");
  const auto base = rank(q, g, Protocol::veri);
  const double th = 0.7;
  auto move = [&](EmbeddingSet& s) {
    for (std::size_t r = 0; r < s.size(); ++r) {
      const double x = s.vectors(r, 0), y = s.vectors(r, 1);
      s.vectors(r, 0) = std::cos(th) * x - std::sin(th) * y + 4.0;
      s.vectors(r, 1) = std::sin(th) * x + std::cos(th) * y - 2.0;
    }
  };
  move(q);
  move(g);
  EXPECT_NEAR(rank(q, g, Protocol::veri).mean_ap, base.mean_ap, 1e-10);

  Matrix d = distance_matrix(q.vectors, g.vectors);
  const auto r1 = rank_from_distances(d, q.samples, g.samples, Protocol::veri);
  for (double& v : d.data()) v = std::exp(v) + v * v * v;
  const auto r2 = rank_from_distances(d, q.samples, g.samples, Protocol::veri);
  EXPECT_EQ(r1.mean_ap, r2.mean_ap);
  EXPECT_EQ(r1.cmc, r2.cmc);
}

TEST(Rank, TiesBrokenByGalleryIndex) {
  const auto q = make_set({{0}}, {1}, {0}, "q");
  const auto g = make_set({{1}, {-1}}, {2, 1}, {1, 1}, "g");
  // equal distances: the negative at index 0 ranks first
  const auto r = rank(q, g, Protocol::plain);
  EXPECT_EQ(r.queries[0].first_hit, 2u);
  EXPECT_EQ(r.mean_ap, 0.5);
}

TEST(Rank, DimensionMismatch) {
  const auto q = make_set({{0, 0}}, {1}, {0}, "q");
  const auto g = make_set({{0}}, {1}, {1}, "g");
  EXPECT_THROW(rank(q, g, Protocol::plain), ShapeError);
  EXPECT_THROW(parse_protocol("market"), ConfigError);
}

TEST(EmbeddingFile, RoundTripAndErrors) {
  Rng rng(4);
  auto s = random_set(rng, 5, 3, 3, 2, "img_");
  s.vectors(0, 0) = -0.0;
  s.vectors(1, 1) = 1e-310;
  std::ostringstream a;
  write_embeddings(a, s);
  EXPECT_EQ(a.str().rfind("#reid-embeddings v1 dim=3\nimg_0\t", 0), 0u);
  std::istringstream in(a.str());
  const auto back = read_embeddings(in);
  std::ostringstream b;
  write_embeddings(b, back);
  EXPECT_EQ(a.str(), b.str());
  EXPECT_EQ(back.samples, s.samples);

  std::istringstream bad("#reid-embeddings v1 dim=2\na\t1\t0\t1 2\nb\t1\t0\t1\n");
  try {
    read_embeddings(bad);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  std::istringstream dup("#reid-embeddings v1 dim=1\na\t1\t0\t1\na\t1\t0\t2\n");
  EXPECT_THROW(read_embeddings(dup), DataError);
}

}  // namespace
}  // namespace glamor
