#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "curio/cluster.hpp"
#include "oracle.hpp"

using namespace curio;

namespace {

double canon(std::mt19937_64& rng) { return double(rng() >> 11) * 0x1.0p-53; }

double gauss(std::mt19937_64& rng) {
  double u1 = std::max(canon(rng), 1e-300), u2 = canon(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

// `centers[c]` gets `per_blob` points with isotropic unit-ish noise.
struct Blobs {
  FeatureMatrix data;
  std::vector<int> truth;
};

Blobs make_blobs(const std::vector<std::vector<double>>& centers, std::size_t per_blob,
                 double sigma, std::uint64_t seed) {
  Blobs b;
  const std::size_t dims = centers[0].size();
  for (std::size_t d = 0; d < dims; ++d) b.data.names.push_back("f" + std::to_string(d));
  b.data.rows = centers.size() * per_blob;
  b.data.data.resize(b.data.rows * dims);
  std::mt19937_64 rng(seed);
  std::size_t row = 0;
  for (std::size_t c = 0; c < centers.size(); ++c) {
    for (std::size_t i = 0; i < per_blob; ++i, ++row) {
      for (std::size_t d = 0; d < dims; ++d)
        b.data.at(row, d) = centers[c][d] + sigma * gauss(rng);
      b.truth.push_back(int(c));
    }
  }
  return b;
}

}  // namespace

TEST_CASE("k = 1 gives the exact mean and total variance") {
  std::mt19937_64 rng(3);
  FeatureMatrix data;
  data.names = {"x", "y"};
  data.rows = 200;
  data.data.resize(400);
  for (std::size_t i = 0; i < data.rows; ++i) {
    data.at(i, 0) = gauss(rng) * 2.0 + 1.0;
    data.at(i, 1) = gauss(rng);
  }
  KMeansParams p;
  p.k = 1;
  p.restarts = 2;
  auto model = minibatch_kmeans(data, p);
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < data.rows; ++i) {
    mx += data.at(i, 0);
    my += data.at(i, 1);
  }
  mx /= double(data.rows);
  my /= double(data.rows);
  CHECK(model.centroids[0][0] == doctest::Approx(mx).epsilon(1e-9));
  CHECK(model.centroids[0][1] == doctest::Approx(my).epsilon(1e-9));
  double var = 0;
  for (std::size_t i = 0; i < data.rows; ++i) {
    var += (data.at(i, 0) - mx) * (data.at(i, 0) - mx);
    var += (data.at(i, 1) - my) * (data.at(i, 1) - my);
  }
  CHECK(model.inertia == doctest::Approx(var).epsilon(1e-9));
}

TEST_CASE("two well-separated blobs are recovered across 20 seeds") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto blobs = make_blobs({{0, 0, 0}, {10, 10, 10}}, 150, 1.0, 100 + seed);
    KMeansParams p;
    p.k = 2;
    p.restarts = 5;
    p.seed = seed;
    auto model = minibatch_kmeans(blobs.data, p);
    CHECK(oracle::adjusted_rand_index(model.assignment, blobs.truth) >= 0.99);
  }
}

TEST_CASE("same seed, same model; parallel restarts match serial") {
  auto blobs = make_blobs({{0, 0}, {6, 6}, {-6, 6}}, 120, 1.0, 7);
  KMeansParams p;
  p.k = 3;
  p.seed = 42;
  auto a = minibatch_kmeans(blobs.data, p, 1);
  auto b = minibatch_kmeans(blobs.data, p, 1);
  auto c = minibatch_kmeans(blobs.data, p, 4);
  CHECK(a.centroids == b.centroids);
  CHECK(a.assignment == b.assignment);
  CHECK(a.inertia == b.inertia);
  CHECK(a.centroids == c.centroids);
  CHECK(a.assignment == c.assignment);
  CHECK(a.restart == c.restart);
}

TEST_CASE("k above the distinct point count is rejected") {
  FeatureMatrix data;
  data.names = {"x"};
  data.rows = 10;
  data.data.assign(10, 5.0);  // one distinct point
  data.at(3, 0) = 7.0;        // two distinct points
  KMeansParams p;
  p.k = 3;
  CHECK_THROWS_AS(minibatch_kmeans(data, p), std::invalid_argument);
  p.k = 2;
  CHECK_NOTHROW(minibatch_kmeans(data, p));
}

TEST_CASE("after the final assignment pass no single reassignment helps") {
  auto blobs = make_blobs({{0, 0}, {4, 4}}, 100, 1.2, 11);
  KMeansParams p;
  p.k = 2;
  p.seed = 3;
  auto model = minibatch_kmeans(blobs.data, p);
  for (std::size_t i = 0; i < blobs.data.rows; ++i) {
    const auto assigned = model.index_of(model.assignment[i]);
    const double mine = clusterdetail::sq_dist(blobs.data, i, model.centroids[assigned]);
    for (std::size_t c = 0; c < model.centroids.size(); ++c)
      CHECK(mine <= clusterdetail::sq_dist(blobs.data, i, model.centroids[c]) + 1e-12);
  }
}

TEST_CASE("select_k finds three planted blobs and a non-increasing curve") {
  auto blobs = make_blobs({{0, 0, 0, 0}, {8, 8, 0, 0}, {0, 8, 8, 0}}, 200, 1.0, 19);
  KMeansParams p;
  p.restarts = 5;
  p.seed = 9;
  auto sel = select_k(blobs.data, {2, 3, 4, 5, 6}, p);
  CHECK(sel.chosen_k == 3);
  for (std::size_t i = 1; i < sel.curve.size(); ++i)
    CHECK(sel.curve[i].second <= sel.curve[i - 1].second * 1.02);
}

TEST_CASE("merge: explicit pair unions events under the smaller id") {
  auto blobs = make_blobs({{0, 0}, {5, 5}, {10, 10}}, 50, 0.5, 23);
  KMeansParams p;
  p.k = 3;
  p.seed = 1;
  auto model = minibatch_kmeans(blobs.data, p);
  std::int64_t before = std::int64_t(model.assignment.size());
  MergePolicy policy;
  policy.kind = MergePolicy::Kind::explicit_pair;
  policy.pair_a = 2;
  policy.pair_b = 1;
  auto out = merge_clusters(model, blobs.data, policy);
  CHECK(out.merged);
  CHECK(out.model.k == 2);
  CHECK(out.model.ids.size() == 2);
  CHECK(std::int64_t(out.model.assignment.size()) == before);
  for (int id : out.model.assignment) CHECK(id != 2);  // 2 merged into 1

  // Weighted centroid: counts of 1 and 2 weight the means.
  std::int64_t c1 = 0, c2 = 0;
  std::vector<double> sum(2, 0.0);
  for (std::size_t i = 0; i < blobs.data.rows; ++i) {
    if (model.assignment[i] == 1) ++c1;
    if (model.assignment[i] == 2) ++c2;
    if (model.assignment[i] == 1 || model.assignment[i] == 2)
      for (int d = 0; d < 2; ++d) sum[d] += blobs.data.at(i, d);
  }
  const auto merged_idx = out.model.index_of(1);
  const auto& old1 = model.centroids[model.index_of(1)];
  const auto& old2 = model.centroids[model.index_of(2)];
  for (int d = 0; d < 2; ++d) {
    const double expect = (old1[d] * double(c1) + old2[d] * double(c2)) / double(c1 + c2);
    CHECK(out.model.centroids[merged_idx][d] == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("merge: identical centroids merge automatically, far ones do not") {
  // Two tight blobs at the same spot, one far away with a big median gap.
  auto blobs = make_blobs({{0, 0}, {0.05, 0.05}, {30, 30}}, 60, 0.3, 29);
  KMeansParams p;
  p.k = 3;
  p.seed = 5;
  auto model = minibatch_kmeans(blobs.data, p);
  MergePolicy policy;  // automatic, default tau
  auto out = merge_clusters(model, blobs.data, policy);
  CHECK(out.merged);
  CHECK(out.model.k == 2);

  auto blobs_far = make_blobs({{0, 0}, {15, 0}, {30, 30}}, 60, 0.3, 31);
  auto far_model = minibatch_kmeans(blobs_far.data, p);
  auto far_out = merge_clusters(far_model, blobs_far.data, policy);
  CHECK_FALSE(far_out.merged);
  CHECK(far_out.model.k == 3);
  CHECK_FALSE(far_out.note.empty());
}

TEST_CASE("merge preserves event count and never raises k") {
  auto blobs = make_blobs({{0, 0}, {1, 1}, {9, 9}}, 40, 0.8, 37);
  KMeansParams p;
  p.k = 3;
  p.seed = 2;
  auto model = minibatch_kmeans(blobs.data, p);
  auto out = merge_clusters(model, blobs.data, MergePolicy{});
  CHECK(out.model.assignment.size() == model.assignment.size());
  CHECK(out.model.k <= model.k);
}
