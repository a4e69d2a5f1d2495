#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "curio/parallel.hpp"
#include "curio/statkit.hpp"

namespace curio {

struct ClusterModel {
  int k = 0;
  std::vector<int> ids;                         // stable ids, survive merging
  std::vector<std::vector<double>> centroids;   // parallel to ids
  std::vector<int> assignment;                  // row -> cluster id
  double inertia = 0.0;
  std::uint64_t seed = 0;
  int restart = 0;  // winning restart index
  std::vector<std::string> feature_names;

  std::size_t index_of(int id) const {
    for (std::size_t i = 0; i < ids.size(); ++i)
      if (ids[i] == id) return i;
    throw std::invalid_argument("unknown cluster id " + std::to_string(id));
  }
};

struct KMeansParams {
  int k = 2;
  std::size_t batch_size = 1024;
  int max_batches = 200;
  int restarts = 10;
  std::uint64_t seed = 0;
};

namespace clusterdetail {

inline double sq_dist(const FeatureMatrix& data, std::size_t row,
                      const std::vector<double>& c) {
  double s = 0.0;
  for (std::size_t d = 0; d < c.size(); ++d) {
    const double diff = data.at(row, d) - c[d];
    s += diff * diff;
  }
  return s;
}

inline std::size_t nearest(const FeatureMatrix& data, std::size_t row,
                           const std::vector<std::vector<double>>& centroids) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.size(); ++c) {
    const double d = sq_dist(data, row, centroids[c]);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

// mt19937_64-backed samplers with pinned arithmetic, so models are
// reproducible across standard libraries.
inline double canonical(std::mt19937_64& rng) {
  return double(rng() >> 11) * 0x1.0p-53;
}

inline std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
  return std::size_t(canonical(rng) * double(n)) % n;
}

struct SingleRun {
  std::vector<std::vector<double>> centroids;
  std::vector<int> assignment;  // centroid indices
  double inertia = 0.0;
};

inline SingleRun kmeans_single(const FeatureMatrix& data, int k,
                               std::size_t batch_size, int max_batches,
                               std::mt19937_64 rng) {
  const std::size_t n = data.rows, dims = data.cols();
  SingleRun run;

  // k-means++ seeding
  run.centroids.reserve(k);
  {
    std::vector<double> row(dims);
    std::size_t first = uniform_index(rng, n);
    for (std::size_t d = 0; d < dims; ++d) row[d] = data.at(first, d);
    run.centroids.push_back(row);
    std::vector<double> d2(n);
    for (std::size_t i = 0; i < n; ++i) d2[i] = sq_dist(data, i, run.centroids[0]);
    while (int(run.centroids.size()) < k) {
      double total = 0.0;
      for (double v : d2) total += v;
      std::size_t chosen;
      if (total <= 0.0) {
        chosen = uniform_index(rng, n);
      } else {
        double r = canonical(rng) * total;
        chosen = n - 1;
        for (std::size_t i = 0; i < n; ++i) {
          r -= d2[i];
          if (r <= 0.0) {
            chosen = i;
            break;
          }
        }
      }
      for (std::size_t d = 0; d < dims; ++d) row[d] = data.at(chosen, d);
      run.centroids.push_back(row);
      for (std::size_t i = 0; i < n; ++i)
        d2[i] = std::min(d2[i], sq_dist(data, i, run.centroids.back()));
    }
  }

  // Mini-batch updates with per-centroid learning rate 1/count.
  std::vector<std::int64_t> counts(k, 0);
  for (int b = 0; b < max_batches; ++b) {
    for (std::size_t s = 0; s < batch_size; ++s) {
      const std::size_t i = uniform_index(rng, n);
      const std::size_t c = nearest(data, i, run.centroids);
      ++counts[c];
      const double eta = 1.0 / double(counts[c]);
      auto& cen = run.centroids[c];
      for (std::size_t d = 0; d < dims; ++d)
        cen[d] += eta * (data.at(i, d) - cen[d]);
    }
  }

  // Full assignment, exact mean refinement, final assignment.
  run.assignment.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) run.assignment[i] = int(nearest(data, i, run.centroids));
  std::vector<std::vector<double>> means(k, std::vector<double>(dims, 0.0));
  std::vector<std::int64_t> sizes(k, 0);
  for (std::size_t i = 0; i < n; ++i) {
    auto& m = means[run.assignment[i]];
    ++sizes[run.assignment[i]];
    for (std::size_t d = 0; d < dims; ++d) m[d] += data.at(i, d);
  }
  for (int c = 0; c < k; ++c) {
    if (sizes[c] == 0) continue;  // empty cluster keeps its centroid
    for (std::size_t d = 0; d < dims; ++d)
      run.centroids[c][d] = means[c][d] / double(sizes[c]);
  }
  run.inertia = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = nearest(data, i, run.centroids);
    run.assignment[i] = int(c);
    run.inertia += sq_dist(data, i, run.centroids[c]);
  }
  return run;
}

inline std::size_t count_distinct_rows(const FeatureMatrix& data, std::size_t cap) {
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < data.rows && seen.size() < cap; ++i) {
    std::string key(reinterpret_cast<const char*>(&data.data[i * data.cols()]),
                    data.cols() * sizeof(double));
    seen.insert(std::move(key));
  }
  return seen.size();
}

inline std::mt19937_64 restart_rng(std::uint64_t seed, int restart) {
  return std::mt19937_64(seed + std::uint64_t(restart));
}

}  // namespace clusterdetail

// Best-of-restarts mini-batch k-means. Restarts are seeded seed + index and
// may run in parallel; the winner (lowest inertia, ties to the lower index)
// is identical either way.
inline ClusterModel minibatch_kmeans(const FeatureMatrix& data, const KMeansParams& p,
                                     int threads = 1) {
  if (p.k < 1) throw std::invalid_argument("k must be >= 1");
  if (data.rows == 0) throw std::invalid_argument("no data points");
  if (std::size_t(p.k) > data.rows) throw std::invalid_argument("k exceeds point count");
  if (clusterdetail::count_distinct_rows(data, std::size_t(p.k)) < std::size_t(p.k))
    throw std::invalid_argument("k exceeds number of distinct points");

  std::vector<clusterdetail::SingleRun> runs(p.restarts);
  parallel_for(std::size_t(p.restarts), threads, [&](std::size_t r) {
    runs[r] = clusterdetail::kmeans_single(data, p.k, p.batch_size, p.max_batches,
                                           clusterdetail::restart_rng(p.seed, int(r)));
  });
  std::size_t best = 0;
  for (std::size_t r = 1; r < runs.size(); ++r)
    if (runs[r].inertia < runs[best].inertia) best = r;

  ClusterModel model;
  model.k = p.k;
  model.ids.resize(p.k);
  for (int c = 0; c < p.k; ++c) model.ids[c] = c;
  model.centroids = std::move(runs[best].centroids);
  model.assignment.resize(data.rows);
  for (std::size_t i = 0; i < data.rows; ++i)
    model.assignment[i] = model.ids[runs[best].assignment[i]];
  model.inertia = runs[best].inertia;
  model.seed = p.seed;
  model.restart = int(best);
  model.feature_names = data.names;
  return model;
}

struct SelectKResult {
  int chosen_k = 0;
  std::vector<std::pair<int, double>> curve;  // (k, avg inertia over restarts)
};

// Average inertia across restarts per candidate k, elbow on the curve. The
// averaged curve is clamped to non-increasing (running minimum) before the
// elbow so its precondition always holds; the raw averages are returned.
inline SelectKResult select_k(const FeatureMatrix& data, const std::vector<int>& k_range,
                              const KMeansParams& base, int threads = 1) {
  if (k_range.size() < 3)
    throw std::invalid_argument("select_k needs >= 3 candidate values of k");
  SelectKResult out;
  out.curve.resize(k_range.size());

  std::vector<std::vector<double>> inertias(k_range.size(),
                                            std::vector<double>(base.restarts, 0.0));
  parallel_for(k_range.size() * std::size_t(base.restarts), threads, [&](std::size_t j) {
    const std::size_t ki = j / std::size_t(base.restarts);
    const int r = int(j % std::size_t(base.restarts));
    auto run = clusterdetail::kmeans_single(data, k_range[ki], base.batch_size,
                                            base.max_batches,
                                            clusterdetail::restart_rng(base.seed, r));
    inertias[ki][r] = run.inertia;
  });
  for (std::size_t ki = 0; ki < k_range.size(); ++ki) {
    double avg = 0.0;
    for (double v : inertias[ki]) avg += v;
    out.curve[ki] = {k_range[ki], avg / double(base.restarts)};
  }

  auto clamped = out.curve;
  for (std::size_t i = 1; i < clamped.size(); ++i)
    clamped[i].second = std::min(clamped[i].second, clamped[i - 1].second);
  out.chosen_k = elbow(clamped);
  return out;
}

struct MergePolicy {
  enum class Kind { automatic, explicit_pair } kind = Kind::automatic;
  int pair_a = -1;
  int pair_b = -1;
  double median_gap_tau = 0.5;  // max per-metric median gap, z units
};

struct MergeOutcome {
  ClusterModel model;
  bool merged = false;
  int merged_a = -1;
  int merged_b = -1;
  std::string note;
};

namespace clusterdetail {

inline std::vector<double> cluster_medians(const FeatureMatrix& data,
                                           const std::vector<int>& assignment, int id) {
  const std::size_t dims = data.cols();
  std::vector<std::vector<double>> vals(dims);
  for (std::size_t i = 0; i < data.rows; ++i) {
    if (assignment[i] != id) continue;
    for (std::size_t d = 0; d < dims; ++d) vals[d].push_back(data.at(i, d));
  }
  std::vector<double> med(dims, 0.0);
  for (std::size_t d = 0; d < dims; ++d) {
    auto& v = vals[d];
    if (v.empty()) continue;
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    med[d] = n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  }
  return med;
}

}  // namespace clusterdetail

// Folds two clusters into one (the smaller id survives). Under the automatic
// policy the merged pair is the closest centroid pair whose per-metric median
// gap stays within tau; if no pair qualifies the model is returned unchanged.
inline MergeOutcome merge_clusters(const ClusterModel& model, const FeatureMatrix& data,
                                   const MergePolicy& policy) {
  if (model.k < 2) throw std::invalid_argument("merge needs k >= 2");
  MergeOutcome out;
  out.model = model;

  int a = -1, b = -1;
  if (policy.kind == MergePolicy::Kind::explicit_pair) {
    model.index_of(policy.pair_a);
    model.index_of(policy.pair_b);
    if (policy.pair_a == policy.pair_b)
      throw std::invalid_argument("merge pair must be distinct");
    a = std::min(policy.pair_a, policy.pair_b);
    b = std::max(policy.pair_a, policy.pair_b);
  } else {
    double best_dist = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < model.ids.size(); ++i) {
      const auto med_i = clusterdetail::cluster_medians(data, model.assignment, model.ids[i]);
      for (std::size_t j = i + 1; j < model.ids.size(); ++j) {
        const auto med_j =
            clusterdetail::cluster_medians(data, model.assignment, model.ids[j]);
        double max_gap = 0.0;
        for (std::size_t d = 0; d < med_i.size(); ++d)
          max_gap = std::max(max_gap, std::abs(med_i[d] - med_j[d]));
        if (max_gap > policy.median_gap_tau) continue;
        double dist = 0.0;
        for (std::size_t d = 0; d < model.centroids[i].size(); ++d) {
          const double diff = model.centroids[i][d] - model.centroids[j][d];
          dist += diff * diff;
        }
        if (dist < best_dist) {
          best_dist = dist;
          a = model.ids[i];
          b = model.ids[j];
        }
      }
    }
    if (a < 0) {
      out.note = "no cluster pair within median gap tolerance; model unchanged";
      return out;
    }
  }

  const std::size_t ia = model.index_of(a), ib = model.index_of(b);
  std::int64_t ca = 0, cb = 0;
  for (int id : model.assignment) {
    if (id == a) ++ca;
    if (id == b) ++cb;
  }
  std::vector<double> merged_centroid(model.centroids[ia].size(), 0.0);
  const double total = double(ca + cb);
  for (std::size_t d = 0; d < merged_centroid.size(); ++d)
    merged_centroid[d] = total > 0
                             ? (model.centroids[ia][d] * double(ca) +
                                model.centroids[ib][d] * double(cb)) /
                                   total
                             : 0.5 * (model.centroids[ia][d] + model.centroids[ib][d]);

  auto& m = out.model;
  m.centroids[ia] = merged_centroid;
  m.centroids.erase(m.centroids.begin() + ib);
  m.ids.erase(m.ids.begin() + ib);
  m.k -= 1;
  for (auto& id : m.assignment)
    if (id == b) id = a;
  m.inertia = 0.0;
  for (std::size_t i = 0; i < data.rows; ++i)
    m.inertia += clusterdetail::sq_dist(data, i, m.centroids[m.index_of(m.assignment[i])]);
  out.merged = true;
  out.merged_a = a;
  out.merged_b = b;
  return out;
}

}  // namespace curio
