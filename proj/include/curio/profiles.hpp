#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "curio/cluster.hpp"
#include "curio/parallel.hpp"
#include "curio/statkit.hpp"
#include "curio/types.hpp"

namespace curio {

// One eligible, non-bot posting event in the retained (z-scored) metric
// space, carrying its cluster assignment. Per-group chronological order is
// preserved from the pipeline.
struct ClusteredEvent {
  std::string group_id;
  std::string message_id;
  std::string user_id;
  std::int64_t ts_ms = 0;
  std::vector<double> z;
  int cluster = -1;
};

struct ClusterProfile {
  int id = -1;
  std::string label;
  std::vector<double> medians;          // per retained metric
  std::vector<bool> significant_high;   // higher than every other cluster
  double share = 0.0;
  std::size_t count = 0;
  bool low_support = false;
};

namespace profiledetail {

inline double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline bool is_influence_metric(const std::string& name) {
  return name == "maxDirInf" || name == "maxIndInf";
}

inline bool is_novelty_metric(const std::string& name) {
  return name == "userNovelty" || name == "catNovelty";
}

inline bool is_uncertainty_metric(const std::string& name) {
  return name == "userUncertainty" || name == "catUncertainty";
}

inline std::string label_from_significance(const std::vector<std::string>& names,
                                           const std::vector<bool>& sig,
                                           const std::vector<double>& medians) {
  int influence = 0;
  bool dir_sig = false, ind_sig = false;
  int novelty = 0, uncertainty = 0, any_sig = 0;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (!sig[i]) continue;
    ++any_sig;
    if (names[i] == "maxDirInf") { ++influence; dir_sig = true; }
    else if (names[i] == "maxIndInf") { ++influence; ind_sig = true; }
    else if (is_novelty_metric(names[i])) ++novelty;
    else if (is_uncertainty_metric(names[i])) ++uncertainty;
  }
  if (influence == 1) return dir_sig ? "Direct Influence" : "Indirect Influence";
  if (novelty + uncertainty >= 2) {
    if (novelty > uncertainty) return "Novelty";
    if (uncertainty > novelty) return "Uncertainty";
  }
  if (any_sig == 0) {
    bool all_non_positive = true;
    for (double m : medians)
      if (m > 0.0) all_non_positive = false;
    if (all_non_positive) return "Independent";
  }
  return "Mixed stimuli";
}

}  // namespace profiledetail

// Table-style cluster characterization: per-cluster medians of the retained
// metrics, with a metric marked significant-high when its distribution in the
// cluster is stochastically higher than in every other cluster (one-sided
// Mann-Whitney, p < alpha). Labels follow the significance pattern.
inline std::vector<ClusterProfile> profile_clusters(
    const std::vector<ClusteredEvent>& events, const ClusterModel& model,
    double alpha = 0.01, std::size_t low_support_threshold = 20) {
  std::vector<ClusterProfile> out;
  const std::size_t dims = model.feature_names.size();

  // Samples per cluster per metric.
  std::map<int, std::vector<std::vector<double>>> samples;
  for (int id : model.ids) samples[id].resize(dims);
  for (const auto& e : events) {
    auto it = samples.find(e.cluster);
    if (it == samples.end()) continue;
    for (std::size_t d = 0; d < dims; ++d) it->second[d].push_back(e.z[d]);
  }

  for (int id : model.ids) {
    ClusterProfile p;
    p.id = id;
    const auto& mine = samples[id];
    p.count = mine.empty() ? 0 : mine[0].size();
    p.share = events.empty() ? 0.0 : double(p.count) / double(events.size());
    p.low_support = p.count < low_support_threshold;
    p.medians.resize(dims);
    p.significant_high.assign(dims, false);
    for (std::size_t d = 0; d < dims; ++d)
      p.medians[d] = profiledetail::median_of(mine[d]);
    if (p.count > 0) {
      for (std::size_t d = 0; d < dims; ++d) {
        bool beats_all = true;
        for (int other : model.ids) {
          if (other == id) continue;
          const auto& theirs = samples[other][d];
          if (theirs.empty()) { beats_all = false; break; }
          auto mw = mann_whitney_u(mine[d], theirs, MannWhitneyMode::automatic,
                                   Alternative::greater);
          if (!(mw.p < alpha)) { beats_all = false; break; }
        }
        p.significant_high[d] = beats_all && model.ids.size() > 1;
      }
    }
    p.label = profiledetail::label_from_significance(model.feature_names,
                                                     p.significant_high, p.medians);
    out.push_back(std::move(p));
  }
  return out;
}

struct UserSummary {
  std::string group_id;
  std::string user_id;
  std::string topic;
  std::int64_t message_count = 0;  // eligible records
  std::vector<double> barycenter;
  std::map<int, double> cluster_fraction;
  int dominant_cluster = -1;
  double dominant_share = 0.0;
};

struct UserSummarySet {
  std::vector<UserSummary> users;  // sorted by (group, user)
  // Fraction of users whose dominant profile holds > 50% of their messages.
  double majority_fraction = 0.0;
};

inline UserSummarySet user_summaries(
    const std::vector<ClusteredEvent>& events, const ClusterModel& model,
    std::int64_t min_user_messages = 30,
    const std::unordered_map<std::string, std::string>& topics = {}) {
  const std::size_t dims = model.feature_names.size();
  struct Acc {
    std::int64_t n = 0;
    std::vector<double> sum;
    std::map<int, std::int64_t> per_cluster;
  };
  std::map<std::pair<std::string, std::string>, Acc> acc;
  for (const auto& e : events) {
    auto& a = acc[{e.group_id, e.user_id}];
    if (a.sum.empty()) a.sum.assign(dims, 0.0);
    ++a.n;
    for (std::size_t d = 0; d < dims; ++d) a.sum[d] += e.z[d];
    ++a.per_cluster[e.cluster];
  }

  UserSummarySet out;
  std::size_t majority = 0;
  for (const auto& [key, a] : acc) {
    if (a.n < min_user_messages) continue;
    UserSummary u;
    u.group_id = key.first;
    u.user_id = key.second;
    auto t = topics.find(u.group_id);
    u.topic = t == topics.end() ? "unknown" : t->second;
    u.message_count = a.n;
    u.barycenter.resize(dims);
    for (std::size_t d = 0; d < dims; ++d) u.barycenter[d] = a.sum[d] / double(a.n);
    for (const auto& [id, n] : a.per_cluster) {
      const double frac = double(n) / double(a.n);
      u.cluster_fraction[id] = frac;
      if (frac > u.dominant_share) {  // ties keep the smaller cluster id
        u.dominant_share = frac;
        u.dominant_cluster = id;
      }
    }
    if (u.dominant_share > 0.5) ++majority;
    out.users.push_back(std::move(u));
  }
  out.majority_fraction =
      out.users.empty() ? 0.0 : double(majority) / double(out.users.size());
  return out;
}

struct DistanceDistributions {
  std::vector<double> to_user_barycenter;
  std::vector<double> to_centroid;
  std::vector<double> to_recent_others;  // omitted entries: empty recency set
  double mw_p_user_vs_centroid = 1.0;
};

// Euclidean distances of each event to (i) its author's barycenter, (ii) its
// assigned centroid, (iii) the barycenter of other users' events in the
// preceding recency window.
inline DistanceDistributions distance_distributions(
    const std::vector<ClusteredEvent>& events, const ClusterModel& model,
    std::int64_t recency_ms = minutes_ms(15)) {
  DistanceDistributions out;
  const std::size_t dims = model.feature_names.size();

  std::map<std::pair<std::string, std::string>, std::pair<std::vector<double>, std::int64_t>>
      bary;
  for (const auto& e : events) {
    auto& [sum, n] = bary[{e.group_id, e.user_id}];
    if (sum.empty()) sum.assign(dims, 0.0);
    for (std::size_t d = 0; d < dims; ++d) sum[d] += e.z[d];
    ++n;
  }

  auto dist = [&](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t d = 0; d < dims; ++d) {
      const double diff = a[d] - b[d];
      s += diff * diff;
    }
    return std::sqrt(s);
  };

  // Group events by group, preserving order, for the recency scan.
  std::map<std::string, std::vector<std::size_t>> by_group;
  for (std::size_t i = 0; i < events.size(); ++i)
    by_group[events[i].group_id].push_back(i);

  for (const auto& e : events) {
    const auto& [sum, n] = bary[{e.group_id, e.user_id}];
    std::vector<double> center(dims);
    for (std::size_t d = 0; d < dims; ++d) center[d] = sum[d] / double(n);
    out.to_user_barycenter.push_back(dist(e.z, center));
    out.to_centroid.push_back(dist(e.z, model.centroids[model.index_of(e.cluster)]));
  }

  for (const auto& [gid, idx] : by_group) {
    std::size_t lo = 0;
    std::vector<double> win_sum(dims, 0.0);
    std::unordered_map<std::string, std::pair<std::vector<double>, std::int64_t>> per_user;
    std::int64_t win_n = 0;
    for (std::size_t pos = 0; pos < idx.size(); ++pos) {
      const auto& e = events[idx[pos]];
      // evict events outside [t - recency, t)
      while (lo < pos && events[idx[lo]].ts_ms < e.ts_ms - recency_ms) {
        const auto& old = events[idx[lo]];
        auto& pu = per_user[old.user_id];
        for (std::size_t d = 0; d < dims; ++d) {
          win_sum[d] -= old.z[d];
          pu.first[d] -= old.z[d];
        }
        --pu.second;
        --win_n;
        ++lo;
      }
      // window holds strictly-earlier events; same-ts events are excluded
      std::int64_t same_ts_n = 0;
      std::vector<double> same_ts_sum(dims, 0.0);
      std::int64_t same_ts_user_n = 0;
      std::vector<double> same_ts_user_sum(dims, 0.0);
      for (std::size_t j = pos; j-- > lo;) {
        const auto& prev = events[idx[j]];
        if (prev.ts_ms < e.ts_ms) break;
        ++same_ts_n;
        for (std::size_t d = 0; d < dims; ++d) same_ts_sum[d] += prev.z[d];
        if (prev.user_id == e.user_id) {
          ++same_ts_user_n;
          for (std::size_t d = 0; d < dims; ++d) same_ts_user_sum[d] += prev.z[d];
        }
      }
      auto& mine = per_user[e.user_id];
      if (mine.first.empty()) mine.first.assign(dims, 0.0);
      const std::int64_t others_n = (win_n - same_ts_n) - (mine.second - same_ts_user_n);
      if (others_n > 0) {
        std::vector<double> others_mean(dims);
        for (std::size_t d = 0; d < dims; ++d)
          others_mean[d] = (win_sum[d] - same_ts_sum[d] -
                            (mine.first[d] - same_ts_user_sum[d])) /
                           double(others_n);
        out.to_recent_others.push_back(dist(e.z, others_mean));
      }
      // insert current event
      for (std::size_t d = 0; d < dims; ++d) {
        win_sum[d] += e.z[d];
        mine.first[d] += e.z[d];
      }
      ++mine.second;
      ++win_n;
    }
  }

  if (!out.to_user_barycenter.empty() && !out.to_centroid.empty()) {
    auto mw = mann_whitney_u(out.to_user_barycenter, out.to_centroid,
                             MannWhitneyMode::automatic, Alternative::two_sided);
    out.mw_p_user_vs_centroid = mw.p;
  }
  return out;
}

struct TransitionSample {
  std::string group_id;
  std::string user_id;
  std::int64_t pairs_over_threshold = 0;
  double p_trans = 0.0;
};

struct TransitionResult {
  std::int64_t threshold_ms = 0;
  std::vector<TransitionSample> samples;  // sorted by (group, user)

  double mean_p_trans() const {
    if (samples.empty()) return 0.0;
    double s = 0.0;
    for (const auto& x : samples) s += x.p_trans;
    return s / double(samples.size());
  }
};

// Per qualifying user: among consecutive same-user event pairs whose gap
// exceeds the threshold, the fraction whose cluster label changed.
inline std::vector<TransitionResult> transition_probability(
    const std::vector<ClusteredEvent>& events,
    const std::vector<std::int64_t>& thresholds_ms,
    std::int64_t min_user_messages = 10) {
  if (thresholds_ms.empty())
    throw std::invalid_argument("transition_probability: no thresholds");
  std::map<std::pair<std::string, std::string>, std::vector<std::pair<std::int64_t, int>>>
      series;
  for (const auto& e : events)
    series[{e.group_id, e.user_id}].push_back({e.ts_ms, e.cluster});

  std::vector<TransitionResult> out;
  for (std::int64_t theta : thresholds_ms) {
    TransitionResult res;
    res.threshold_ms = theta;
    for (const auto& [key, seq] : series) {
      if (std::int64_t(seq.size()) < min_user_messages) continue;
      std::int64_t pairs = 0, changes = 0;
      for (std::size_t i = 1; i < seq.size(); ++i) {
        const std::int64_t gap = seq[i].first - seq[i - 1].first;
        if (gap > theta) {
          ++pairs;
          if (seq[i].second != seq[i - 1].second) ++changes;
        }
      }
      if (pairs == 0) continue;
      res.samples.push_back(
          {key.first, key.second, pairs, double(changes) / double(pairs)});
    }
    out.push_back(std::move(res));
  }
  return out;
}

struct RadarRow {
  std::string topic;
  int cluster = -1;
  double mean_fraction = 0.0;
  double overall_fraction = 0.0;
  int significance = 0;  // +1 higher, -1 lower, 0 none
  bool low_support = false;
};

// Per-topic mean of users' per-cluster message fractions against the overall
// population, with per-axis two-sided Mann-Whitney significance.
inline std::vector<RadarRow> topic_radar(const UserSummarySet& summaries,
                                         const std::vector<int>& cluster_ids,
                                         double alpha = 0.01,
                                         std::size_t low_support_users = 10) {
  std::map<std::string, std::vector<const UserSummary*>> by_topic;
  for (const auto& u : summaries.users) by_topic[u.topic].push_back(&u);

  auto fraction_of = [](const UserSummary& u, int id) {
    auto it = u.cluster_fraction.find(id);
    return it == u.cluster_fraction.end() ? 0.0 : it->second;
  };

  std::vector<RadarRow> out;
  for (const auto& [topic, users] : by_topic) {
    const bool low_support = users.size() < low_support_users;
    for (int id : cluster_ids) {
      RadarRow row;
      row.topic = topic;
      row.cluster = id;
      row.low_support = low_support;
      std::vector<double> topic_sample, complement_sample;
      for (const auto& u : summaries.users) {
        const double f = fraction_of(u, id);
        if (u.topic == topic) topic_sample.push_back(f);
        else complement_sample.push_back(f);
      }
      double overall = 0.0;
      for (const auto& u : summaries.users) overall += fraction_of(u, id);
      row.overall_fraction =
          summaries.users.empty() ? 0.0 : overall / double(summaries.users.size());
      double mean = 0.0;
      for (double f : topic_sample) mean += f;
      row.mean_fraction = topic_sample.empty() ? 0.0 : mean / double(topic_sample.size());
      if (!low_support && !topic_sample.empty() && !complement_sample.empty()) {
        auto mw = mann_whitney_u(topic_sample, complement_sample,
                                 MannWhitneyMode::automatic, Alternative::two_sided);
        if (mw.p < alpha) {
          const double med_t = profiledetail::median_of(topic_sample);
          const double med_c = profiledetail::median_of(complement_sample);
          if (med_t > med_c) row.significance = +1;
          else if (med_t < med_c) row.significance = -1;
          else row.significance = row.mean_fraction > row.overall_fraction ? +1 : -1;
        }
      }
      out.push_back(std::move(row));
    }
  }
  return out;
}

struct GroupStats {
  std::int64_t active_users = 0;  // non-bot users with >= 1 message
  std::int64_t total_messages = 0;  // by non-bot users
  std::unordered_map<std::string, std::int64_t> user_message_count;
};

inline std::unordered_map<std::string, GroupStats> compute_group_stats(
    const Corpus& corpus) {
  std::unordered_map<std::string, GroupStats> out;
  for (const auto& g : corpus.groups) {
    GroupStats s;
    std::unordered_map<std::string, bool> is_bot;
    for (const auto& m : g.messages)
      if (m.is_bot) is_bot[m.user_id] = true;
    for (const auto& m : g.messages) {
      if (is_bot.count(m.user_id)) continue;
      ++s.user_message_count[m.user_id];
      ++s.total_messages;
    }
    s.active_users = std::int64_t(s.user_message_count.size());
    out[g.group_id] = std::move(s);
  }
  return out;
}

struct RegressionRow {
  std::string predictor;
  double coefficient = 0.0;
  double p = 1.0;
  std::string status;  // significant | non-significant | vif-removed
};

struct TopicRegression {
  std::string topic;
  std::size_t n_users = 0;
  double adjusted_r2 = 0.0;
  bool skipped = false;    // too few rows to fit
  bool excluded = false;   // fit below the adjusted-R^2 floor
  std::string note;
  std::vector<RegressionRow> rows;
};

// Per-topic OLS of log-engagement on barycenter metrics plus group-activity
// controls; all columns z-scored per topic, collinear predictors removed by
// VIF before fitting.
inline std::vector<TopicRegression> engagement_regression(
    const UserSummarySet& summaries,
    const std::unordered_map<std::string, GroupStats>& group_stats,
    const std::vector<std::string>& metric_names, double vif_threshold = 10.0,
    double alpha = 0.01, double r2_floor = 0.2, std::size_t min_topic_users = 30) {
  std::map<std::string, std::vector<const UserSummary*>> by_topic;
  for (const auto& u : summaries.users) by_topic[u.topic].push_back(&u);

  std::vector<std::string> predictor_names = metric_names;
  predictor_names.push_back("activeUsers");
  predictor_names.push_back("msgsByOthers");

  std::vector<TopicRegression> out;
  for (const auto& [topic, users] : by_topic) {
    TopicRegression tr;
    tr.topic = topic;
    tr.n_users = users.size();
    if (users.size() < min_topic_users) {
      tr.skipped = true;
      tr.note = "fewer than " + std::to_string(min_topic_users) + " qualifying users";
      out.push_back(std::move(tr));
      continue;
    }
    if (users.size() <= predictor_names.size() + 1) {
      tr.skipped = true;
      tr.note = "fewer rows than predictors";
      out.push_back(std::move(tr));
      continue;
    }

    FeatureMatrix x;
    x.names = predictor_names;
    x.rows = users.size();
    x.data.assign(x.rows * x.cols(), 0.0);
    std::vector<double> y(users.size(), 0.0);
    for (std::size_t r = 0; r < users.size(); ++r) {
      const auto& u = *users[r];
      for (std::size_t d = 0; d < metric_names.size(); ++d) x.at(r, d) = u.barycenter[d];
      double active = 0.0, by_others = 0.0;
      auto it = group_stats.find(u.group_id);
      if (it != group_stats.end()) {
        const auto& gs = it->second;
        active = double(gs.active_users);
        std::int64_t own = 0;
        auto uit = gs.user_message_count.find(u.user_id);
        if (uit != gs.user_message_count.end()) own = uit->second;
        if (gs.active_users > 1)
          by_others = double(gs.total_messages - own) / double(gs.active_users - 1);
      }
      x.at(r, metric_names.size()) = std::log1p(active);
      x.at(r, metric_names.size() + 1) = std::log1p(by_others);
      y[r] = std::log1p(double(u.message_count));
    }

    auto zx = zscore(x);
    double ymean = 0.0;
    for (double v : y) ymean += v;
    ymean /= double(y.size());
    double yss = 0.0;
    for (double v : y) yss += (v - ymean) * (v - ymean);
    const double ysd = std::sqrt(yss / double(y.size()));
    if (ysd <= 0.0) {
      tr.skipped = true;
      tr.note = "constant response";
      out.push_back(std::move(tr));
      continue;
    }
    for (auto& v : y) v = (v - ymean) / ysd;

    // Drop zero-variance predictors before VIF (they carry no signal and
    // break the auxiliary regressions).
    std::vector<std::string> usable;
    for (std::size_t c = 0; c < zx.matrix.cols(); ++c)
      if (!zx.zero_variance[c]) usable.push_back(zx.matrix.names[c]);
    if (usable.size() < 2) {
      tr.skipped = true;
      tr.note = "not enough usable predictors";
      out.push_back(std::move(tr));
      continue;
    }
    FeatureMatrix design = zx.matrix.select(usable);
    auto vif = vif_prune(design, vif_threshold);
    auto retained = vif.retained_names();
    if (retained.empty()) {
      tr.skipped = true;
      tr.note = "all predictors removed by VIF";
      out.push_back(std::move(tr));
      continue;
    }
    FeatureMatrix fitted = design.select(retained);
    OlsFit fit = ols_fit(fitted, y);
    tr.adjusted_r2 = fit.adjusted_r2;
    tr.excluded = fit.adjusted_r2 < r2_floor;

    std::map<std::string, std::pair<double, double>> coef;  // name -> (b, p)
    for (std::size_t i = 1; i < fit.names.size(); ++i)
      coef[fit.names[i]] = {fit.coefficients[i], fit.p_values[i]};
    for (const auto& name : predictor_names) {
      RegressionRow row;
      row.predictor = name;
      auto it = coef.find(name);
      if (it == coef.end()) {
        row.status = "vif-removed";
      } else {
        row.coefficient = it->second.first;
        row.p = it->second.second;
        row.status = it->second.second <= alpha ? "significant" : "non-significant";
      }
      tr.rows.push_back(std::move(row));
    }
    out.push_back(std::move(tr));
  }
  return out;
}

}  // namespace curio
