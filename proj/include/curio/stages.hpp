#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "curio/cluster.hpp"
#include "curio/config.hpp"
#include "curio/corpus.hpp"
#include "curio/influence.hpp"
#include "curio/io.hpp"
#include "curio/profiles.hpp"
#include "curio/statkit.hpp"
#include "curio/stimuli.hpp"
#include "curio/synth.hpp"

namespace curio {

// Priority used when pruning redundant metrics; the tail carries the two
// conflict metrics so the strongly-correlated pairs resolve in favour of
// uncertainty/complexity.
inline std::vector<std::string> parse_keep_priority(const std::string& csv) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : csv) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

inline const std::string kDefaultKeepPriority =
    "userNovelty,catNovelty,userUncertainty,catUncertainty,catComplex,"
    "maxDirInf,maxIndInf,userConflict,catConflict";

inline PipelineConfig pipeline_config(const RunConfig& cfg) {
  PipelineConfig pc;
  pc.delta_t_ms = cfg.delta_t_ms();
  pc.min_preceding = cfg.min_preceding;
  pc.min_user_messages = cfg.min_user_messages;
  pc.min_origin_events = cfg.min_origin_events;
  pc.mi_clipped_summands = cfg.mi_clipped_summands;
  return pc;
}

struct ClusterStage {
  ModelFile mf;
  std::vector<ClusteredEvent> events;  // eligible, non-bot
  std::vector<ClusterProfile> profiles;
  std::vector<std::pair<int, double>> inertia_curve;
  int chosen_k = 0;
  CorrelationMatrix correlation;
  MergeOutcome merge;
};

// Z-scores the nine metrics over eligible non-bot records, prunes redundant
// metrics, selects k on the averaged inertia curve, fits the model, applies
// the merge policy, and profiles the clusters.
inline ClusterStage stage_cluster(const std::vector<EventRecord>& records,
                                  const RunConfig& cfg,
                                  const std::string& keep_priority_csv = "") {
  std::vector<const EventRecord*> usable;
  for (const auto& r : records)
    if (r.eligible && !r.author_is_bot) usable.push_back(&r);
  if (usable.size() < std::size_t(std::max(cfg.k_max + 1, 3)))
    throw ConfigError("k_max", "not enough eligible records to cluster");

  FeatureMatrix full;
  for (auto n : kMetricNames) full.names.emplace_back(n);
  full.rows = usable.size();
  full.data.resize(full.rows * full.cols());
  for (std::size_t r = 0; r < usable.size(); ++r)
    for (int c = 0; c < kMetricCount; ++c) full.at(r, c) = usable[r]->metrics[c];

  ClusterStage stage;
  auto zr = zscore(full);
  stage.correlation = pearson_matrix(full);
  const auto priority = parse_keep_priority(
      keep_priority_csv.empty() ? kDefaultKeepPriority : keep_priority_csv);
  auto retained = prune_correlated(stage.correlation, cfg.corr_threshold, priority);

  FeatureMatrix data = zr.matrix.select(retained);

  KMeansParams params;
  params.batch_size = std::size_t(cfg.batch_size);
  params.max_batches = cfg.max_batches;
  params.restarts = cfg.restarts;
  params.seed = cfg.seed;
  if (cfg.k_min == cfg.k_max) {
    stage.chosen_k = cfg.k_min;
    stage.inertia_curve.clear();
  } else {
    std::vector<int> k_range;
    for (int k = cfg.k_min; k <= cfg.k_max; ++k) k_range.push_back(k);
    auto sel = select_k(data, k_range, params, cfg.threads);
    stage.chosen_k = sel.chosen_k;
    stage.inertia_curve = std::move(sel.curve);
  }
  params.k = stage.chosen_k;
  ClusterModel model = minibatch_kmeans(data, params, cfg.threads);

  if (cfg.merge_policy != "off" && model.k >= 2) {
    MergePolicy policy;
    if (cfg.merge_policy == "auto") {
      policy.kind = MergePolicy::Kind::automatic;
      policy.median_gap_tau = cfg.merge_tau;
    } else {
      policy.kind = MergePolicy::Kind::explicit_pair;
      auto comma = cfg.merge_policy.find(',');
      policy.pair_a = std::stoi(cfg.merge_policy.substr(0, comma));
      policy.pair_b = std::stoi(cfg.merge_policy.substr(comma + 1));
    }
    stage.merge = merge_clusters(model, data, policy);
    model = stage.merge.model;
  } else {
    stage.merge.model = model;
  }

  stage.events.reserve(usable.size());
  for (std::size_t r = 0; r < usable.size(); ++r) {
    ClusteredEvent e;
    e.group_id = usable[r]->group_id;
    e.message_id = usable[r]->message_id;
    e.user_id = usable[r]->user_id;
    e.ts_ms = usable[r]->ts_ms;
    e.z.resize(data.cols());
    for (std::size_t d = 0; d < data.cols(); ++d) e.z[d] = data.at(r, d);
    e.cluster = model.assignment[r];
    stage.events.push_back(std::move(e));
  }

  stage.profiles = profile_clusters(stage.events, model, cfg.alpha);
  stage.mf.model = std::move(model);
  stage.mf.model.assignment.clear();  // persisted separately
  stage.mf.z_mean = zr.mean;
  stage.mf.z_std = zr.stddev;
  stage.mf.retained = retained;
  if (stage.merge.merged) {
    stage.mf.merged_a = stage.merge.merged_a;
    stage.mf.merged_b = stage.merge.merged_b;
  }
  return stage;
}

// Rebuilds clustered events from persisted artifacts: applies the model's
// stored z transform to the retained metrics and joins the assignments.
inline std::vector<ClusteredEvent> clustered_events_from_files(
    const std::vector<EventRecord>& records, const ModelFile& mf,
    const std::map<std::pair<std::string, std::string>, int>& assignments) {
  std::vector<std::size_t> retained_idx;
  for (const auto& name : mf.retained) {
    for (int c = 0; c < kMetricCount; ++c)
      if (kMetricNames[c] == name) retained_idx.push_back(std::size_t(c));
  }
  std::vector<ClusteredEvent> out;
  for (const auto& r : records) {
    if (!r.eligible || r.author_is_bot) continue;
    auto it = assignments.find({r.group_id, r.message_id});
    if (it == assignments.end()) continue;
    ClusteredEvent e;
    e.group_id = r.group_id;
    e.message_id = r.message_id;
    e.user_id = r.user_id;
    e.ts_ms = r.ts_ms;
    e.z.resize(retained_idx.size());
    for (std::size_t d = 0; d < retained_idx.size(); ++d) {
      const std::size_t c = retained_idx[d];
      e.z[d] = mf.z_std[c] > 0.0 ? (r.metrics[c] - mf.z_mean[c]) / mf.z_std[c] : 0.0;
    }
    e.cluster = it->second;
    out.push_back(std::move(e));
  }
  return out;
}

struct ProfileStage {
  UserSummarySet summaries;
  DistanceDistributions distances;
  std::vector<TransitionResult> transitions;
  std::vector<RadarRow> radar;
};

inline ProfileStage stage_profile(const std::vector<ClusteredEvent>& events,
                                  const ModelFile& mf,
                                  const std::unordered_map<std::string, std::string>& topics,
                                  const RunConfig& cfg) {
  ProfileStage stage;
  stage.summaries = user_summaries(events, mf.model, cfg.min_user_messages, topics);
  stage.distances = distance_distributions(events, mf.model, cfg.recency_ms());
  std::vector<std::int64_t> thresholds;
  for (auto m : cfg.transition_thresholds_min) thresholds.push_back(minutes_ms(m));
  stage.transitions =
      transition_probability(events, thresholds, cfg.transition_min_messages);
  stage.radar = topic_radar(stage.summaries, mf.model.ids, cfg.alpha);
  return stage;
}

struct GraphStage {
  std::vector<InfluenceGraph> graphs;        // per group, corpus order
  std::vector<std::vector<double>> scores;   // pagerank per graph
  CentralityReport report;
};

inline GraphStage stage_graph(const Corpus& corpus, const UserSummarySet& summaries,
                              const RunConfig& cfg) {
  GraphStage stage;
  InfluenceBuildOptions opt;
  opt.delta_t_ms = cfg.delta_t_ms();
  opt.chain_collapse = cfg.chain_collapse;
  opt.representative = cfg.chain_representative == "last" ? ChainRepresentative::last
                                                          : ChainRepresentative::first;
  stage.graphs.resize(corpus.groups.size());
  stage.scores.resize(corpus.groups.size());
  parallel_for(corpus.groups.size(), cfg.threads, [&](std::size_t i) {
    auto built = build_influenced_by(build_group_view(corpus.groups[i]), opt);
    stage.graphs[i] = std::move(built.graph);
    if (stage.graphs[i].node_count() > 0)
      stage.scores[i] = pagerank(stage.graphs[i], cfg.damping);
  });

  std::map<std::pair<std::string, std::string>, int> dominant;
  for (const auto& u : summaries.users)
    dominant[{u.group_id, u.user_id}] = u.dominant_cluster;
  std::vector<std::pair<const InfluenceGraph*, std::vector<double>>> pairs;
  for (std::size_t i = 0; i < stage.graphs.size(); ++i)
    pairs.push_back({&stage.graphs[i], stage.scores[i]});
  stage.report = centrality_by_profile(pairs, dominant, std::size_t(cfg.min_nodes));
  return stage;
}

inline std::vector<TopicRegression> stage_regress(const Corpus& corpus,
                                                  const UserSummarySet& summaries,
                                                  const std::vector<std::string>& metric_names,
                                                  const RunConfig& cfg) {
  auto stats = compute_group_stats(corpus);
  return engagement_regression(summaries, stats, metric_names, cfg.vif_threshold,
                               cfg.alpha, cfg.r2_floor);
}

// ---- synth spec file --------------------------------------------------------

inline SynthSpec parse_synth_spec_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("synth spec: ") + e.what());
  }
  SynthSpec spec;
  spec.group_count = j.value("groups", 1);
  spec.duration_hours = j.value("duration_hours", 1.0);
  spec.seed = j.value("seed", std::uint64_t(0));
  if (j.contains("topics")) spec.topics = j["topics"].get<std::vector<std::string>>();
  if (!j.contains("agents") || !j["agents"].is_array())
    throw std::invalid_argument("synth spec: missing agents array");
  for (const auto& a : j["agents"]) {
    AgentSpec agent;
    agent.count = a.value("count", 1);
    agent.rate_per_hour = a.value("rate_per_hour", 1.0);
    agent.reply_propensity = a.value("reply_propensity", 0.0);
    agent.extra_category_prob = a.value("extra_category_prob", 0.0);
    agent.is_bot = a.value("bot", false);
    if (!a.contains("category_mix"))
      throw std::invalid_argument("synth spec: agent missing category_mix");
    for (const auto& [key, val] : a["category_mix"].items()) {
      auto c = category_from_token(key);
      if (!c) throw std::invalid_argument("synth spec: unknown category '" + key + "'");
      agent.category_mix[std::size_t(*c)] = val.get<double>();
    }
    spec.agents.push_back(agent);
  }
  spec.check();
  return spec;
}

}  // namespace curio
