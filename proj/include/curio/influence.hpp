#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <tuple>
#include <unordered_map>
#include <utility>
#include <vector>

#include "curio/stimuli.hpp"
#include "curio/types.hpp"
#include "curio/windowing.hpp"

namespace curio {

enum class ChainRepresentative { first, last };

// Collapses maximal runs of consecutive messages by the same user into one
// representative event. Idempotent; any interleaving message (bots included)
// breaks the run.
inline std::vector<StreamEvent> collapse_chains(
    const std::vector<StreamEvent>& seq,
    ChainRepresentative rep = ChainRepresentative::first) {
  std::vector<StreamEvent> out;
  out.reserve(seq.size());
  for (const auto& e : seq) {
    if (!out.empty() && out.back().user == e.user) {
      if (rep == ChainRepresentative::last) out.back().ts_ms = e.ts_ms;
      continue;
    }
    out.push_back(e);
  }
  return out;
}

// Who-is-influenced-by-whom for one group: an edge i -> j means i was
// influenced by j. Nodes are non-bot users with at least one (collapsed)
// message; node order is lexicographic by user id.
struct InfluenceGraph {
  std::string group_id;
  std::vector<std::string> node_ids;                       // sorted
  std::vector<std::vector<std::pair<int, double>>> edges;  // per src, sorted by dst

  std::size_t node_count() const { return node_ids.size(); }

  std::size_t edge_count() const {
    std::size_t n = 0;
    for (const auto& e : edges) n += e.size();
    return n;
  }

  double weight(int src, int dst) const {
    for (const auto& [d, w] : edges[src])
      if (d == dst) return w;
    return 0.0;
  }

  int node_index(const std::string& user) const {
    auto it = std::lower_bound(node_ids.begin(), node_ids.end(), user);
    if (it == node_ids.end() || *it != user) return -1;
    return int(it - node_ids.begin());
  }
};

// One posting event's outgoing influence fractions, before parallel edges are
// merged. Weights are exact rationals: numerator / denominator.
struct EventEdgeSet {
  std::string src;
  std::int64_t ts_ms = 0;
  std::vector<std::tuple<std::string, std::int64_t, std::int64_t>> targets;
};

struct InfluenceBuildOptions {
  std::int64_t delta_t_ms = minutes_ms(30);
  bool chain_collapse = true;
  ChainRepresentative representative = ChainRepresentative::first;
  bool collect_event_edges = false;
};

struct InfluenceBuildResult {
  InfluenceGraph graph;
  std::vector<EventEdgeSet> event_edges;  // only when collect_event_edges
};

// Builds the influenced-by network of a group. For each (optionally
// chain-collapsed) message by i at t, every other user j present in
// [t - delta_t, t) receives an edge i -> j weighted by j's share of the
// others' messages in that window; parallel edges are then summed.
inline InfluenceBuildResult build_influenced_by(const GroupView& view,
                                                const InfluenceBuildOptions& opt) {
  InfluenceBuildResult out;
  out.graph.group_id = view.group->group_id;

  std::vector<StreamEvent> seq = view.events;
  if (opt.chain_collapse) seq = collapse_chains(seq, opt.representative);
  // Bots broke chains above but do not become nodes or window mass.
  std::vector<StreamEvent> filtered;
  filtered.reserve(seq.size());
  for (const auto& e : seq)
    if (!view.user_is_bot[e.user]) filtered.push_back(e);

  std::vector<bool> present(view.users.size(), false);
  for (const auto& e : filtered) present[e.user] = true;
  std::vector<std::string> nodes;
  for (std::size_t u = 0; u < view.users.size(); ++u)
    if (present[u]) nodes.push_back(view.users[u]);
  std::sort(nodes.begin(), nodes.end());
  out.graph.node_ids = nodes;
  std::unordered_map<std::string, int> node_of;
  for (std::size_t i = 0; i < nodes.size(); ++i) node_of[nodes[i]] = int(i);

  // Chronological scan with a [t - delta_t, t) count window. Same-timestamp
  // messages never see each other (strict total order assumption).
  std::unordered_map<std::int32_t, std::int64_t> counts;
  std::int64_t win_total = 0;
  std::size_t lo = 0, next_insert = 0;
  std::map<std::pair<int, int>, double> merged;
  for (std::size_t i = 0; i < filtered.size(); ++i) {
    const auto& e = filtered[i];
    while (next_insert < i && filtered[next_insert].ts_ms < e.ts_ms) {
      ++counts[filtered[next_insert].user];
      ++win_total;
      ++next_insert;
    }
    while (lo < next_insert && filtered[lo].ts_ms < e.ts_ms - opt.delta_t_ms) {
      auto it = counts.find(filtered[lo].user);
      if (--it->second == 0) counts.erase(it);
      --win_total;
      ++lo;
    }
    const std::int64_t own = [&] {
      auto it = counts.find(e.user);
      return it == counts.end() ? std::int64_t(0) : it->second;
    }();
    const std::int64_t others = win_total - own;
    if (others > 0) {
      const int src = node_of[view.users[e.user]];
      EventEdgeSet ev;
      if (opt.collect_event_edges) {
        ev.src = view.users[e.user];
        ev.ts_ms = e.ts_ms;
      }
      // Deterministic target order for the merged accumulation.
      std::vector<std::pair<int, std::int64_t>> targets;
      targets.reserve(counts.size());
      for (const auto& [u, c] : counts)
        if (u != e.user) targets.push_back({node_of[view.users[u]], c});
      std::sort(targets.begin(), targets.end());
      for (const auto& [dst, c] : targets) {
        merged[{src, dst}] += double(c) / double(others);
        if (opt.collect_event_edges)
          ev.targets.push_back({out.graph.node_ids[dst], c, others});
      }
      if (opt.collect_event_edges) out.event_edges.push_back(std::move(ev));
    }
  }

  out.graph.edges.assign(nodes.size(), {});
  for (const auto& [key, w] : merged) out.graph.edges[key.first].push_back({key.second, w});
  return out;
}

// Raised when power iteration fails to converge; carries the last iterate.
class PagerankNonConvergence : public std::runtime_error {
 public:
  explicit PagerankNonConvergence(std::vector<double> last)
      : std::runtime_error("pagerank did not converge"), last_iterate(std::move(last)) {}
  std::vector<double> last_iterate;
};

// Weighted PageRank by power iteration: transitions are out-weight
// normalized, dangling mass is redistributed uniformly, convergence is an L1
// test. Scores sum to 1.
inline std::vector<double> pagerank(const InfluenceGraph& g, double damping = 0.85,
                                    double tol = 1e-10, int max_iter = 200) {
  const std::size_t n = g.node_count();
  if (n == 0) throw std::invalid_argument("pagerank needs >= 1 node");
  std::vector<double> out_weight(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (const auto& [dst, w] : g.edges[i]) out_weight[i] += w;

  std::vector<double> x(n, 1.0 / double(n)), next(n, 0.0);
  for (int it = 0; it < max_iter; ++it) {
    double dangling = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (out_weight[i] <= 0.0) dangling += x[i];
    const double base = (1.0 - damping) / double(n) + damping * dangling / double(n);
    std::fill(next.begin(), next.end(), base);
    for (std::size_t i = 0; i < n; ++i) {
      if (out_weight[i] <= 0.0) continue;
      const double share = damping * x[i] / out_weight[i];
      for (const auto& [dst, w] : g.edges[i]) next[dst] += share * w;
    }
    double delta = 0.0;
    for (std::size_t i = 0; i < n; ++i) delta += std::abs(next[i] - x[i]);
    x.swap(next);
    if (delta < tol) {
      double sum = 0.0;
      for (double v : x) sum += v;
      for (double& v : x) v /= sum;
      return x;
    }
  }
  throw PagerankNonConvergence(std::move(x));
}

struct ProfileCentrality {
  int profile = -1;
  std::vector<double> scores;  // pooled PageRank, deterministic order
  double user_share = 0.0;     // fraction of profiled nodes in this profile
};

struct CentralityReport {
  std::vector<ProfileCentrality> profiles;  // sorted by profile id
  std::size_t graphs_used = 0;
  std::size_t graphs_excluded = 0;
  std::size_t nodes_used = 0;
  std::size_t nodes_without_profile = 0;
};

// Pools PageRank scores by the node's dominant stimulus profile across all
// sufficiently large graphs.
inline CentralityReport centrality_by_profile(
    const std::vector<std::pair<const InfluenceGraph*, std::vector<double>>>& graphs,
    const std::map<std::pair<std::string, std::string>, int>& dominant_profile,
    std::size_t min_nodes = 100) {
  CentralityReport report;
  std::map<int, std::vector<double>> pooled;
  for (const auto& [graph, scores] : graphs) {
    if (graph->node_count() < min_nodes) {
      ++report.graphs_excluded;
      continue;
    }
    ++report.graphs_used;
    for (std::size_t i = 0; i < graph->node_count(); ++i) {
      auto it = dominant_profile.find({graph->group_id, graph->node_ids[i]});
      if (it == dominant_profile.end()) {
        ++report.nodes_without_profile;
        continue;
      }
      pooled[it->second].push_back(scores[i]);
      ++report.nodes_used;
    }
  }
  for (auto& [profile, scores] : pooled) {
    ProfileCentrality pc;
    pc.profile = profile;
    pc.user_share =
        report.nodes_used == 0 ? 0.0 : double(scores.size()) / double(report.nodes_used);
    pc.scores = std::move(scores);
    report.profiles.push_back(std::move(pc));
  }
  return report;
}

// (score, fraction of sample >= score) rows, ascending by score.
inline std::vector<std::pair<double, double>> eccdf_table(std::vector<double> scores) {
  std::sort(scores.begin(), scores.end());
  std::vector<std::pair<double, double>> out;
  out.reserve(scores.size());
  const double n = double(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i)
    out.push_back({scores[i], double(scores.size() - i) / n});
  return out;
}

}  // namespace curio
