#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "curio/parallel.hpp"
#include "curio/types.hpp"
#include "curio/windowing.hpp"

namespace curio {

// The seven window-derived stimulus components, in bits.
struct CollativeMetrics {
  double user_novelty = 0;
  double cat_novelty = 0;
  double user_uncertainty = 0;
  double cat_uncertainty = 0;
  double user_conflict = 0;
  double cat_conflict = 0;
  double cat_complexity = 0;
};

// Surprisal/entropy/diversity metrics for a posting event observing `window`.
// user_novelty falls back to the uniform maximum log2(|users in window|) when
// the author has not posted inside the window; cat_novelty falls back to
// log2(|categories in window|) when none of the message's categories appear.
inline CollativeMetrics collative_metrics(const WindowState& window,
                                          std::int32_t author, CatMask cats) {
  if (window.total_messages() <= 0) throw std::runtime_error("empty-window");
  CollativeMetrics m;

  const double total = double(window.total_messages());
  const std::int64_t author_n = window.user_count(author);
  const double distinct_users = double(window.distinct_users());
  m.user_novelty = author_n > 0 ? -std::log2(double(author_n) / total)
                                : std::log2(distinct_users);

  const double cat_occ = double(window.category_occurrences());
  double p_sum = 0;
  int n_cats = 0;
  for_each_category(cats, [&](int c) {
    p_sum += double(window.category_count(c)) / cat_occ;
    ++n_cats;
  });
  const double p_avg = p_sum / double(n_cats);
  const double distinct_cats = double(window.distinct_categories());
  m.cat_novelty = p_avg > 0 ? -std::log2(p_avg) : std::log2(distinct_cats);

  m.user_uncertainty = window.user_entropy();
  m.cat_uncertainty = window.category_entropy();
  m.user_conflict = std::log2(distinct_users);
  m.cat_conflict = std::log2(distinct_cats);
  m.cat_complexity = std::log2(double(kCategoryCount)) - std::log2(distinct_cats);
  return m;
}

// Running co-occurrence counts over the posting events of one group,
// powering the direct (PMI) and indirect (per-origin MI) influence metrics.
//
// Event space: the posting events ingested so far. "o is an origin of event
// e" means o authored at least one message inside e's interaction window
// (self-presence excluded). All probabilities are plain count ratios, so
// influence values for an event depend only on history strictly before it.
//
// mi() is O(1): per origin o we maintain
//   s1[o]          = sum_d joint(d,o) * (log2 joint(d,o) - log2 author(d))
//   joint_total[o] = sum_d joint(d,o)
// and evaluate
//   MI(o) = (s1[o] + joint_total[o] * (log2 n_events - log2 origin(o)))
//           / n_events .
class InfluenceEstimator {
 public:
  explicit InfluenceEstimator(std::size_t n_users, bool clipped_summands = false,
                              std::int64_t min_origin_events = 1)
      : author_count_(n_users, 0),
        origin_count_(n_users, 0),
        joint_by_dest_(n_users),
        s1_(n_users, 0.0),
        joint_total_(n_users, 0),
        clipped_summands_(clipped_summands),
        min_origin_events_(min_origin_events) {
    if (clipped_summands_) joint_by_origin_.resize(n_users);
  }

  std::int64_t n_events() const { return n_events_; }
  std::int64_t author_count(std::int32_t d) const { return author_count_[d]; }
  std::int64_t origin_count(std::int32_t o) const { return origin_count_[o]; }

  std::int64_t joint_count(std::int32_t d, std::int32_t o) const {
    const auto& jm = joint_by_dest_[d];
    auto it = jm.find(o);
    return it == jm.end() ? 0 : it->second;
  }

  // Direct influence of origin o on destination d, clipped at 0. Degenerate
  // counts (d never authored, o never an origin, no joint observation) give 0.
  double pmi(std::int32_t d, std::int32_t o) const {
    if (author_count_[d] == 0 || origin_count_[o] == 0) return 0.0;
    std::int64_t j = joint_count(d, o);
    if (j == 0) return 0.0;
    double v = pmi_unclipped(j, author_count_[d], origin_count_[o], n_events_);
    return v > 0.0 ? v : 0.0;
  }

  // Group-wide influence of origin o: sum over destinations of joint
  // probability times unclipped PMI, with only the total clipped at 0. The
  // clipped-summand variant (sensitivity analysis) clips each term instead.
  double mi(std::int32_t o) const {
    if (origin_count_[o] == 0 || n_events_ == 0) return 0.0;
    double v;
    if (!clipped_summands_) {
      v = (s1_[o] + double(joint_total_[o]) *
                        (std::log2(double(n_events_)) -
                         std::log2(double(origin_count_[o])))) /
          double(n_events_);
    } else {
      v = 0.0;
      for (const auto& [d, j] : joint_by_origin_[o]) {
        double term = pmi_unclipped(j, author_count_[d], origin_count_[o], n_events_);
        if (term > 0.0) v += double(j) / double(n_events_) * term;
      }
    }
    return v > 0.0 ? v : 0.0;
  }

  // (maxDirInf, maxIndInf) for destination d over the origins present in the
  // window, self excluded. Empty origin set yields (0, 0).
  std::pair<double, double> max_influences(const WindowState& window,
                                           std::int32_t d) const {
    double max_dir = 0.0, max_ind = 0.0;
    window.for_each_user([&](std::int32_t o, std::int64_t) {
      if (o == d) return;
      if (origin_count_[o] < min_origin_events_) return;
      double p = pmi(d, o);
      if (p > max_dir) max_dir = p;
      double m = mi(o);
      if (m > max_ind) max_ind = m;
    });
    return {max_dir, max_ind};
  }

  // Ingests one posting event: must be called exactly once per event, after
  // its influence metrics were read (history strictly precedes the event).
  void update(std::int32_t d, const WindowState& window) {
    const std::int64_t a_old = author_count_[d];
    author_count_[d] = a_old + 1;
    if (a_old > 0) {
      // Existing joint terms of destination d reference log2 author(d).
      const double dlog = std::log2(double(a_old + 1)) - std::log2(double(a_old));
      for (const auto& [o, j] : joint_by_dest_[d]) s1_[o] -= double(j) * dlog;
    }
    ++n_events_;
    const double log_author = std::log2(double(a_old + 1));
    window.for_each_user([&](std::int32_t o, std::int64_t) {
      if (o == d) return;
      ++origin_count_[o];
      auto& j = joint_by_dest_[d][o];
      s1_[o] += xlog2x(j + 1) - xlog2x(j) - log_author;
      ++j;
      ++joint_total_[o];
      if (clipped_summands_) ++joint_by_origin_[o][d];
    });
  }

 private:
  static double pmi_unclipped(std::int64_t joint, std::int64_t author,
                              std::int64_t origin, std::int64_t events) {
    return std::log2(double(joint)) + std::log2(double(events)) -
           std::log2(double(origin)) - std::log2(double(author));
  }

  std::int64_t n_events_ = 0;
  std::vector<std::int64_t> author_count_;
  std::vector<std::int64_t> origin_count_;
  std::vector<std::unordered_map<std::int32_t, std::int64_t>> joint_by_dest_;
  std::vector<double> s1_;
  std::vector<std::int64_t> joint_total_;
  std::vector<std::unordered_map<std::int32_t, std::int64_t>> joint_by_origin_;
  bool clipped_summands_;
  std::int64_t min_origin_events_;
};

// One group's messages with user ids interned to dense indices
// (first-appearance order, deterministic).
struct GroupView {
  const Group* group = nullptr;
  std::vector<StreamEvent> events;          // parallel to group->messages
  std::vector<std::string> users;           // dense index -> user id
  std::vector<bool> user_is_bot;            // true if any message was bot-flagged
  std::vector<std::int64_t> user_messages;  // total messages per user
};

inline GroupView build_group_view(const Group& g) {
  GroupView v;
  v.group = &g;
  v.events.reserve(g.messages.size());
  std::unordered_map<std::string, std::int32_t> index;
  for (const auto& m : g.messages) {
    auto [it, inserted] = index.emplace(m.user_id, std::int32_t(v.users.size()));
    if (inserted) {
      v.users.push_back(m.user_id);
      v.user_is_bot.push_back(false);
      v.user_messages.push_back(0);
    }
    std::int32_t u = it->second;
    if (m.is_bot) v.user_is_bot[u] = true;
    ++v.user_messages[u];
    v.events.push_back({m.ts_ms, u, m.categories});
  }
  return v;
}

struct PipelineConfig {
  std::int64_t delta_t_ms = minutes_ms(30);
  std::int64_t min_preceding = 10;
  std::int64_t min_user_messages = 30;
  std::int64_t min_origin_events = 1;
  bool mi_clipped_summands = false;
};

// Chronological scan of one group: advance window, compute metrics for
// window-eligible events, then feed the event to the estimator. A record is
// `eligible` when both the window and the author-activity thresholds hold;
// its metrics are filled whenever the window threshold alone holds.
inline std::vector<EventRecord> run_group_pipeline(const GroupView& view,
                                                   const PipelineConfig& cfg) {
  std::vector<EventRecord> out;
  out.reserve(view.events.size());
  WindowState window(cfg.delta_t_ms);
  InfluenceEstimator estimator(view.users.size(), cfg.mi_clipped_summands,
                               cfg.min_origin_events);
  const auto& msgs = view.group->messages;
  for (std::size_t i = 0; i < view.events.size(); ++i) {
    const StreamEvent& ev = view.events[i];
    window.advance(ev);
    EventRecord rec;
    rec.group_id = view.group->group_id;
    rec.message_id = msgs[i].message_id;
    rec.user_id = msgs[i].user_id;
    rec.ts_ms = ev.ts_ms;
    rec.author_is_bot = msgs[i].is_bot;
    const bool window_ok = window.is_eligible(cfg.min_preceding);
    const bool user_ok = view.user_messages[ev.user] >= cfg.min_user_messages;
    rec.eligible = window_ok && user_ok;
    if (window_ok && window.total_messages() > 0) {
      CollativeMetrics cm = collative_metrics(window, ev.user, ev.cats);
      auto [dir_inf, ind_inf] = estimator.max_influences(window, ev.user);
      rec.metrics[kUserNovelty] = cm.user_novelty;
      rec.metrics[kCatNovelty] = cm.cat_novelty;
      rec.metrics[kUserUncertainty] = cm.user_uncertainty;
      rec.metrics[kCatUncertainty] = cm.cat_uncertainty;
      rec.metrics[kUserConflict] = cm.user_conflict;
      rec.metrics[kCatConflict] = cm.cat_conflict;
      rec.metrics[kCatComplex] = cm.cat_complexity;
      rec.metrics[kMaxDirInf] = dir_inf;
      rec.metrics[kMaxIndInf] = ind_inf;
    }
    estimator.update(ev.user, window);
    out.push_back(std::move(rec));
  }
  return out;
}

// Full-corpus pipeline. Groups are independent; with threads > 1 they run in
// parallel and are concatenated in corpus order, so output is identical to a
// serial run.
inline std::vector<EventRecord> run_pipeline(const Corpus& corpus,
                                             const PipelineConfig& cfg,
                                             int threads = 1) {
  std::vector<std::vector<EventRecord>> per_group(corpus.groups.size());
  parallel_for(corpus.groups.size(), threads, [&](std::size_t i) {
    per_group[i] = run_group_pipeline(build_group_view(corpus.groups[i]), cfg);
  });
  std::vector<EventRecord> out;
  out.reserve(corpus.total_messages());
  for (auto& recs : per_group)
    for (auto& r : recs) out.push_back(std::move(r));
  return out;
}

}  // namespace curio
