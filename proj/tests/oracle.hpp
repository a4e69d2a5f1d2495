// Independent reference implementations used only by tests. Everything here
// recomputes from first principles (brute-force window filters, textbook
// probability formulas, dense matrices) and deliberately shares no code with
// the streaming implementations it checks.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <vector>

#include "curio/influence.hpp"
#include "curio/types.hpp"
#include "curio/windowing.hpp"

namespace oracle {

struct NaiveWindow {
  std::int64_t total = 0;
  std::map<std::int32_t, std::int64_t> users;
  std::array<std::int64_t, curio::kCategoryCount> cats{};
  std::int64_t cat_occurrences = 0;
};

// Window of event i by brute filter over the whole list: [t - dt, t).
inline NaiveWindow naive_window(const std::vector<curio::StreamEvent>& events,
                                std::size_t i, std::int64_t delta_t_ms) {
  NaiveWindow w;
  const std::int64_t t = events[i].ts_ms;
  for (const auto& e : events) {
    if (e.ts_ms < t - delta_t_ms || e.ts_ms >= t) continue;
    ++w.total;
    ++w.users[e.user];
    for (int c = 0; c < curio::kCategoryCount; ++c)
      if (curio::mask_has(e.cats, c)) {
        ++w.cats[c];
        ++w.cat_occurrences;
      }
  }
  return w;
}

inline double entropy_bits(const std::vector<double>& counts) {
  double total = 0;
  for (double c : counts) total += c;
  if (total <= 0) return 0.0;
  double h = 0;
  for (double c : counts) {
    if (c <= 0) continue;
    const double p = c / total;
    h -= p * std::log2(p);
  }
  return h;
}

// All nine metrics of event i from scratch: brute-force window plus a full
// replay of the estimator counts over events 0..i-1, each with its own
// brute-force window.
inline curio::StimulusVector naive_stimulus(const std::vector<curio::StreamEvent>& events,
                                            std::size_t i, std::int64_t delta_t_ms,
                                            std::int64_t min_origin_events = 1) {
  curio::StimulusVector v{};
  const NaiveWindow w = naive_window(events, i, delta_t_ms);
  if (w.total == 0) return v;

  const auto& me = events[i];
  const auto it = w.users.find(me.user);
  const std::int64_t mine = it == w.users.end() ? 0 : it->second;
  v[curio::kUserNovelty] = mine > 0
                               ? -std::log2(double(mine) / double(w.total))
                               : std::log2(double(w.users.size()));

  double psum = 0;
  int ncats = 0;
  for (int c = 0; c < curio::kCategoryCount; ++c)
    if (curio::mask_has(me.cats, c)) {
      psum += double(w.cats[c]) / double(w.cat_occurrences);
      ++ncats;
    }
  const double pavg = psum / double(ncats);
  int distinct_cats = 0;
  for (auto c : w.cats)
    if (c > 0) ++distinct_cats;
  v[curio::kCatNovelty] = pavg > 0 ? -std::log2(pavg) : std::log2(double(distinct_cats));

  std::vector<double> ucounts, ccounts;
  for (const auto& [u, n] : w.users) ucounts.push_back(double(n));
  for (auto c : w.cats)
    if (c > 0) ccounts.push_back(double(c));
  v[curio::kUserUncertainty] = entropy_bits(ucounts);
  v[curio::kCatUncertainty] = entropy_bits(ccounts);
  v[curio::kUserConflict] = std::log2(double(w.users.size()));
  v[curio::kCatConflict] = std::log2(double(distinct_cats));
  v[curio::kCatComplex] = -std::log2(double(distinct_cats) / double(curio::kCategoryCount));

  // Estimator replay over strictly-prior events.
  std::map<std::int32_t, std::int64_t> author, origin;
  std::map<std::pair<std::int32_t, std::int32_t>, std::int64_t> joint;  // (d, o)
  for (std::size_t k = 0; k < i; ++k) {
    const NaiveWindow wk = naive_window(events, k, delta_t_ms);
    const std::int32_t d = events[k].user;
    ++author[d];
    for (const auto& [o, n] : wk.users) {
      if (o == d) continue;
      ++origin[o];
      ++joint[{d, o}];
    }
  }
  const double n_events = double(i);
  std::set<std::int32_t> origins;
  for (const auto& [u, n] : w.users)
    if (u != me.user) origins.insert(u);

  double max_dir = 0, max_ind = 0;
  for (std::int32_t o : origins) {
    const std::int64_t n_o = origin.count(o) ? origin[o] : 0;
    if (n_o < min_origin_events) continue;
    // PMI(d, o), clipped
    double pmi = 0;
    const std::int64_t n_d = author.count(me.user) ? author[me.user] : 0;
    const std::int64_t n_j = joint.count({me.user, o}) ? joint[{me.user, o}] : 0;
    if (n_d > 0 && n_o > 0 && n_j > 0) {
      const double p_d = double(n_d) / n_events;
      const double p_d_given_o = double(n_j) / double(n_o);
      pmi = std::max(0.0, std::log2(p_d_given_o / p_d));
    }
    max_dir = std::max(max_dir, pmi);
    // MI(o): sum of unclipped terms, clipped total
    double mi = 0;
    for (const auto& [key, n_joint] : joint) {
      if (key.second != o || n_joint == 0) continue;
      const double p_joint = double(n_joint) / n_events;
      const double p_d2 = double(author[key.first]) / n_events;
      const double p_cond = double(n_joint) / double(n_o);
      mi += p_joint * std::log2(p_cond / p_d2);
    }
    mi = std::max(0.0, mi);
    max_ind = std::max(max_ind, mi);
  }
  v[curio::kMaxDirInf] = max_dir;
  v[curio::kMaxIndInf] = max_ind;
  return v;
}

// Dense power-iteration PageRank over an explicit transition matrix.
inline std::vector<double> dense_pagerank(const curio::InfluenceGraph& g,
                                          double damping = 0.85, int iters = 10000,
                                          double tol = 1e-14) {
  const std::size_t n = g.node_count();
  std::vector<double> P(n * n, 0.0);  // P[j * n + i] = transition i -> j
  std::vector<double> out_w(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (const auto& [dst, w] : g.edges[i]) out_w[i] += w;
  for (std::size_t i = 0; i < n; ++i) {
    if (out_w[i] <= 0) {
      for (std::size_t j = 0; j < n; ++j) P[j * n + i] = 1.0 / double(n);
    } else {
      for (const auto& [dst, w] : g.edges[i]) P[dst * n + i] += w / out_w[i];
    }
  }
  std::vector<double> x(n, 1.0 / double(n)), nx(n, 0.0);
  for (int it = 0; it < iters; ++it) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0;
      for (std::size_t i = 0; i < n; ++i) acc += P[j * n + i] * x[i];
      nx[j] = (1.0 - damping) / double(n) + damping * acc;
    }
    double delta = 0;
    for (std::size_t j = 0; j < n; ++j) delta += std::abs(nx[j] - x[j]);
    x = nx;
    if (delta < tol) break;
  }
  double s = 0;
  for (double v : x) s += v;
  for (double& v : x) v /= s;
  return x;
}

// Exact Mann-Whitney p by recursive enumeration of label assignments.
inline double enumerate_mw_p(const std::vector<double>& a, const std::vector<double>& b,
                             bool two_sided) {
  const std::size_t na = a.size(), nb = b.size(), n = na + nb;
  std::vector<double> pooled(a);
  pooled.insert(pooled.end(), b.begin(), b.end());
  auto u_of = [&](const std::vector<double>& xa, const std::vector<double>& xb) {
    double u = 0;
    for (double x : xa)
      for (double y : xb) u += x > y ? 1.0 : (x == y ? 0.5 : 0.0);
    return u;
  };
  const double u_obs = u_of(a, b);
  const double center = double(na) * double(nb) / 2.0;
  std::uint64_t total = 0, extreme = 0;
  std::vector<std::size_t> pick;
  std::function<void(std::size_t)> rec = [&](std::size_t start) {
    if (pick.size() == na) {
      std::vector<bool> mark(n, false);
      for (auto i : pick) mark[i] = true;
      std::vector<double> xa, xb;
      for (std::size_t i = 0; i < n; ++i) (mark[i] ? xa : xb).push_back(pooled[i]);
      const double u = u_of(xa, xb);
      ++total;
      if (two_sided ? std::abs(u - center) >= std::abs(u_obs - center) - 1e-9
                    : u >= u_obs - 1e-9)
        ++extreme;
      return;
    }
    for (std::size_t i = start; i + (na - pick.size()) <= n; ++i) {
      pick.push_back(i);
      rec(i + 1);
      pick.pop_back();
    }
  };
  rec(0);
  return double(extreme) / double(total);
}

// Adjusted Rand index between two labelings.
inline double adjusted_rand_index(const std::vector<int>& x, const std::vector<int>& y) {
  const std::size_t n = x.size();
  std::map<std::pair<int, int>, std::int64_t> cont;
  std::map<int, std::int64_t> rx, ry;
  for (std::size_t i = 0; i < n; ++i) {
    ++cont[{x[i], y[i]}];
    ++rx[x[i]];
    ++ry[y[i]];
  }
  auto choose2 = [](std::int64_t m) { return double(m) * double(m - 1) / 2.0; };
  double sum_ij = 0, sum_x = 0, sum_y = 0;
  for (const auto& [k, v] : cont) sum_ij += choose2(v);
  for (const auto& [k, v] : rx) sum_x += choose2(v);
  for (const auto& [k, v] : ry) sum_y += choose2(v);
  const double total = choose2(std::int64_t(n));
  const double expected = sum_x * sum_y / total;
  const double max_index = 0.5 * (sum_x + sum_y);
  if (max_index == expected) return 1.0;
  return (sum_ij - expected) / (max_index - expected);
}

// Random corpus generator for property tests (simple, not the library synth).
struct RandomCorpusParams {
  int n_groups = 1;
  int n_users = 6;
  int n_messages = 120;
  std::int64_t max_gap_ms = 5 * 60 * 1000;
  double bot_fraction = 0.0;
  int max_cats = 3;
};

inline curio::Corpus random_corpus(std::uint64_t seed, const RandomCorpusParams& p) {
  std::mt19937_64 rng(seed);
  auto next_int = [&](std::int64_t lo, std::int64_t hi) {  // inclusive
    return lo + std::int64_t(rng() % std::uint64_t(hi - lo + 1));
  };
  curio::Corpus corpus;
  for (int g = 0; g < p.n_groups; ++g) {
    curio::Group group;
    group.group_id = "g" + std::to_string(g);
    std::int64_t t = 0;
    for (int i = 0; i < p.n_messages; ++i) {
      t += next_int(0, p.max_gap_ms);  // gap 0 allowed: exercises ties
      curio::Message m;
      const int u = int(next_int(0, p.n_users - 1));
      m.user_id = "u" + std::to_string(u);
      m.message_id = group.group_id + "-m" + std::to_string(i);
      m.ts_ms = t;
      const int ncats = int(next_int(1, p.max_cats));
      for (int c = 0; c < ncats; ++c)
        m.categories |= curio::cat_bit(curio::Category(next_int(0, 6)));
      m.is_bot = p.bot_fraction > 0 &&
                 double(rng() >> 11) * 0x1.0p-53 < p.bot_fraction && u == 0;
      group.messages.push_back(std::move(m));
    }
    corpus.groups.push_back(std::move(group));
    corpus.topics[corpus.groups.back().group_id] = "unknown";
  }
  return corpus;
}

}  // namespace oracle
