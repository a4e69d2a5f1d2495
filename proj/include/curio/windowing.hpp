#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <stdexcept>
#include <unordered_map>

#include "curio/types.hpp"

namespace curio {

// Dense per-group event form used by the streaming engine: user ids are
// interned to small ints once per group (see GroupView in stimuli.hpp).
struct StreamEvent {
  std::int64_t ts_ms = 0;
  std::int32_t user = 0;
  CatMask cats = 0;
};

inline double xlog2x(std::int64_t n) {
  return n <= 1 ? 0.0 : double(n) * std::log2(double(n));
}

// Multiset of messages inside [t - delta_t, t) for a chronological scan of
// one group. The event handed to advance() describes the window *it*
// observes: the event itself enters the window only once a strictly newer
// timestamp arrives, so simultaneous messages never stimulate each other.
//
// advance() is O(evicted + 1) amortized. Entropy numerators are maintained
// incrementally (sum of n*log2(n) terms), so metric evaluation does not scan
// the buffer.
class WindowState {
 public:
  explicit WindowState(std::int64_t delta_t_ms) : delta_t_ms_(delta_t_ms) {
    if (delta_t_ms <= 0) throw std::invalid_argument("delta_t must be positive");
  }

  void advance(const StreamEvent& e) {
    if (e.ts_ms < last_ts_)
      throw std::runtime_error("non-chronological event feed");
    while (!pending_.empty() && pending_.front().ts_ms < e.ts_ms) {
      insert(pending_.front());
      buffer_.push_back(pending_.front());
      pending_.pop_front();
    }
    const std::int64_t cutoff = e.ts_ms - delta_t_ms_;  // ts == cutoff stays
    while (!buffer_.empty() && buffer_.front().ts_ms < cutoff) {
      remove(buffer_.front());
      buffer_.pop_front();
    }
    pending_.push_back(e);
    last_ts_ = e.ts_ms;
  }

  bool is_eligible(std::int64_t min_preceding = 10) const {
    return total_ >= min_preceding;
  }

  std::int64_t delta_t_ms() const { return delta_t_ms_; }
  std::int64_t total_messages() const { return total_; }
  int distinct_users() const { return int(user_counts_.size()); }
  int distinct_categories() const { return distinct_cats_; }
  std::int64_t category_occurrences() const { return cat_total_; }

  std::int64_t user_count(std::int32_t user) const {
    auto it = user_counts_.find(user);
    return it == user_counts_.end() ? 0 : it->second;
  }

  std::int64_t category_count(int cat) const { return cat_counts_[cat]; }

  template <class Fn>
  void for_each_user(Fn&& fn) const {
    for (const auto& [user, count] : user_counts_) fn(user, count);
  }

  // Base-2 entropy of the per-user message distribution.
  double user_entropy() const {
    if (total_ <= 0) return 0.0;
    double h = std::log2(double(total_)) - user_nlogn_ / double(total_);
    return h > 0.0 ? h : 0.0;
  }

  // Base-2 entropy of the per-category occurrence distribution.
  double category_entropy() const {
    if (cat_total_ <= 0) return 0.0;
    double h = std::log2(double(cat_total_)) - cat_nlogn_ / double(cat_total_);
    return h > 0.0 ? h : 0.0;
  }

  std::int64_t min_buffered_ts() const {
    return buffer_.empty() ? INT64_MAX : buffer_.front().ts_ms;
  }

 private:
  void insert(const StreamEvent& e) {
    auto& n = user_counts_[e.user];
    user_nlogn_ += xlog2x(n + 1) - xlog2x(n);
    ++n;
    for_each_category(e.cats, [&](int c) {
      auto& m = cat_counts_[c];
      cat_nlogn_ += xlog2x(m + 1) - xlog2x(m);
      if (m == 0) ++distinct_cats_;
      ++m;
      ++cat_total_;
    });
    ++total_;
  }

  void remove(const StreamEvent& e) {
    auto it = user_counts_.find(e.user);
    user_nlogn_ += xlog2x(it->second - 1) - xlog2x(it->second);
    if (--it->second == 0) user_counts_.erase(it);
    for_each_category(e.cats, [&](int c) {
      auto& m = cat_counts_[c];
      cat_nlogn_ += xlog2x(m - 1) - xlog2x(m);
      if (--m == 0) --distinct_cats_;
      --cat_total_;
    });
    --total_;
    if (total_ == 0) {
      // Rebase the incrementally-maintained sums so float residue cannot
      // leak into later windows.
      user_nlogn_ = 0.0;
      cat_nlogn_ = 0.0;
    }
  }

  std::int64_t delta_t_ms_;
  std::deque<StreamEvent> buffer_;   // in-window messages
  std::deque<StreamEvent> pending_;  // seen, same timestamp as the last event
  std::unordered_map<std::int32_t, std::int64_t> user_counts_;
  std::array<std::int64_t, kCategoryCount> cat_counts_{};
  std::int64_t total_ = 0;
  std::int64_t cat_total_ = 0;
  int distinct_cats_ = 0;
  double user_nlogn_ = 0.0;
  double cat_nlogn_ = 0.0;
  std::int64_t last_ts_ = INT64_MIN;
};

}  // namespace curio
