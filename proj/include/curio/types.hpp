#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace curio {

// Fixed media-category universe. "other" absorbs everything Telegram-like
// exports lump together (stickers, gifs, documents, ...).
inline constexpr int kCategoryCount = 7;

enum class Category : std::uint8_t {
  text = 0,
  url,
  image,
  video,
  audio,
  poll,
  other,
};

inline constexpr std::array<std::string_view, kCategoryCount> kCategoryNames{
    "text", "url", "image", "video", "audio", "poll", "other"};

// Non-empty subset of the category universe, one bit per Category.
using CatMask = std::uint8_t;

inline std::string_view to_string(Category c) {
  return kCategoryNames[static_cast<int>(c)];
}

inline std::optional<Category> category_from_token(std::string_view tok) {
  for (int i = 0; i < kCategoryCount; ++i)
    if (kCategoryNames[i] == tok) return static_cast<Category>(i);
  return std::nullopt;
}

inline CatMask cat_bit(Category c) {
  return static_cast<CatMask>(1u << static_cast<int>(c));
}

inline int mask_size(CatMask m) { return std::popcount(m); }

inline bool mask_has(CatMask m, int cat) { return (m >> cat) & 1u; }

// Calls fn(int category_index) for each category present in the mask,
// in canonical (enum) order.
template <class Fn>
inline void for_each_category(CatMask m, Fn&& fn) {
  for (int c = 0; c < kCategoryCount; ++c)
    if (mask_has(m, c)) fn(c);
}

inline std::int64_t minutes_ms(std::int64_t m) { return m * 60'000; }
inline std::int64_t hours_ms(std::int64_t h) { return h * 3'600'000; }

// One posting event. The owning group id lives on Group; messages are kept
// per group, sorted by (ts_ms, input order).
struct Message {
  std::string user_id;
  std::string message_id;
  std::string reply_to;  // empty = not a reply
  std::int64_t ts_ms = 0;
  CatMask categories = 0;
  bool is_bot = false;

  bool has_reply() const { return !reply_to.empty(); }
};

struct Group {
  std::string group_id;
  std::vector<Message> messages;  // chronological, ties in input order
};

struct Corpus {
  std::vector<Group> groups;  // sorted by group_id
  std::unordered_map<std::string, std::string> topics;

  const Group* find_group(std::string_view id) const {
    for (const auto& g : groups)
      if (g.group_id == id) return &g;
    return nullptr;
  }

  // Falls back to "unknown" so downstream analyses never stall on a
  // missing sidecar entry; validate() still reports the gap.
  std::string topic_of(const std::string& group_id) const {
    auto it = topics.find(group_id);
    return it == topics.end() ? std::string("unknown") : it->second;
  }

  std::size_t total_messages() const {
    std::size_t n = 0;
    for (const auto& g : groups) n += g.messages.size();
    return n;
  }
};

// A broken data invariant. Violations are data, not errors: validate()
// collects them and the CLI reports them with exit code 1.
struct Violation {
  std::string group_id;
  std::string message_id;
  std::string rule;
  std::string detail;
};

struct AgentSpec {
  int count = 1;
  double rate_per_hour = 1.0;                    // > 0
  std::array<double, kCategoryCount> category_mix{};  // sums to 1 +- 1e-9
  double reply_propensity = 0.0;                 // in [0, 1]
  double extra_category_prob = 0.0;              // chance of a 2nd category
  bool is_bot = false;
};

struct SynthSpec {
  int group_count = 1;
  double duration_hours = 1.0;
  std::uint64_t seed = 0;
  std::vector<std::string> topics;  // cycled over groups; empty -> "unknown"
  std::vector<AgentSpec> agents;    // replicated per group

  void check() const {
    if (group_count <= 0) throw std::invalid_argument("synth: group_count must be positive");
    if (duration_hours <= 0) throw std::invalid_argument("synth: duration must be positive");
    if (agents.empty()) throw std::invalid_argument("synth: no agents");
    for (const auto& a : agents) {
      if (a.count <= 0) throw std::invalid_argument("synth: agent count must be positive");
      if (a.rate_per_hour <= 0) throw std::invalid_argument("synth: rate must be positive");
      if (a.reply_propensity < 0 || a.reply_propensity > 1)
        throw std::invalid_argument("synth: reply propensity outside [0,1]");
      double s = 0;
      for (double p : a.category_mix) {
        if (p < 0) throw std::invalid_argument("synth: negative mixture weight");
        s += p;
      }
      if (std::abs(s - 1.0) > 1e-9)
        throw std::invalid_argument("synth: category mixture must sum to 1");
    }
  }
};

// Metric order used everywhere a stimulus vector is serialized.
inline constexpr int kMetricCount = 9;
inline constexpr std::array<std::string_view, kMetricCount> kMetricNames{
    "userNovelty",     "catNovelty", "userUncertainty", "catUncertainty",
    "userConflict",    "catConflict", "catComplex",     "maxDirInf",
    "maxIndInf"};

enum MetricIndex : int {
  kUserNovelty = 0,
  kCatNovelty,
  kUserUncertainty,
  kCatUncertainty,
  kUserConflict,
  kCatConflict,
  kCatComplex,
  kMaxDirInf,
  kMaxIndInf,
};

using StimulusVector = std::array<double, kMetricCount>;

// A message joined with its stimulus vector. `eligible` folds together the
// window threshold and the author-activity threshold; bot authorship is kept
// separate so user-level stages can drop bot events without losing them from
// the metric stream.
struct EventRecord {
  std::string group_id;
  std::string message_id;
  std::string user_id;
  std::int64_t ts_ms = 0;
  bool eligible = false;
  bool author_is_bot = false;
  StimulusVector metrics{};
};

}  // namespace curio
