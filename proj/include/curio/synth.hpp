#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "curio/types.hpp"

namespace curio {

namespace synthdetail {

// Hand-rolled samplers on top of mt19937_64 so generated corpora are
// bit-identical across standard libraries.
inline double canonical(std::mt19937_64& rng) {
  return double(rng() >> 11) * 0x1.0p-53;
}

inline double exponential(std::mt19937_64& rng, double rate) {
  return -std::log(1.0 - canonical(rng)) / rate;
}

inline int categorical(std::mt19937_64& rng,
                       const std::array<double, kCategoryCount>& mix) {
  double r = canonical(rng);
  for (int c = 0; c < kCategoryCount; ++c) {
    r -= mix[c];
    if (r < 0.0) return c;
  }
  return kCategoryCount - 1;
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = seed + a * 0x9E3779B97F4A7C15ULL + b * 0xBF58476D1CE4E5B9ULL + 1;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace synthdetail

// Deterministic synthetic corpus: each agent posts via an independent Poisson
// process over the configured duration; events are marked as replies with the
// agent's propensity, targeting the most recent message by another user.
inline Corpus synth_generate(const SynthSpec& spec) {
  spec.check();
  Corpus corpus;

  for (int g = 0; g < spec.group_count; ++g) {
    Group group;
    group.group_id = "g" + std::to_string(g);

    struct Draft {
      std::int64_t ts_ms;
      int agent_slot;
      int agent_seq;
      CatMask cats;
      bool is_bot;
      double reply_propensity;
    };
    std::vector<Draft> drafts;

    int slot = 0;
    for (const auto& agent : spec.agents) {
      for (int rep = 0; rep < agent.count; ++rep, ++slot) {
        std::mt19937_64 rng(synthdetail::mix_seed(spec.seed, std::uint64_t(g),
                                                  std::uint64_t(slot)));
        double t_hours = 0.0;
        int seq = 0;
        for (;;) {
          t_hours += synthdetail::exponential(rng, agent.rate_per_hour);
          if (t_hours > spec.duration_hours) break;
          CatMask mask = cat_bit(Category(synthdetail::categorical(rng, agent.category_mix)));
          if (agent.extra_category_prob > 0.0 &&
              synthdetail::canonical(rng) < agent.extra_category_prob)
            mask |= cat_bit(Category(synthdetail::categorical(rng, agent.category_mix)));
          drafts.push_back({std::int64_t(std::llround(t_hours * 3'600'000.0)), slot,
                            seq++, mask, agent.is_bot, agent.reply_propensity});
        }
      }
    }
    std::sort(drafts.begin(), drafts.end(), [](const Draft& a, const Draft& b) {
      if (a.ts_ms != b.ts_ms) return a.ts_ms < b.ts_ms;
      if (a.agent_slot != b.agent_slot) return a.agent_slot < b.agent_slot;
      return a.agent_seq < b.agent_seq;
    });

    std::mt19937_64 reply_rng(
        synthdetail::mix_seed(spec.seed, std::uint64_t(g), 0x52455053ULL));
    group.messages.reserve(drafts.size());
    // last message overall, and last message by a different user than that one
    int last = -1, last_other = -1;
    for (std::size_t i = 0; i < drafts.size(); ++i) {
      const auto& d = drafts[i];
      Message m;
      m.user_id = "u" + std::to_string(d.agent_slot);
      m.message_id = group.group_id + "-m" + std::to_string(i);
      m.ts_ms = d.ts_ms;
      m.categories = d.cats;
      m.is_bot = d.is_bot;
      if (d.reply_propensity > 0.0) {
        const bool wants_reply = synthdetail::canonical(reply_rng) < d.reply_propensity;
        int target = -1;
        if (last >= 0 && drafts[last].agent_slot != d.agent_slot) target = last;
        else if (last_other >= 0 && drafts[last_other].agent_slot != d.agent_slot)
          target = last_other;
        if (wants_reply && target >= 0)
          m.reply_to = group.group_id + "-m" + std::to_string(target);
      }
      if (last < 0 || drafts[last].agent_slot != d.agent_slot) last_other = last;
      last = int(i);
      group.messages.push_back(std::move(m));
    }
    corpus.groups.push_back(std::move(group));
  }

  for (int g = 0; g < spec.group_count; ++g) {
    const std::string gid = "g" + std::to_string(g);
    corpus.topics[gid] = spec.topics.empty()
                             ? "unknown"
                             : spec.topics[std::size_t(g) % spec.topics.size()];
  }
  return corpus;
}

}  // namespace curio
