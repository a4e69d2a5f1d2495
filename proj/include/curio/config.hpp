#pragma once

#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "curio/types.hpp"

namespace curio {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& what)
      : std::runtime_error("config field '" + field + "': " + what),
        field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

// Every analysis knob in one place. Defaults follow the reference study's
// constants; all of them are overridable by CLI flag, config file key, or
// CURIO_* environment variable of the same name.
struct RunConfig {
  std::int64_t delta_t_min = 30;
  std::int64_t min_preceding = 10;
  std::int64_t min_user_messages = 30;
  std::int64_t transition_min_messages = 10;
  std::vector<std::int64_t> transition_thresholds_min = {60, 360};
  double corr_threshold = 0.8;
  int k_min = 2;
  int k_max = 8;
  int restarts = 10;
  std::int64_t batch_size = 1024;
  int max_batches = 200;
  std::string merge_policy = "auto";  // auto | off | "<id>,<id>"
  double merge_tau = 0.5;
  double vif_threshold = 10.0;
  double r2_floor = 0.2;
  double alpha = 0.01;
  double damping = 0.85;
  std::int64_t min_nodes = 100;
  std::int64_t recency_min = 15;
  std::uint64_t seed = 0;
  bool chain_collapse = true;
  std::string chain_representative = "first";  // first | last
  std::int64_t min_origin_events = 1;
  bool mi_clipped_summands = false;
  bool coerce_unknown_to_other = false;
  int threads = 1;

  std::int64_t delta_t_ms() const { return minutes_ms(delta_t_min); }
  std::int64_t recency_ms() const { return minutes_ms(recency_min); }

  void check() const {
    auto positive = [](const char* field, auto v) {
      if (v <= 0) throw ConfigError(field, "must be positive");
    };
    positive("delta_t_min", delta_t_min);
    positive("min_preceding", min_preceding);
    positive("min_user_messages", min_user_messages);
    positive("transition_min_messages", transition_min_messages);
    positive("batch_size", batch_size);
    positive("max_batches", max_batches);
    positive("restarts", restarts);
    positive("min_nodes", min_nodes);
    positive("recency_min", recency_min);
    positive("min_origin_events", min_origin_events);
    positive("vif_threshold", vif_threshold);
    if (transition_thresholds_min.empty())
      throw ConfigError("transition_thresholds_min", "must be non-empty");
    for (auto t : transition_thresholds_min)
      if (t < 0) throw ConfigError("transition_thresholds_min", "must be >= 0");
    if (alpha <= 0.0 || alpha >= 1.0) throw ConfigError("alpha", "must lie in (0, 1)");
    if (damping <= 0.0 || damping >= 1.0)
      throw ConfigError("damping", "must lie in (0, 1)");
    if (corr_threshold <= 0.0 || corr_threshold > 1.0)
      throw ConfigError("corr_threshold", "must lie in (0, 1]");
    if (k_min < 1 || k_max < k_min) throw ConfigError("k_min", "need 1 <= k_min <= k_max");
    if (merge_tau < 0.0) throw ConfigError("merge_tau", "must be >= 0");
    if (r2_floor < 0.0 || r2_floor >= 1.0)
      throw ConfigError("r2_floor", "must lie in [0, 1)");
    if (chain_representative != "first" && chain_representative != "last")
      throw ConfigError("chain_representative", "must be 'first' or 'last'");
    if (merge_policy != "auto" && merge_policy != "off" &&
        merge_policy.find(',') == std::string::npos)
      throw ConfigError("merge_policy", "must be 'auto', 'off', or '<id>,<id>'");
    if (threads < 1) throw ConfigError("threads", "must be >= 1");
  }

  // Ordered key/value echo for the run manifest. `threads` is execution
  // environment, not run semantics (outputs are thread-count invariant), so
  // it is not echoed.
  std::vector<std::pair<std::string, std::string>> echo() const {
    std::vector<std::pair<std::string, std::string>> kv;
    auto num = [&](const char* k, auto v) { kv.emplace_back(k, std::to_string(v)); };
    auto str = [&](const char* k, const std::string& v) { kv.emplace_back(k, v); };
    num("delta_t_min", delta_t_min);
    num("min_preceding", min_preceding);
    num("min_user_messages", min_user_messages);
    num("transition_min_messages", transition_min_messages);
    {
      std::ostringstream os;
      for (std::size_t i = 0; i < transition_thresholds_min.size(); ++i) {
        if (i) os << ',';
        os << transition_thresholds_min[i];
      }
      str("transition_thresholds_min", os.str());
    }
    num("corr_threshold", corr_threshold);
    num("k_min", k_min);
    num("k_max", k_max);
    num("restarts", restarts);
    num("batch_size", batch_size);
    num("max_batches", max_batches);
    str("merge_policy", merge_policy);
    num("merge_tau", merge_tau);
    num("vif_threshold", vif_threshold);
    num("r2_floor", r2_floor);
    num("alpha", alpha);
    num("damping", damping);
    num("min_nodes", min_nodes);
    num("recency_min", recency_min);
    num("seed", seed);
    str("chain_collapse", chain_collapse ? "true" : "false");
    str("chain_representative", chain_representative);
    num("min_origin_events", min_origin_events);
    str("mi_clipped_summands", mi_clipped_summands ? "true" : "false");
    str("coerce_unknown_to_other", coerce_unknown_to_other ? "true" : "false");
    return kv;
  }
};

}  // namespace curio
