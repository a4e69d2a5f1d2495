#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "curio/cluster.hpp"
#include "curio/corpus.hpp"
#include "curio/influence.hpp"
#include "curio/profiles.hpp"
#include "curio/statkit.hpp"
#include "curio/types.hpp"

namespace curio {

// All report numbers carry 9 decimal places; counts stay integers.
inline std::string fmt9(double v) {
  if (v == 0.0) v = 0.0;  // no negative zero in reports
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9f", v);
  return buf;
}

inline std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::string fnv1a64_hex(const std::string& bytes) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(bytes)));
  return buf;
}

// ---- event records ---------------------------------------------------------

inline void write_records_csv(const std::vector<EventRecord>& records,
                              std::ostream& out) {
  out << "group,message_id,user,ts_ms,eligible,bot";
  for (auto name : kMetricNames) out << ',' << name;
  out << '\n';
  for (const auto& r : records) {
    out << detail::csv_escape(r.group_id) << ',' << detail::csv_escape(r.message_id)
        << ',' << detail::csv_escape(r.user_id) << ',' << r.ts_ms << ','
        << (r.eligible ? "true" : "false") << ',' << (r.author_is_bot ? "true" : "false");
    for (double v : r.metrics) out << ',' << fmt9(v);
    out << '\n';
  }
}

inline void write_records_jsonl(const std::vector<EventRecord>& records,
                                std::ostream& out) {
  for (const auto& r : records) {
    nlohmann::json j;
    j["group"] = r.group_id;
    j["message_id"] = r.message_id;
    j["user"] = r.user_id;
    j["ts_ms"] = r.ts_ms;
    j["eligible"] = r.eligible;
    j["bot"] = r.author_is_bot;
    nlohmann::json m;
    for (int i = 0; i < kMetricCount; ++i)
      m[std::string(kMetricNames[i])] = fmt9(r.metrics[i]);
    j["metrics"] = m;
    out << j.dump() << '\n';
  }
}

inline std::vector<EventRecord> read_records_csv(std::istream& in) {
  std::vector<EventRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (lineno == 1 && line.rfind("group,", 0) == 0) continue;
    auto f = detail::split_csv_line(line);
    if (f.size() != std::size_t(6 + kMetricCount))
      throw ParseError(lineno, "(row)", "bad record row");
    EventRecord r;
    r.group_id = f[0];
    r.message_id = f[1];
    r.user_id = f[2];
    r.ts_ms = std::stoll(f[3]);
    r.eligible = f[4] == "true";
    r.author_is_bot = f[5] == "true";
    for (int i = 0; i < kMetricCount; ++i) r.metrics[i] = std::stod(f[6 + i]);
    out.push_back(std::move(r));
  }
  return out;
}

// ---- cluster model ----------------------------------------------------------

struct ModelFile {
  ClusterModel model;           // assignment left empty; stored separately
  std::vector<double> z_mean;   // z-score transform over the 9 metrics
  std::vector<double> z_std;
  std::vector<std::string> retained;  // metric names after pruning
  int merged_a = -1, merged_b = -1;   // -1 when no merge happened
};

inline void write_model_json(const ModelFile& mf, std::ostream& out) {
  nlohmann::json j;
  j["k"] = mf.model.k;
  j["ids"] = mf.model.ids;
  j["feature_names"] = mf.model.feature_names;
  j["centroids"] = mf.model.centroids;
  j["inertia"] = mf.model.inertia;
  j["seed"] = mf.model.seed;
  j["restart"] = mf.model.restart;
  j["zscore_mean"] = mf.z_mean;
  j["zscore_std"] = mf.z_std;
  j["retained"] = mf.retained;
  if (mf.merged_a >= 0) {
    j["merged"] = {{"a", mf.merged_a}, {"b", mf.merged_b}};
  } else {
    j["merged"] = nullptr;
  }
  out << j.dump(2) << '\n';
}

inline ModelFile read_model_json(std::istream& in) {
  nlohmann::json j = nlohmann::json::parse(in);
  ModelFile mf;
  mf.model.k = j.at("k").get<int>();
  mf.model.ids = j.at("ids").get<std::vector<int>>();
  mf.model.feature_names = j.at("feature_names").get<std::vector<std::string>>();
  mf.model.centroids = j.at("centroids").get<std::vector<std::vector<double>>>();
  mf.model.inertia = j.at("inertia").get<double>();
  mf.model.seed = j.at("seed").get<std::uint64_t>();
  mf.model.restart = j.at("restart").get<int>();
  mf.z_mean = j.at("zscore_mean").get<std::vector<double>>();
  mf.z_std = j.at("zscore_std").get<std::vector<double>>();
  mf.retained = j.at("retained").get<std::vector<std::string>>();
  if (!j.at("merged").is_null()) {
    mf.merged_a = j["merged"].at("a").get<int>();
    mf.merged_b = j["merged"].at("b").get<int>();
  }
  return mf;
}

inline void write_assignments_csv(const std::vector<ClusteredEvent>& events,
                                  std::ostream& out) {
  out << "group,message_id,cluster\n";
  for (const auto& e : events)
    out << detail::csv_escape(e.group_id) << ',' << detail::csv_escape(e.message_id)
        << ',' << e.cluster << '\n';
}

inline std::map<std::pair<std::string, std::string>, int> read_assignments_csv(
    std::istream& in) {
  std::map<std::pair<std::string, std::string>, int> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (lineno == 1 && line.rfind("group,", 0) == 0) continue;
    auto f = detail::split_csv_line(line);
    if (f.size() != 3) throw ParseError(lineno, "(row)", "bad assignment row");
    out[{f[0], f[1]}] = std::stoi(f[2]);
  }
  return out;
}

// ---- table-style reports ----------------------------------------------------

inline void write_profiles_csv(const std::vector<ClusterProfile>& profiles,
                               const std::vector<std::string>& metric_names,
                               std::ostream& out) {
  out << "cluster,label";
  for (const auto& n : metric_names) out << ",med_" << n;
  for (const auto& n : metric_names) out << ",sig_" << n;
  out << ",share_pct,count,low_support\n";
  for (const auto& p : profiles) {
    out << p.id << ',' << detail::csv_escape(p.label);
    for (double m : p.medians) out << ',' << fmt9(m);
    for (bool s : p.significant_high) out << ',' << (s ? "*" : "");
    out << ',' << fmt9(p.share * 100.0) << ',' << p.count << ','
        << (p.low_support ? "true" : "false") << '\n';
  }
}

inline void write_inertia_csv(const std::vector<std::pair<int, double>>& curve,
                              int chosen_k, std::ostream& out) {
  out << "k,avg_inertia,chosen\n";
  for (const auto& [k, inertia] : curve)
    out << k << ',' << fmt9(inertia) << ',' << (k == chosen_k ? "true" : "false")
        << '\n';
}

inline void write_correlation_csv(const CorrelationMatrix& corr, std::ostream& out) {
  out << "metric";
  for (const auto& n : corr.names) out << ',' << n;
  out << '\n';
  for (std::size_t i = 0; i < corr.names.size(); ++i) {
    out << corr.names[i];
    for (std::size_t j = 0; j < corr.names.size(); ++j) out << ',' << fmt9(corr.at(i, j));
    out << '\n';
  }
}

inline void write_users_csv(const UserSummarySet& summaries,
                            const std::vector<int>& cluster_ids,
                            const std::vector<std::string>& metric_names,
                            std::ostream& out) {
  out << "group,user,topic,messages,dominant_cluster,dominant_share";
  for (int id : cluster_ids) out << ",frac_" << id;
  for (const auto& n : metric_names) out << ",bary_" << n;
  out << '\n';
  for (const auto& u : summaries.users) {
    out << detail::csv_escape(u.group_id) << ',' << detail::csv_escape(u.user_id) << ','
        << detail::csv_escape(u.topic) << ',' << u.message_count << ','
        << u.dominant_cluster << ',' << fmt9(u.dominant_share);
    for (int id : cluster_ids) {
      auto it = u.cluster_fraction.find(id);
      out << ',' << fmt9(it == u.cluster_fraction.end() ? 0.0 : it->second);
    }
    for (double b : u.barycenter) out << ',' << fmt9(b);
    out << '\n';
  }
}

inline UserSummarySet read_users_csv(std::istream& in) {
  UserSummarySet out;
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::string> header;
  std::vector<int> frac_ids;
  std::size_t bary_begin = 0, bary_end = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto f = detail::split_csv_line(line);
    if (lineno == 1) {
      header = f;
      for (std::size_t c = 0; c < header.size(); ++c) {
        if (header[c].rfind("frac_", 0) == 0)
          frac_ids.push_back(std::stoi(header[c].substr(5)));
        if (header[c].rfind("bary_", 0) == 0) {
          if (bary_begin == 0) bary_begin = c;
          bary_end = c + 1;
        }
      }
      continue;
    }
    if (f.size() != header.size()) throw ParseError(lineno, "(row)", "bad user row");
    UserSummary u;
    u.group_id = f[0];
    u.user_id = f[1];
    u.topic = f[2];
    u.message_count = std::stoll(f[3]);
    u.dominant_cluster = std::stoi(f[4]);
    u.dominant_share = std::stod(f[5]);
    for (std::size_t i = 0; i < frac_ids.size(); ++i)
      u.cluster_fraction[frac_ids[i]] = std::stod(f[6 + i]);
    for (std::size_t c = bary_begin; c < bary_end; ++c)
      u.barycenter.push_back(std::stod(f[c]));
    out.users.push_back(std::move(u));
  }
  std::size_t majority = 0;
  for (const auto& u : out.users)
    if (u.dominant_share > 0.5) ++majority;
  out.majority_fraction =
      out.users.empty() ? 0.0 : double(majority) / double(out.users.size());
  return out;
}

inline void write_distances_csv(const DistanceDistributions& d, std::ostream& out) {
  out << "kind,value\n";
  for (double v : d.to_user_barycenter) out << "to_user_barycenter," << fmt9(v) << '\n';
  for (double v : d.to_centroid) out << "to_centroid," << fmt9(v) << '\n';
  for (double v : d.to_recent_others) out << "to_recent_others," << fmt9(v) << '\n';
}

inline void write_transitions_csv(const std::vector<TransitionResult>& results,
                                  std::ostream& out) {
  out << "threshold_min,group,user,pairs_over_threshold,p_trans\n";
  for (const auto& res : results)
    for (const auto& s : res.samples)
      out << res.threshold_ms / 60000 << ',' << detail::csv_escape(s.group_id) << ','
          << detail::csv_escape(s.user_id) << ',' << s.pairs_over_threshold << ','
          << fmt9(s.p_trans) << '\n';
}

inline void write_radar_csv(const std::vector<RadarRow>& rows, std::ostream& out) {
  out << "topic,cluster,mean_fraction,overall_fraction,significance,low_support\n";
  for (const auto& r : rows) {
    const char* sig = r.significance > 0 ? "higher" : r.significance < 0 ? "lower" : "none";
    out << detail::csv_escape(r.topic) << ',' << r.cluster << ','
        << fmt9(r.mean_fraction) << ',' << fmt9(r.overall_fraction) << ',' << sig << ','
        << (r.low_support ? "true" : "false") << '\n';
  }
}

inline void write_regression_csv(const std::vector<TopicRegression>& topics,
                                 std::ostream& out) {
  out << "topic,predictor,coefficient,p,status\n";
  for (const auto& t : topics) {
    if (t.skipped || t.excluded) continue;
    for (const auto& row : t.rows)
      out << detail::csv_escape(t.topic) << ',' << row.predictor << ','
          << fmt9(row.coefficient) << ',' << fmt9(row.p) << ',' << row.status << '\n';
  }
}

inline void write_regression_summary_json(const std::vector<TopicRegression>& topics,
                                          std::ostream& out) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& t : topics) {
    nlohmann::json j;
    j["topic"] = t.topic;
    j["n_users"] = t.n_users;
    j["adjusted_r2"] = t.skipped ? nlohmann::json() : nlohmann::json(t.adjusted_r2);
    j["skipped"] = t.skipped;
    j["excluded"] = t.excluded;
    j["note"] = t.note;
    arr.push_back(std::move(j));
  }
  out << arr.dump(2) << '\n';
}

inline void write_edges_csv(const std::vector<InfluenceGraph>& graphs,
                            std::ostream& out) {
  out << "group,src,dst,weight\n";
  for (const auto& g : graphs)
    for (std::size_t s = 0; s < g.edges.size(); ++s)
      for (const auto& [dst, w] : g.edges[s])
        out << detail::csv_escape(g.group_id) << ',' << detail::csv_escape(g.node_ids[s])
            << ',' << detail::csv_escape(g.node_ids[dst]) << ',' << fmt9(w) << '\n';
}

inline void write_nodes_csv(
    const std::vector<InfluenceGraph>& graphs,
    const std::vector<std::vector<double>>& scores,
    const std::map<std::pair<std::string, std::string>, int>& dominant_profile,
    std::ostream& out) {
  out << "group,user,pagerank,dominant_profile\n";
  for (std::size_t gi = 0; gi < graphs.size(); ++gi) {
    const auto& g = graphs[gi];
    for (std::size_t i = 0; i < g.node_count(); ++i) {
      auto it = dominant_profile.find({g.group_id, g.node_ids[i]});
      out << detail::csv_escape(g.group_id) << ',' << detail::csv_escape(g.node_ids[i])
          << ',' << fmt9(scores[gi][i]) << ',';
      if (it != dominant_profile.end()) out << it->second;
      out << '\n';
    }
  }
}

inline void write_eccdf_csv(const CentralityReport& report, std::ostream& out) {
  out << "profile,score,eccdf\n";
  for (const auto& p : report.profiles)
    for (const auto& [score, frac] : eccdf_table(p.scores))
      out << p.profile << ',' << fmt9(score) << ',' << fmt9(frac) << '\n';
}

inline void write_validation_json(const std::vector<Violation>& violations,
                                  std::ostream& out) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& v : violations) {
    nlohmann::json j;
    j["group"] = v.group_id;
    j["message_id"] = v.message_id;
    j["rule"] = v.rule;
    j["detail"] = v.detail;
    arr.push_back(std::move(j));
  }
  out << arr.dump(2) << '\n';
}

inline void write_calibration_csv(const std::vector<WindowCalibrationRow>& rows,
                                  std::ostream& out) {
  out << "delta_t_min,user_reply_fraction,message_coverage\n";
  for (const auto& r : rows)
    out << r.delta_t_ms / 60000 << ',' << fmt9(r.user_reply_fraction) << ','
        << fmt9(r.message_coverage) << '\n';
}

// ---- files ------------------------------------------------------------------

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << contents;
}

}  // namespace curio
