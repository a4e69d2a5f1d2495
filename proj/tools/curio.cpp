// curio: curiosity-stimulation analytics over group-chat logs.
//
// Staged pipeline with file handoffs:
//   synth -> validate -> metrics -> cluster -> profile -> graph -> regress
// `report` chains every stage into one output directory with a manifest.
// Every command is a pure function of (inputs, config, seed); reruns are
// byte-identical, including under --threads N.

#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "curio/config.hpp"
#include "curio/io.hpp"
#include "curio/stages.hpp"

namespace fs = std::filesystem;
using namespace curio;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitViolations = 1;
constexpr int kExitUsage = 2;
constexpr int kExitNumerical = 3;

struct CommonArgs {
  RunConfig cfg;
  std::string keep_priority = kDefaultKeepPriority;
};

void add_config_options(CLI::App* cmd, CommonArgs& args) {
  auto& cfg = args.cfg;
  cmd->set_config("--config")->envname("CURIO_CONFIG");
  auto opt = [&](const char* flag, auto& field, const char* desc) {
    std::string env = "CURIO_";
    for (const char* p = flag + 2; *p; ++p)
      env += *p == '-' ? '_' : char(std::toupper(*p));
    return cmd->add_option(flag, field, desc)->envname(env);
  };
  opt("--delta-t-min", cfg.delta_t_min, "interaction window length, minutes");
  opt("--min-preceding", cfg.min_preceding, "window eligibility floor, messages");
  opt("--min-user-messages", cfg.min_user_messages, "user activity floor, messages");
  opt("--transition-min-messages", cfg.transition_min_messages,
      "per-user records needed for transition samples");
  opt("--transition-thresholds-min", cfg.transition_thresholds_min,
      "transition gap thresholds, minutes");
  opt("--corr-threshold", cfg.corr_threshold, "|rho| pruning threshold");
  opt("--k-min", cfg.k_min, "smallest candidate k");
  opt("--k-max", cfg.k_max, "largest candidate k");
  opt("--restarts", cfg.restarts, "clustering restarts");
  opt("--batch-size", cfg.batch_size, "mini-batch size");
  opt("--max-batches", cfg.max_batches, "mini-batch iterations");
  opt("--merge-policy", cfg.merge_policy, "auto | off | <id>,<id>");
  opt("--merge-tau", cfg.merge_tau, "max median gap for automatic merge, z units");
  opt("--vif-threshold", cfg.vif_threshold, "VIF removal threshold");
  opt("--r2-floor", cfg.r2_floor, "adjusted R^2 report floor");
  opt("--alpha", cfg.alpha, "significance level");
  opt("--damping", cfg.damping, "PageRank damping factor");
  opt("--min-nodes", cfg.min_nodes, "graph size floor for centrality pooling");
  opt("--recency-min", cfg.recency_min, "recent-others window, minutes");
  opt("--seed", cfg.seed, "random seed");
  opt("--chain-representative", cfg.chain_representative,
      "chain representative timestamp: first | last");
  opt("--min-origin-events", cfg.min_origin_events,
      "events an origin needs before entering the influence max");
  opt("--threads", cfg.threads, "worker threads (1 = serial)");
  opt("--keep-priority", args.keep_priority, "metric pruning priority order");
  cmd->add_flag("--chain-collapse,!--no-chain-collapse", cfg.chain_collapse,
                "collapse consecutive same-user messages when building graphs")
      ->envname("CURIO_CHAIN_COLLAPSE");
  cmd->add_flag("--mi-clipped-summands", cfg.mi_clipped_summands,
                "clip each MI summand instead of the total")
      ->envname("CURIO_MI_CLIPPED_SUMMANDS");
  cmd->add_flag("--coerce-unknown-to-other", cfg.coerce_unknown_to_other,
                "map unknown category tokens to 'other' instead of rejecting")
      ->envname("CURIO_COERCE_UNKNOWN_TO_OTHER");
}

CorpusFormat format_for(const std::string& path, const std::string& forced) {
  if (forced == "jsonl") return CorpusFormat::jsonl;
  if (forced == "csv") return CorpusFormat::csv;
  return path.size() >= 4 && path.substr(path.size() - 4) == ".csv"
             ? CorpusFormat::csv
             : CorpusFormat::jsonl;
}

Corpus load_corpus(const std::string& corpus_path, const std::string& topics_path,
                   const RunConfig& cfg, const std::string& forced_format = "") {
  std::ifstream in(corpus_path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read file: " + corpus_path);
  ParseOptions opts;
  opts.coerce_unknown_to_other = cfg.coerce_unknown_to_other;
  Corpus corpus = parse_corpus(in, format_for(corpus_path, forced_format), opts);
  if (!topics_path.empty()) {
    std::ifstream tin(topics_path, std::ios::binary);
    if (!tin) throw std::runtime_error("cannot read file: " + topics_path);
    load_topics(corpus, tin);
  }
  return corpus;
}

void write_text(const fs::path& path, const std::string& text) {
  write_file(path.string(), text);
}

template <class WriteFn>
std::string render(WriteFn&& fn) {
  std::ostringstream os;
  fn(os);
  return os.str();
}

// ---- stage drivers (each writes its product files into out_dir) ------------

void emit_metrics(const std::vector<EventRecord>& records, const fs::path& out,
                  const std::string& format) {
  if (format == "jsonl")
    write_text(out, render([&](std::ostream& os) { write_records_jsonl(records, os); }));
  else
    write_text(out, render([&](std::ostream& os) { write_records_csv(records, os); }));
}

void emit_cluster_stage(const ClusterStage& stage, const fs::path& dir) {
  write_text(dir / "model.json",
             render([&](std::ostream& os) { write_model_json(stage.mf, os); }));
  write_text(dir / "assignments.csv",
             render([&](std::ostream& os) { write_assignments_csv(stage.events, os); }));
  write_text(dir / "profiles.csv", render([&](std::ostream& os) {
               write_profiles_csv(stage.profiles, stage.mf.retained, os);
             }));
  write_text(dir / "inertia.csv", render([&](std::ostream& os) {
               write_inertia_csv(stage.inertia_curve, stage.chosen_k, os);
             }));
  write_text(dir / "correlation.csv", render([&](std::ostream& os) {
               write_correlation_csv(stage.correlation, os);
             }));
}

void emit_profile_stage(const ProfileStage& stage, const ModelFile& mf,
                        const fs::path& dir) {
  write_text(dir / "users.csv", render([&](std::ostream& os) {
               write_users_csv(stage.summaries, mf.model.ids, mf.retained, os);
             }));
  write_text(dir / "distances.csv",
             render([&](std::ostream& os) { write_distances_csv(stage.distances, os); }));
  write_text(dir / "transitions.csv", render([&](std::ostream& os) {
               write_transitions_csv(stage.transitions, os);
             }));
  write_text(dir / "radar.csv",
             render([&](std::ostream& os) { write_radar_csv(stage.radar, os); }));
  nlohmann::json j;
  j["users"] = stage.summaries.users.size();
  j["majority_fraction"] = stage.summaries.majority_fraction;
  j["distance_mw_p_user_vs_centroid"] = stage.distances.mw_p_user_vs_centroid;
  write_text(dir / "profile_summary.json", j.dump(2) + "\n");
}

void emit_graph_stage(const GraphStage& stage, const UserSummarySet& summaries,
                      const fs::path& dir) {
  std::map<std::pair<std::string, std::string>, int> dominant;
  for (const auto& u : summaries.users)
    dominant[{u.group_id, u.user_id}] = u.dominant_cluster;
  write_text(dir / "edges.csv",
             render([&](std::ostream& os) { write_edges_csv(stage.graphs, os); }));
  write_text(dir / "nodes.csv", render([&](std::ostream& os) {
               write_nodes_csv(stage.graphs, stage.scores, dominant, os);
             }));
  write_text(dir / "eccdf.csv",
             render([&](std::ostream& os) { write_eccdf_csv(stage.report, os); }));
}

void emit_regress_stage(const std::vector<TopicRegression>& topics, const fs::path& dir) {
  write_text(dir / "regression.csv",
             render([&](std::ostream& os) { write_regression_csv(topics, os); }));
  write_text(dir / "regression_summary.json", render([&](std::ostream& os) {
               write_regression_summary_json(topics, os);
             }));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"curiosity-stimulation analytics over group-chat logs"};
  app.require_subcommand(1);

  CommonArgs args;
  std::string corpus_path, topics_path, records_path, model_dir, users_path;
  std::string out_path, out_dir, spec_path, format = "csv", corpus_format;
  std::string candidates = "5,10,15,30,60,120";

  auto* synth = app.add_subcommand("synth", "generate a deterministic synthetic corpus");
  synth->add_option("--spec", spec_path, "synthesis spec (JSON)")->required();
  synth->add_option("--out-dir", out_dir, "output directory")->required();
  synth->add_option("--format", format, "corpus format: csv | jsonl");
  add_config_options(synth, args);

  auto* validate_cmd = app.add_subcommand("validate", "check corpus invariants");
  validate_cmd->add_option("--corpus", corpus_path)->required();
  validate_cmd->add_option("--topics", topics_path);
  validate_cmd->add_option("--out", out_path, "violation report (JSON)")->required();
  validate_cmd->add_option("--corpus-format", corpus_format);
  add_config_options(validate_cmd, args);

  auto* calibrate = app.add_subcommand("calibrate", "sweep interaction-window lengths");
  calibrate->add_option("--corpus", corpus_path)->required();
  calibrate->add_option("--topics", topics_path);
  calibrate->add_option("--candidates", candidates, "candidate window lengths, minutes");
  calibrate->add_option("--out", out_path, "calibration table (CSV)")->required();
  calibrate->add_option("--corpus-format", corpus_format);
  add_config_options(calibrate, args);

  auto* metrics = app.add_subcommand("metrics", "compute per-event stimulus metrics");
  metrics->add_option("--corpus", corpus_path)->required();
  metrics->add_option("--topics", topics_path);
  metrics->add_option("--out", out_path, "event records file")->required();
  metrics->add_option("--format", format, "records format: csv | jsonl");
  metrics->add_option("--corpus-format", corpus_format);
  add_config_options(metrics, args);

  auto* cluster_cmd = app.add_subcommand("cluster", "cluster events into stimulus profiles");
  cluster_cmd->add_option("--records", records_path, "event records (CSV)")->required();
  cluster_cmd->add_option("--out-dir", out_dir)->required();
  add_config_options(cluster_cmd, args);

  auto* profile = app.add_subcommand("profile", "user-level profile analyses");
  profile->add_option("--records", records_path, "event records (CSV)")->required();
  profile->add_option("--model-dir", model_dir, "cluster stage output directory")->required();
  profile->add_option("--topics", topics_path);
  profile->add_option("--out-dir", out_dir)->required();
  add_config_options(profile, args);

  auto* graph = app.add_subcommand("graph", "influenced-by networks and centrality");
  graph->add_option("--corpus", corpus_path)->required();
  graph->add_option("--users", users_path, "user summaries (CSV)")->required();
  graph->add_option("--out-dir", out_dir)->required();
  graph->add_option("--corpus-format", corpus_format);
  add_config_options(graph, args);

  auto* regress = app.add_subcommand("regress", "per-topic engagement regression");
  regress->add_option("--corpus", corpus_path)->required();
  regress->add_option("--users", users_path, "user summaries (CSV)")->required();
  regress->add_option("--model-dir", model_dir, "cluster stage output directory")->required();
  regress->add_option("--out-dir", out_dir)->required();
  regress->add_option("--corpus-format", corpus_format);
  add_config_options(regress, args);

  auto* report = app.add_subcommand("report", "full pipeline into one directory");
  report->add_option("--corpus", corpus_path)->required();
  report->add_option("--topics", topics_path);
  report->add_option("--out-dir", out_dir)->required();
  report->add_option("--corpus-format", corpus_format);
  add_config_options(report, args);

  CLI11_PARSE(app, argc, argv);

  try {
    args.cfg.check();

    if (synth->parsed()) {
      SynthSpec spec = parse_synth_spec_json(read_file(spec_path));
      Corpus corpus = synth_generate(spec);
      fs::create_directories(out_dir);
      const auto fmt = format == "jsonl" ? CorpusFormat::jsonl : CorpusFormat::csv;
      const char* name = format == "jsonl" ? "corpus.jsonl" : "corpus.csv";
      write_text(fs::path(out_dir) / name, render([&](std::ostream& os) {
                   serialize_corpus(corpus, os, fmt);
                 }));
      write_text(fs::path(out_dir) / "topics.csv",
                 render([&](std::ostream& os) { write_topics(corpus, os); }));
      std::cout << "groups: " << corpus.groups.size()
                << ", messages: " << corpus.total_messages() << "\n";
      return kExitOk;
    }

    if (validate_cmd->parsed()) {
      Corpus corpus = load_corpus(corpus_path, topics_path, args.cfg, corpus_format);
      auto violations = validate(corpus);
      write_text(out_path,
                 render([&](std::ostream& os) { write_validation_json(violations, os); }));
      std::cout << "violations: " << violations.size() << "\n";
      return violations.empty() ? kExitOk : kExitViolations;
    }

    if (calibrate->parsed()) {
      Corpus corpus = load_corpus(corpus_path, topics_path, args.cfg, corpus_format);
      std::vector<std::int64_t> cand;
      for (const auto& tok : parse_keep_priority(candidates))
        cand.push_back(minutes_ms(std::stoll(tok)));
      auto rows = calibrate_window(corpus, cand, args.cfg.min_preceding);
      write_text(out_path,
                 render([&](std::ostream& os) { write_calibration_csv(rows, os); }));
      return kExitOk;
    }

    if (metrics->parsed()) {
      Corpus corpus = load_corpus(corpus_path, topics_path, args.cfg, corpus_format);
      auto records = run_pipeline(corpus, pipeline_config(args.cfg), args.cfg.threads);
      emit_metrics(records, out_path, format);
      std::size_t eligible = 0;
      for (const auto& r : records)
        if (r.eligible) ++eligible;
      std::cout << "eligible events: " << eligible << " of " << records.size() << "\n";
      return kExitOk;
    }

    if (cluster_cmd->parsed()) {
      std::ifstream in(records_path, std::ios::binary);
      if (!in) throw std::runtime_error("cannot read file: " + records_path);
      auto records = read_records_csv(in);
      auto stage = stage_cluster(records, args.cfg, args.keep_priority);
      fs::create_directories(out_dir);
      emit_cluster_stage(stage, out_dir);
      std::cout << "chosen k: " << stage.chosen_k << ", clusters: " << stage.mf.model.k
                << ", events: " << stage.events.size() << "\n";
      return kExitOk;
    }

    if (profile->parsed()) {
      std::ifstream rin(records_path, std::ios::binary);
      if (!rin) throw std::runtime_error("cannot read file: " + records_path);
      auto records = read_records_csv(rin);
      std::ifstream min(fs::path(model_dir) / "model.json");
      if (!min) throw std::runtime_error("cannot read model.json in " + model_dir);
      auto mf = read_model_json(min);
      std::ifstream ain(fs::path(model_dir) / "assignments.csv");
      if (!ain) throw std::runtime_error("cannot read assignments.csv in " + model_dir);
      auto assignments = read_assignments_csv(ain);
      auto events = clustered_events_from_files(records, mf, assignments);
      std::unordered_map<std::string, std::string> topics;
      if (!topics_path.empty()) {
        Corpus tmp;
        std::ifstream tin(topics_path, std::ios::binary);
        if (!tin) throw std::runtime_error("cannot read file: " + topics_path);
        load_topics(tmp, tin);
        topics = tmp.topics;
      }
      auto stage = stage_profile(events, mf, topics, args.cfg);
      fs::create_directories(out_dir);
      emit_profile_stage(stage, mf, out_dir);
      std::cout << "users: " << stage.summaries.users.size()
                << ", majority_fraction: " << fmt9(stage.summaries.majority_fraction)
                << "\n";
      return kExitOk;
    }

    if (graph->parsed()) {
      Corpus corpus = load_corpus(corpus_path, topics_path, args.cfg, corpus_format);
      std::ifstream uin(users_path, std::ios::binary);
      if (!uin) throw std::runtime_error("cannot read file: " + users_path);
      auto summaries = read_users_csv(uin);
      auto stage = stage_graph(corpus, summaries, args.cfg);
      fs::create_directories(out_dir);
      emit_graph_stage(stage, summaries, out_dir);
      std::cout << "graphs: " << stage.graphs.size()
                << ", pooled nodes: " << stage.report.nodes_used << "\n";
      return kExitOk;
    }

    if (regress->parsed()) {
      Corpus corpus = load_corpus(corpus_path, topics_path, args.cfg, corpus_format);
      std::ifstream uin(users_path, std::ios::binary);
      if (!uin) throw std::runtime_error("cannot read file: " + users_path);
      auto summaries = read_users_csv(uin);
      std::ifstream min(fs::path(model_dir) / "model.json");
      if (!min) throw std::runtime_error("cannot read model.json in " + model_dir);
      auto mf = read_model_json(min);
      auto topics = stage_regress(corpus, summaries, mf.retained, args.cfg);
      fs::create_directories(out_dir);
      emit_regress_stage(topics, out_dir);
      std::cout << "topics: " << topics.size() << "\n";
      return kExitOk;
    }

    if (report->parsed()) {
      const fs::path dir(out_dir);
      fs::create_directories(dir);
      Corpus corpus = load_corpus(corpus_path, topics_path, args.cfg, corpus_format);

      auto violations = validate(corpus);
      write_text(dir / "validation.json",
                 render([&](std::ostream& os) { write_validation_json(violations, os); }));
      if (!violations.empty()) {
        std::cerr << "corpus has " << violations.size()
                  << " violations; see validation.json\n";
        return kExitViolations;
      }

      auto records = run_pipeline(corpus, pipeline_config(args.cfg), args.cfg.threads);
      emit_metrics(records, dir / "records.csv", "csv");
      {
        // Staged commands consume the serialized records; the bundled run
        // round-trips through the same file so outputs match stage-by-stage.
        std::ifstream rin(dir / "records.csv", std::ios::binary);
        records = read_records_csv(rin);
      }

      auto cstage = stage_cluster(records, args.cfg, args.keep_priority);
      emit_cluster_stage(cstage, dir);

      auto pstage = stage_profile(cstage.events, cstage.mf, corpus.topics, args.cfg);
      emit_profile_stage(pstage, cstage.mf, dir);
      {
        std::ifstream uin(dir / "users.csv", std::ios::binary);
        pstage.summaries = read_users_csv(uin);
      }

      auto gstage = stage_graph(corpus, pstage.summaries, args.cfg);
      emit_graph_stage(gstage, pstage.summaries, dir);

      auto topics = stage_regress(corpus, pstage.summaries, cstage.mf.retained, args.cfg);
      emit_regress_stage(topics, dir);

      nlohmann::json manifest;
      nlohmann::json config_echo;
      for (const auto& [k, v] : args.cfg.echo()) config_echo[k] = v;
      manifest["config"] = config_echo;
      manifest["inputs"]["corpus"] = {{"path", corpus_path},
                                      {"fnv1a64", fnv1a64_hex(read_file(corpus_path))}};
      if (!topics_path.empty())
        manifest["inputs"]["topics"] = {{"path", topics_path},
                                        {"fnv1a64", fnv1a64_hex(read_file(topics_path))}};
      manifest["products"]["metrics"] = {"records.csv"};
      manifest["products"]["cluster"] = {"model.json", "assignments.csv", "profiles.csv",
                                         "inertia.csv", "correlation.csv"};
      manifest["products"]["profile"] = {"users.csv", "distances.csv", "transitions.csv",
                                         "radar.csv", "profile_summary.json"};
      manifest["products"]["graph"] = {"edges.csv", "nodes.csv", "eccdf.csv"};
      manifest["products"]["regress"] = {"regression.csv", "regression_summary.json"};
      manifest["products"]["validation"] = {"validation.json"};
      write_text(dir / "manifest.json", manifest.dump(2) + "\n");
      std::cout << "report written to " << out_dir << "\n";
      return kExitOk;
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const PagerankNonConvergence& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitOk;
}
