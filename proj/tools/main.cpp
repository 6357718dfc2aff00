// trackfm: turns raw listening logs into item-item track embeddings and
// evaluates them. Subcommands mirror the pipeline stages; `pipeline` runs
// everything against one config file.

#include <chrono>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "trackfm/als.hpp"
#include "trackfm/config.hpp"
#include "trackfm/embedding.hpp"
#include "trackfm/io.hpp"
#include "trackfm/pipeline.hpp"
#include "trackfm/synthetic.hpp"
#include "trackfm/trainer.hpp"

namespace {

using nlohmann::json;
using namespace trackfm;

// Exit codes: 0 ok, 1 internal, 2 usage, 3 io, 4 invalid config/input,
// 5 numeric failure.
enum ExitCode : int {
  kOk = 0,
  kInternal = 1,
  kUsage = 2,
  kIo = 3,
  kBadInput = 4,
  kNumeric = 5,
};

class Timer {
 public:
  Timer() : start_(std::chrono::steady_clock::now()) {}
  int64_t ms() const {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::steady_clock::now() - start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

void log_stage(const std::string& stage, int64_t wall_ms, json inputs,
               json outputs, uint64_t seed) {
  json record{{"stage", stage},
              {"wall_ms", wall_ms},
              {"inputs", std::move(inputs)},
              {"outputs", std::move(outputs)},
              {"seed", seed}};
  std::cerr << record.dump() << '\n';
}

template <typename F>
int run_guarded(F&& f) {
  try {
    f();
    return kOk;
  } catch (const IoError& e) {
    std::cerr << "trackfm: io error: " << e.what() << '\n';
    return kIo;
  } catch (const ConfigError& e) {
    std::cerr << "trackfm: config error: " << e.what() << '\n';
    return kBadInput;
  } catch (const DataError& e) {
    std::cerr << "trackfm: data error: " << e.what() << '\n';
    return kBadInput;
  } catch (const NumericError& e) {
    std::cerr << "trackfm: numeric error: " << e.what() << '\n';
    return kNumeric;
  } catch (const std::exception& e) {
    std::cerr << "trackfm: error: " << e.what() << '\n';
    return kInternal;
  }
}

// ---------------------------------------------------------------------------
// gen-synthetic: invoked as `trackfm --gen-synthetic key=value ...`

int run_gen_synthetic(const std::vector<std::string>& kvs) {
  return run_guarded([&] {
    SyntheticConfig cfg;
    std::string out;
    std::string side_out;
    for (const std::string& kv : kvs) {
      const size_t eq = kv.find('=');
      if (eq == std::string::npos) {
        throw ConfigError("--gen-synthetic expects key=value, got: " + kv);
      }
      const std::string key = kv.substr(0, eq);
      const std::string value = kv.substr(eq + 1);
      auto as_u32 = [&] { return static_cast<uint32_t>(std::stoul(value)); };
      auto as_i64 = [&] { return static_cast<int64_t>(std::stoll(value)); };
      if (key == "clusters") cfg.clusters = as_u32();
      else if (key == "tracks") cfg.tracks_per_cluster = as_u32();
      else if (key == "users") cfg.users = as_u32();
      else if (key == "leak") cfg.leak_probability = std::stod(value);
      else if (key == "events") cfg.events_per_user = as_u32();
      else if (key == "tail") cfg.tail_tracks_per_cluster = as_u32();
      else if (key == "carriers") cfg.carriers_per_tail = as_u32();
      else if (key == "creators") cfg.creators = value == "1" || value == "true";
      else if (key == "noise") cfg.noise_fraction = std::stod(value);
      else if (key == "zipf") cfg.zipf_exponent = std::stod(value);
      else if (key == "t0") cfg.t_begin = as_i64();
      else if (key == "t1") cfg.t_end = as_i64();
      else if (key == "split") cfg.split_point = std::stod(value);
      else if (key == "seed") cfg.seed = std::stoull(value);
      else if (key == "out") out = value;
      else if (key == "side-out") side_out = value;
      else throw ConfigError("--gen-synthetic: unknown key " + key);
    }
    if (out.empty()) throw ConfigError("--gen-synthetic: out=<path> is required");

    Timer timer;
    SyntheticCorpus corpus = generate_synthetic(cfg);
    write_events_tsv(out, corpus.events);
    if (!side_out.empty() && !corpus.track_creators.empty()) {
      write_side_features_tsv(side_out, corpus.track_creators);
    }
    log_stage("gen-synthetic", timer.ms(), {{"config", "inline"}},
              {{"events", corpus.events.size()},
               {"tracks", corpus.num_tracks}},
              cfg.seed);
    std::cout << "events=" << corpus.events.size()
              << " tracks=" << corpus.num_tracks
              << " suggested_split_timestamp=" << corpus.split_timestamp
              << '\n';
  });
}

// ---------------------------------------------------------------------------

struct IngestArgs {
  std::string events;
  std::string out;
  std::string config;
  std::string test_out;
  std::optional<uint64_t> seed;
  std::optional<int64_t> split_timestamp;
};

int run_ingest_cmd(const IngestArgs& a) {
  return run_guarded([&] {
    IngestConfig cfg;
    if (!a.config.empty()) {
      cfg = parse_pipeline_config(a.config).ingest;
    }
    if (a.seed) cfg.rng_seed = *a.seed;

    Timer timer;
    EventReadStats read_stats;
    auto events = read_events_tsv(a.events, &read_stats);
    IngestStats stats;
    auto interactions = run_ingest(events, cfg, &stats);
    json outputs{{"interactions", interactions.size()}};
    if (a.split_timestamp) {
      if (a.test_out.empty()) {
        throw ConfigError("--split-timestamp requires --test-out");
      }
      auto [train, test] =
          time_split(interactions, SplitConfig{*a.split_timestamp});
      write_interactions_tsv(a.out, train);
      write_interactions_tsv(a.test_out, test);
      outputs["train"] = train.size();
      outputs["test"] = test.size();
    } else {
      write_interactions_tsv(a.out, interactions);
    }
    log_stage("ingest", timer.ms(),
              {{"events", stats.events},
               {"skipped_lines", read_stats.skipped},
               {"malformed", stats.malformed}},
              std::move(outputs), cfg.rng_seed);
  });
}

struct CoocArgs {
  std::string interactions;
  std::string out;
  WindowConfig window;
  int threads = 1;
};

int run_cooc_cmd(const CoocArgs& a) {
  return run_guarded([&] {
    Timer timer;
    auto interactions = read_interactions_tsv(a.interactions);
    CoocMatrix m = build_cooc(interactions, a.window, a.threads);
    write_cooc(a.out, m);
    log_stage("cooc", timer.ms(), {{"interactions", interactions.size()}},
              {{"tracks", m.num_tracks()}, {"entries", m.num_entries()}},
              a.window.rng_seed);
  });
}

struct TrainArgs {
  std::string cooc;
  std::string side_features;
  std::string out;
  std::string emb_out;
  TrainConfig cfg;
  ComposeMode compose = ComposeMode::track_plus_side;
  SnapshotFormat format = SnapshotFormat::binary;
};

int run_train_cmd(const TrainArgs& a) {
  return run_guarded([&] {
    Timer timer;
    CoocMatrix cooc = read_cooc(a.cooc);
    FeatureSpace space;
    uint64_t ignored = 0;
    if (!a.side_features.empty()) {
      auto side_pairs = read_side_features_tsv(a.side_features);
      space = make_feature_space(cooc.vocab(), side_pairs, &ignored);
    } else {
      space = make_feature_space(cooc.vocab());
    }
    Trainer trainer(cooc, space, a.cfg);
    auto losses = trainer.train();
    write_fm_params(a.out, trainer.params(), space.catalog_size(),
                    space.side_count(), a.format);
    if (!a.emb_out.empty()) {
      auto emb = compose_final_vectors(trainer.params(), space, a.compose);
      write_embeddings(a.emb_out, emb, a.format);
    }
    log_stage("train", timer.ms(),
              {{"pairs", cooc.num_entries()},
               {"side_features", space.side_count()},
               {"ignored_side_rows", ignored}},
              {{"slots", space.slot_count()},
               {"dim", a.cfg.k},
               {"epoch_loss", losses}},
              a.cfg.rng_seed);
  });
}

struct TrainAlsArgs {
  std::string interactions;
  std::string out;
  AlsConfig cfg;
  SnapshotFormat format = SnapshotFormat::binary;
};

int run_train_als_cmd(const TrainAlsArgs& a) {
  return run_guarded([&] {
    Timer timer;
    auto interactions = read_interactions_tsv(a.interactions);
    auto matrix = InteractionMatrix::from_interactions(interactions);
    std::vector<double> curve;
    ImplicitModel model = train_als(matrix, a.cfg, &curve);
    if (model.alpha_conf == 0.0) {
      std::cerr << "trackfm: warning: alpha is 0 (fully dense interactions?)\n";
    }
    EmbeddingSet emb = item_embeddings(matrix, model);
    write_embeddings(a.out, emb, a.format);
    log_stage("train-als", timer.ms(),
              {{"users", matrix.users.size()},
               {"tracks", matrix.tracks.size()},
               {"observed", matrix.observed}},
              {{"alpha", model.alpha_conf}, {"objective", curve}},
              a.cfg.rng_seed);
  });
}

struct EvalArgs {
  std::string embeddings;
  std::string test;
  std::string train_cooc;
  std::string out;
  std::string bins;
  WindowConfig window;
  EvalConfig cfg;
  uint32_t subsample = 0;
  int threads = 1;
};

int run_eval_cmd(EvalArgs a) {
  return run_guarded([&] {
    if (!a.bins.empty()) a.cfg.bin_edges = parse_bin_edges(a.bins);
    if (a.subsample > 0) a.cfg.max_eval_tracks_per_query = a.subsample;
    Timer timer;
    EmbeddingSet emb = read_embeddings(a.embeddings);
    auto test = read_interactions_tsv(a.test);
    CoocMatrix train_cooc = read_cooc(a.train_cooc);
    EvalDiagnostics diag;
    EvalReport report =
        evaluate(test, a.window, train_cooc, emb, a.cfg, a.threads, &diag);
    write_report_tsv(a.out, report);
    log_stage("eval", timer.ms(),
              {{"test_interactions", test.size()},
               {"skipped_no_embedding", diag.skipped_no_embedding},
               {"skipped_no_candidates", diag.skipped_no_candidates}},
              {{"evaluated", report.evaluated_tracks},
               {"overall_mpr", report.overall_mpr}},
              a.cfg.rng_seed);
    for (const BinResult& b : report.bins) {
      std::cout << b.edge << '\t' << b.track_count << '\t' << b.mpr << '\n';
    }
    std::cout << "avg\t" << report.evaluated_tracks << '\t'
              << report.overall_mpr << '\n';
  });
}

struct QueryArgs {
  std::string embeddings;
  std::string track;
  uint32_t n = 10;
};

int run_query_cmd(const QueryArgs& a) {
  return run_guarded([&] {
    EmbeddingSet emb = read_embeddings(a.embeddings);
    auto ranked = top_n_similar(a.track, a.n, emb);
    for (const auto& [track, cos] : ranked) {
      std::cout << track << '\t' << cos << '\n';
    }
  });
}

struct PipelineArgs {
  std::string config;
  std::optional<std::string> events;
  std::optional<std::string> workdir;
  std::optional<std::string> side_features;
  std::optional<uint64_t> seed;
  std::optional<int> threads;
  std::optional<uint32_t> dim;
  std::optional<uint32_t> epochs;
  std::optional<std::string> loss;
  std::optional<int64_t> split_timestamp;
  std::optional<bool> als;
  bool quiet = false;
};

int run_pipeline_cmd(const PipelineArgs& a) {
  return run_guarded([&] {
    PipelineConfig cfg = parse_pipeline_config(a.config);
    // Flags take precedence over config-file values.
    if (a.events) cfg.events = *a.events;
    if (a.workdir) cfg.workdir = *a.workdir;
    if (a.side_features) cfg.side_features = *a.side_features;
    if (a.seed) cfg.seed = *a.seed;
    if (a.threads) cfg.threads = *a.threads;
    if (a.dim) cfg.train.k = *a.dim;
    if (a.epochs) cfg.train.epochs = *a.epochs;
    if (a.loss) cfg.train.loss = loss_from_string(*a.loss);
    if (a.split_timestamp) cfg.split_timestamp = *a.split_timestamp;
    if (a.als) cfg.als_enabled = *a.als;
    cfg.propagate_globals();

    StageLogger logger;
    if (!a.quiet) {
      logger = [](const std::string& line) { std::cerr << line << '\n'; };
    }
    PipelineResult result = run_pipeline(cfg, logger);
    std::cout << "report=" << result.artifacts.report.string()
              << " overall_mpr=" << result.fm_report.overall_mpr;
    if (result.als_report) {
      std::cout << " als_overall_mpr=" << result.als_report->overall_mpr;
    }
    std::cout << '\n';
  });
}

void add_window_flags(CLI::App* cmd, WindowConfig& window, std::string& mode,
                      std::string& weighting) {
  cmd->add_option("--radius", window.radius_tracks,
                  "Window radius in tracks (track mode)");
  cmd->add_option("--radius-seconds", window.radius_seconds,
                  "Window radius in seconds (time mode)");
  cmd->add_option("--mode", mode, "Window mode: track|time")
      ->default_val("track");
  cmd->add_option("--weighting", weighting,
                  "Pair weighting: uniform|inverse_distance")
      ->default_val("uniform");
}

}  // namespace

int main(int argc, char** argv) {
  // `--gen-synthetic key=value ...` bypasses subcommand parsing.
  if (argc > 1 && std::string(argv[1]) == "--gen-synthetic") {
    std::vector<std::string> kvs;
    for (int i = 2; i < argc; ++i) kvs.emplace_back(argv[i]);
    return run_gen_synthetic(kvs);
  }

  CLI::App app{
      "trackfm: item-item track embeddings from music listening logs"};
  app.require_subcommand(1);

  // ingest
  IngestArgs ingest_args;
  auto* ingest_cmd = app.add_subcommand(
      "ingest", "Merge raw events into positive interactions");
  ingest_cmd->add_option("--events", ingest_args.events, "Raw event TSV")
      ->required();
  ingest_cmd->add_option("--out", ingest_args.out, "Output interactions TSV")
      ->required();
  ingest_cmd->add_option("--config", ingest_args.config,
                         "Config file ([ingest] section)");
  ingest_cmd->add_option("--seed", ingest_args.seed, "Sampling seed");
  ingest_cmd->add_option("--split-timestamp", ingest_args.split_timestamp,
                         "Also split at this timestamp");
  ingest_cmd->add_option("--test-out", ingest_args.test_out,
                         "Test-set output for --split-timestamp");

  // cooc
  CoocArgs cooc_args;
  std::string cooc_mode, cooc_weighting;
  auto* cooc_cmd = app.add_subcommand(
      "cooc", "Build the track-track co-occurrence matrix");
  cooc_cmd->add_option("--interactions", cooc_args.interactions,
                       "Interactions TSV")->required();
  cooc_cmd->add_option("--out", cooc_args.out, "Output matrix file")
      ->required();
  add_window_flags(cooc_cmd, cooc_args.window, cooc_mode, cooc_weighting);
  cooc_cmd->add_option("--threads", cooc_args.threads, "Worker threads");

  // train
  TrainArgs train_args;
  std::string train_loss = "logistic";
  std::string train_pos_weight = "unit";
  std::string train_compose = "track_plus_side";
  std::string train_format = "binary";
  auto* train_cmd = app.add_subcommand(
      "train", "Train the factorization machine on a co-occurrence matrix");
  train_cmd->add_option("--cooc", train_args.cooc, "Co-occurrence matrix file")
      ->required();
  train_cmd->add_option("--side-features", train_args.side_features,
                        "Side feature TSV (track_id -> feature ids)");
  train_cmd->add_option("--out", train_args.out, "Parameter snapshot path")
      ->required();
  train_cmd->add_option("--emb-out", train_args.emb_out,
                        "Also write composed track embeddings here");
  train_cmd->add_option("--loss", train_loss, "Loss: logistic|squared");
  train_cmd->add_option("--neg", train_args.cfg.negatives_per_positive,
                        "Negative samples per positive");
  train_cmd->add_option("--smoothing", train_args.cfg.smoothing_exponent,
                        "Negative-sampling smoothing exponent");
  train_cmd->add_option("--dim", train_args.cfg.k, "Latent dimension");
  train_cmd->add_option("--epochs", train_args.cfg.epochs, "Training epochs");
  train_cmd->add_option("--lr", train_args.cfg.learning_rate,
                        "Base learning rate");
  train_cmd->add_option("--l1", train_args.cfg.lambda1,
                        "Bias regularization weight");
  train_cmd->add_option("--l2", train_args.cfg.lambda2,
                        "Vector regularization weight");
  train_cmd->add_option("--seed", train_args.cfg.rng_seed, "RNG seed");
  train_cmd->add_option("--pos-weight", train_pos_weight,
                        "Positive instance weight: unit|cooc_weight");
  train_cmd->add_flag("--include-context-side",
                      train_args.cfg.include_context_side,
                      "Attach the context track's side features too");
  train_cmd->add_option("--compose", train_compose,
                        "Embedding composition mode");
  train_cmd->add_option("--format", train_format, "Snapshot format");
  train_cmd->add_option("--threads", train_args.cfg.threads,
                        "Worker threads (> 1 is nondeterministic)");

  // train-als
  TrainAlsArgs als_args;
  std::string als_format = "binary";
  double als_alpha = -1.0;
  auto* als_cmd = app.add_subcommand(
      "train-als", "Train the implicit-feedback ALS baseline");
  als_cmd->add_option("--interactions", als_args.interactions,
                      "Interactions TSV")->required();
  als_cmd->add_option("--out", als_args.out, "Item embedding snapshot path")
      ->required();
  als_cmd->add_option("--dim", als_args.cfg.k, "Latent dimension");
  als_cmd->add_option("--sweeps", als_args.cfg.sweeps, "ALS sweeps");
  als_cmd->add_option("--l2", als_args.cfg.lambda, "Regularization");
  als_cmd->add_option("--alpha", als_alpha,
                      "Confidence scale (balanced automatically when unset)");
  als_cmd->add_option("--seed", als_args.cfg.rng_seed, "RNG seed");
  als_cmd->add_option("--threads", als_args.cfg.threads, "Worker threads");
  als_cmd->add_option("--format", als_format, "Snapshot format");

  // eval
  EvalArgs eval_args;
  std::string eval_mode, eval_weighting;
  auto* eval_cmd = app.add_subcommand(
      "eval", "Binned mean-percentile-rank evaluation");
  eval_cmd->add_option("--embeddings", eval_args.embeddings,
                       "Embedding snapshot")->required();
  eval_cmd->add_option("--test", eval_args.test, "Test interactions TSV")
      ->required();
  eval_cmd->add_option("--train-cooc", eval_args.train_cooc,
                       "Train co-occurrence matrix (for binning)")
      ->required();
  eval_cmd->add_option("--bins", eval_args.bins,
                       "Comma-separated ascending bin edges");
  eval_cmd->add_option("--out", eval_args.out, "Report TSV path")->required();
  add_window_flags(eval_cmd, eval_args.window, eval_mode, eval_weighting);
  eval_cmd->add_option("--subsample", eval_args.subsample,
                       "Max candidate tracks per query (0 = exact)");
  eval_cmd->add_option("--seed", eval_args.cfg.rng_seed, "Subsampling seed");
  eval_cmd->add_option("--threads", eval_args.threads, "Worker threads");

  // query
  QueryArgs query_args;
  auto* query_cmd = app.add_subcommand(
      "query", "Top-N most similar tracks by cosine");
  query_cmd->add_option("--embeddings", query_args.embeddings,
                        "Embedding snapshot")->required();
  query_cmd->add_option("--track", query_args.track, "Query track id")
      ->required();
  query_cmd->add_option("--n", query_args.n, "Number of results");

  // pipeline
  PipelineArgs pipe_args;
  auto* pipe_cmd = app.add_subcommand(
      "pipeline", "Run ingest -> cooc -> train -> eval against one config");
  auto* config_opt = pipe_cmd->add_option("--config", pipe_args.config,
                                          "Pipeline config file");
  if (const char* env = std::getenv("TRACKFM_CONFIG")) {
    pipe_args.config = env;
  } else {
    config_opt->required();
  }
  pipe_cmd->add_option("--events", pipe_args.events, "Override paths.events");
  pipe_cmd->add_option("--workdir", pipe_args.workdir,
                       "Override paths.workdir");
  pipe_cmd->add_option("--side-features", pipe_args.side_features,
                       "Override paths.side_features");
  pipe_cmd->add_option("--seed", pipe_args.seed, "Override global.seed");
  pipe_cmd->add_option("--threads", pipe_args.threads,
                       "Override global.threads");
  pipe_cmd->add_option("--dim", pipe_args.dim, "Override train.dim");
  pipe_cmd->add_option("--epochs", pipe_args.epochs, "Override train.epochs");
  pipe_cmd->add_option("--loss", pipe_args.loss, "Override train.loss");
  pipe_cmd->add_option("--split-timestamp", pipe_args.split_timestamp,
                       "Override split.timestamp");
  pipe_cmd->add_option("--als", pipe_args.als, "Override als.enabled");
  pipe_cmd->add_flag("--quiet", pipe_args.quiet,
                     "Suppress stage logs on stderr");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  if (ingest_cmd->parsed()) return run_ingest_cmd(ingest_args);
  if (cooc_cmd->parsed()) {
    int rc = run_guarded([&] {
      cooc_args.window.mode = window_mode_from_string(cooc_mode);
      cooc_args.window.weighting = weighting_from_string(cooc_weighting);
    });
    return rc != kOk ? rc : run_cooc_cmd(cooc_args);
  }
  if (train_cmd->parsed()) {
    int rc = run_guarded([&] {
      train_args.cfg.loss = loss_from_string(train_loss);
      train_args.cfg.positive_weight =
          positive_weight_from_string(train_pos_weight);
      train_args.compose = compose_mode_from_string(train_compose);
      train_args.format = snapshot_format_from_string(train_format);
    });
    return rc != kOk ? rc : run_train_cmd(train_args);
  }
  if (als_cmd->parsed()) {
    int rc = run_guarded([&] {
      als_args.format = snapshot_format_from_string(als_format);
      if (als_alpha >= 0.0) als_args.cfg.alpha = als_alpha;
    });
    return rc != kOk ? rc : run_train_als_cmd(als_args);
  }
  if (eval_cmd->parsed()) {
    int rc = run_guarded([&] {
      eval_args.window.mode = window_mode_from_string(eval_mode);
      eval_args.window.weighting = weighting_from_string(eval_weighting);
    });
    return rc != kOk ? rc : run_eval_cmd(eval_args);
  }
  if (query_cmd->parsed()) return run_query_cmd(query_args);
  if (pipe_cmd->parsed()) return run_pipeline_cmd(pipe_args);
  return kUsage;
}
