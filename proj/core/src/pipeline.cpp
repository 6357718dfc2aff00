#include "trackfm/pipeline.hpp"

#include <chrono>
#include <fstream>

#include <json.hpp>

#include "trackfm/als.hpp"
#include "trackfm/embedding.hpp"
#include "trackfm/trainer.hpp"

namespace trackfm {

namespace {

using nlohmann::json;

class StageClock {
 public:
  StageClock() : start_(std::chrono::steady_clock::now()) {}
  int64_t elapsed_ms() const {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::steady_clock::now() - start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

}  // namespace

PipelineResult run_pipeline(const PipelineConfig& cfg,
                            const StageLogger& extra_logger) {
  cfg.validate();
  std::filesystem::create_directories(cfg.workdir);

  PipelineResult result;
  auto& art = result.artifacts;
  art.train_interactions = cfg.workdir / "interactions_train.tsv";
  art.test_interactions = cfg.workdir / "interactions_test.tsv";
  art.cooc = cfg.workdir / "cooc.txt";
  art.fm_params = cfg.workdir / "fm_params.snapshot";
  art.embeddings = cfg.workdir / "embeddings.snapshot";
  art.report = cfg.workdir / "report.tsv";
  art.log = cfg.workdir / "pipeline.log.jsonl";

  std::ofstream log_file(art.log, std::ios::trunc);
  if (!log_file) throw IoError("cannot open log: " + art.log.string());
  auto log_stage = [&](json record) {
    record["seed"] = cfg.seed;
    const std::string line = record.dump();
    log_file << line << '\n';
    log_file.flush();
    if (extra_logger) extra_logger(line);
  };

  // ingest: events -> positive interactions -> time split
  std::vector<PositiveInteraction> train, test;
  {
    StageClock clock;
    EventReadStats read_stats;
    auto events = read_events_tsv(cfg.events, &read_stats);
    IngestStats stats;
    auto interactions = run_ingest(events, cfg.ingest, &stats);
    std::tie(train, test) =
        time_split(interactions, SplitConfig{cfg.split_timestamp});
    write_interactions_tsv(art.train_interactions, train);
    write_interactions_tsv(art.test_interactions, test);
    log_stage(json{{"stage", "ingest"},
                   {"wall_ms", clock.elapsed_ms()},
                   {"inputs", {{"events", stats.events},
                               {"skipped_lines", read_stats.skipped},
                               {"malformed", stats.malformed}}},
                   {"outputs", {{"positives", stats.positives},
                                {"after_floors",
                                 stats.positives - stats.removed_by_floors},
                                {"train", train.size()},
                                {"test", test.size()}}}});
  }

  // cooc: sliding-window counting over the train interactions
  CoocMatrix cooc;
  {
    StageClock clock;
    cooc = build_cooc(train, cfg.window, cfg.threads);
    write_cooc(art.cooc, cooc);
    log_stage(json{{"stage", "cooc"},
                   {"wall_ms", clock.elapsed_ms()},
                   {"inputs", {{"interactions", train.size()}}},
                   {"outputs", {{"tracks", cooc.num_tracks()},
                                {"entries", cooc.num_entries()}}}});
  }

  // train: factorization machine over the observed pairs
  EmbeddingSet embeddings;
  {
    StageClock clock;
    FeatureSpace space;
    uint64_t ignored_side = 0;
    if (cfg.side_features) {
      auto side_pairs = read_side_features_tsv(*cfg.side_features);
      space = make_feature_space(cooc.vocab(), side_pairs, &ignored_side);
    } else {
      space = make_feature_space(cooc.vocab());
    }
    Trainer trainer(cooc, space, cfg.train);
    auto epoch_losses = trainer.train();
    write_fm_params(art.fm_params, trainer.params(), space.catalog_size(),
                    space.side_count(), cfg.format);
    embeddings = compose_final_vectors(trainer.params(), space, cfg.compose);
    write_embeddings(art.embeddings, embeddings, cfg.format);
    log_stage(json{{"stage", "train"},
                   {"wall_ms", clock.elapsed_ms()},
                   {"inputs", {{"pairs", cooc.num_entries()},
                               {"side_features", space.side_count()},
                               {"ignored_side_rows", ignored_side}}},
                   {"outputs", {{"slots", space.slot_count()},
                                {"dim", cfg.train.k},
                                {"epoch_loss", epoch_losses}}}});
  }

  // train-als: implicit-feedback baseline on the same split
  std::optional<EmbeddingSet> als_emb;
  if (cfg.als_enabled) {
    StageClock clock;
    art.als_embeddings = cfg.workdir / "als_embeddings.snapshot";
    auto matrix = InteractionMatrix::from_interactions(train);
    std::vector<double> curve;
    ImplicitModel model = train_als(matrix, cfg.als, &curve);
    als_emb = item_embeddings(matrix, model);
    write_embeddings(*art.als_embeddings, *als_emb, cfg.format);
    log_stage(json{{"stage", "train-als"},
                   {"wall_ms", clock.elapsed_ms()},
                   {"inputs", {{"users", matrix.users.size()},
                               {"tracks", matrix.tracks.size()},
                               {"observed", matrix.observed}}},
                   {"outputs", {{"alpha", model.alpha_conf},
                                {"objective", curve}}}});
  }

  // eval: binned mean percentile rank on the held-out windows
  {
    StageClock clock;
    EvalDiagnostics diag;
    result.fm_report = evaluate(test, cfg.window, cooc, embeddings, cfg.eval,
                                cfg.threads, &diag);
    write_report_tsv(art.report, result.fm_report);
    json record{{"stage", "eval"},
                {"wall_ms", clock.elapsed_ms()},
                {"inputs", {{"test_interactions", test.size()},
                            {"skipped_no_embedding", diag.skipped_no_embedding},
                            {"skipped_no_candidates",
                             diag.skipped_no_candidates}}},
                {"outputs", {{"evaluated", result.fm_report.evaluated_tracks},
                             {"overall_mpr", result.fm_report.overall_mpr}}}};
    if (als_emb) {
      art.als_report = cfg.workdir / "report_als.tsv";
      EvalDiagnostics als_diag;
      result.als_report = evaluate(test, cfg.window, cooc, *als_emb, cfg.eval,
                                   cfg.threads, &als_diag);
      write_report_tsv(*art.als_report, *result.als_report);
      record["outputs"]["als_overall_mpr"] = result.als_report->overall_mpr;
    }
    log_stage(std::move(record));
  }

  return result;
}

}  // namespace trackfm
