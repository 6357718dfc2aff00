#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "trackfm/cooc.hpp"
#include "trackfm/embedding.hpp"
#include "trackfm/ingest.hpp"

namespace trackfm {

struct SplitConfig {
  int64_t split_timestamp = 0;
};

// Splits interactions at the timestamp: strictly earlier go to train, the
// rest to test, and every (user, track) pair already present in train is
// removed from test. Input order is preserved on both sides.
std::pair<std::vector<PositiveInteraction>, std::vector<PositiveInteraction>>
time_split(std::span<const PositiveInteraction> interactions,
           const SplitConfig& cfg);

struct EvalConfig {
  // Upper-inclusive bin edges over a track's total train occurrences;
  // tracks above the last edge fall into the last bin.
  std::vector<uint64_t> bin_edges = {5, 10, 20, 50, 100, 1000, 5000, 15000};
  // Optional cap on the candidate set per query (seeded subsample);
  // disabled by default.
  std::optional<uint32_t> max_eval_tracks_per_query;
  uint64_t rng_seed = 42;

  void validate() const;
};

struct BinResult {
  uint64_t edge = 0;
  uint64_t track_count = 0;
  double mpr = 0.0;
};

struct EvalReport {
  std::vector<BinResult> bins;  // nonempty bins, ascending by edge
  double overall_mpr = 0.0;
  uint64_t evaluated_tracks = 0;
};

struct EvalDiagnostics {
  uint64_t skipped_no_embedding = 0;  // evaluated track or all its context missing
  uint64_t skipped_no_candidates = 0; // everything else was context
};

// Percentile rank of track a against its context set b: the fraction of
// (b, i) comparisons where a non-context track i is at least as close to
// a as b is, counting exact similarity ties as half. 0 is perfect, 0.5 is
// random. The candidate set i is the embedding vocabulary minus b and a.
// Throws NumericError (naming the track) on zero-norm embeddings.
double percentile_rank(const std::string& track_id,
                       std::span<const std::string> context_ids,
                       const EmbeddingSet& embeddings);

// MPR evaluation over a test interaction set. Context pairs are derived
// from the test interactions with the same windowing used for training;
// each evaluated track is binned by its total train occurrence count.
// Tracks or contexts absent from the embeddings are skipped and counted
// in the diagnostics.
EvalReport evaluate(std::span<const PositiveInteraction> test_interactions,
                    const WindowConfig& window, const CoocMatrix& train_cooc,
                    const EmbeddingSet& embeddings, const EvalConfig& cfg,
                    int threads = 1, EvalDiagnostics* diag = nullptr);

// Bin index in cfg.bin_edges for a train occurrence count: the smallest
// edge >= count, or the last bin when the count exceeds every edge.
size_t bin_for_count(double count, const EvalConfig& cfg);

}  // namespace trackfm
