#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "trackfm/als.hpp"
#include "trackfm/cooc.hpp"
#include "trackfm/eval.hpp"
#include "trackfm/ingest.hpp"
#include "trackfm/io.hpp"
#include "trackfm/trainer.hpp"

namespace trackfm {

// Everything one experiment needs, parsed from a sectioned key-value
// config file. Flags override file values; every section validates its
// module's invariants before any stage starts.
struct PipelineConfig {
  // [paths]
  std::filesystem::path events;
  std::filesystem::path workdir = "out";
  std::optional<std::filesystem::path> side_features;

  // [global]
  uint64_t seed = 42;
  int threads = 1;
  SnapshotFormat format = SnapshotFormat::binary;

  // [ingest]
  IngestConfig ingest;

  // [split]
  int64_t split_timestamp = 0;

  // [window]
  WindowConfig window;

  // [train]
  TrainConfig train;
  ComposeMode compose = ComposeMode::track_plus_side;

  // [als]
  bool als_enabled = false;
  AlsConfig als;

  // [eval]
  EvalConfig eval;

  void validate() const;
  // Pushes the global seed/threads into the per-module configs.
  void propagate_globals();
};

PipelineConfig parse_pipeline_config(const std::filesystem::path& path);
PipelineConfig parse_pipeline_config_text(const std::string& text);

// Shared enum spellings used by the config file and the CLI flags.
WindowMode window_mode_from_string(std::string_view s);
const char* to_string(WindowMode m);
Weighting weighting_from_string(std::string_view s);
const char* to_string(Weighting w);
Loss loss_from_string(std::string_view s);
const char* to_string(Loss l);
PositiveWeight positive_weight_from_string(std::string_view s);
const char* to_string(PositiveWeight p);
ComposeMode compose_mode_from_string(std::string_view s);
const char* to_string(ComposeMode m);

std::vector<uint64_t> parse_bin_edges(std::string_view csv);

}  // namespace trackfm
