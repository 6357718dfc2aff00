#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>

#include "trackfm/config.hpp"
#include "trackfm/eval.hpp"

namespace trackfm {

// One JSON line per finished stage: name, wall time, input/output sizes,
// seed. Hooked up to a file and/or stderr by the caller.
using StageLogger = std::function<void(const std::string& json_line)>;

struct PipelineArtifacts {
  std::filesystem::path train_interactions;
  std::filesystem::path test_interactions;
  std::filesystem::path cooc;
  std::filesystem::path fm_params;
  std::filesystem::path embeddings;
  std::filesystem::path report;
  std::optional<std::filesystem::path> als_embeddings;
  std::optional<std::filesystem::path> als_report;
  std::filesystem::path log;
};

struct PipelineResult {
  PipelineArtifacts artifacts;
  EvalReport fm_report;
  std::optional<EvalReport> als_report;
};

// Runs ingest -> split -> cooc -> train -> embed -> eval (and the
// implicit-ALS leg when enabled) against one config. Every artifact is
// written under cfg.workdir; stage records are appended to
// workdir/pipeline.log.jsonl and to the extra logger when given. Stages
// never mutate their inputs; reruns with an identical config and seed
// produce byte-identical artifacts (threads == 1).
PipelineResult run_pipeline(const PipelineConfig& cfg,
                            const StageLogger& extra_logger = nullptr);

}  // namespace trackfm
