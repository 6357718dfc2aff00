#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "trackfm/cooc.hpp"
#include "trackfm/embedding.hpp"
#include "trackfm/eval.hpp"
#include "trackfm/fm.hpp"
#include "trackfm/ingest.hpp"

namespace trackfm {

enum class SnapshotFormat : uint8_t { binary, text };
const char* to_string(SnapshotFormat f);
SnapshotFormat snapshot_format_from_string(std::string_view s);

// --- event logs -------------------------------------------------------
//
// Tab-separated, one event per line:
//   user_id  track_id  event_kind  timestamp  listened_duration  track_duration
// An optional header line is detected by a non-numeric timestamp field.
// Unparseable lines are skipped and counted.

struct EventReadStats {
  uint64_t lines = 0;
  uint64_t skipped = 0;
  bool had_header = false;
};

std::vector<RawEvent> read_events_tsv(const std::filesystem::path& path,
                                      EventReadStats* stats = nullptr);
void write_events_tsv(const std::filesystem::path& path,
                      std::span<const RawEvent> events);

// --- positive interactions ---------------------------------------------
//
// Tab-separated: user_id, track_id, first_timestamp; canonical order is
// (user_id, first_timestamp, track_id).

std::vector<PositiveInteraction> read_interactions_tsv(
    const std::filesystem::path& path);
void write_interactions_tsv(const std::filesystem::path& path,
                            std::span<const PositiveInteraction> interactions);

// --- co-occurrence matrix ----------------------------------------------
//
// Header `#cooc v1 <num_tracks> <num_entries>`, a vocabulary block of
// `<index>\t<track_id>` lines, then `<i>\t<j>\t<weight>` entries with
// i < j (symmetry implied). Weights are printed with enough digits to
// round-trip exactly.

void write_cooc(const std::filesystem::path& path, const CoocMatrix& m);
CoocMatrix read_cooc(const std::filesystem::path& path);

// --- factorization-machine parameter snapshot ---------------------------
//
// Header `#fm v1 <n> <k> <C> <F> <binary|text>`, then one record per slot:
// the bias followed by the k vector components. Binary records are raw
// little-endian doubles.

struct FMSnapshot {
  FMParams params;
  uint32_t catalog_size = 0;
  uint32_t side_count = 0;
};

void write_fm_params(const std::filesystem::path& path, const FMParams& params,
                     uint32_t catalog_size, uint32_t side_count,
                     SnapshotFormat format = SnapshotFormat::binary);
FMSnapshot read_fm_params(const std::filesystem::path& path);

// --- embedding snapshot --------------------------------------------------
//
// Header `#emb v1 <count> <dim> <binary|text>`, then one record per track:
// the track id and dim values. Binary records are the id line followed by
// dim raw little-endian doubles.

void write_embeddings(const std::filesystem::path& path,
                      const EmbeddingSet& embeddings,
                      SnapshotFormat format = SnapshotFormat::binary);
EmbeddingSet read_embeddings(const std::filesystem::path& path);

// --- side features --------------------------------------------------------
//
// Tab-separated: track_id followed by one or more feature ids.

std::vector<std::pair<std::string, std::string>> read_side_features_tsv(
    const std::filesystem::path& path);
void write_side_features_tsv(
    const std::filesystem::path& path,
    std::span<const std::pair<std::string, std::string>> pairs);

// --- evaluation report ------------------------------------------------------
//
// TSV with columns bin, count, mpr; one row per nonempty bin and a final
// `avg` row.

void write_report_tsv(const std::filesystem::path& path, const EvalReport& r);
EvalReport read_report_tsv(const std::filesystem::path& path);

}  // namespace trackfm
