#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "trackfm/common.hpp"

namespace trackfm {

enum class EventKind : uint8_t {
  play,
  like,
  share,
  playlist_add,
  other_positive,  // any further explicit positive action (comment, repost, ...)
};

// True for event kinds that are a strong positive signal on their own.
inline bool is_strong_positive(EventKind k) { return k != EventKind::play; }

const char* to_string(EventKind k);
EventKind event_kind_from_string(std::string_view s);

// One user action on one track.
struct RawEvent {
  std::string user_id;
  std::string track_id;
  EventKind kind = EventKind::play;
  int64_t timestamp = 0;          // seconds since epoch
  int64_t listened_duration = 0;  // seconds, 0 for non-play events
  int64_t track_duration = 0;     // seconds, > 0 for play events
};

// A (user, track) pair that survived the positivity filters. At most one
// per pair; first_timestamp is the interaction start time.
struct PositiveInteraction {
  std::string user_id;
  std::string track_id;
  int64_t first_timestamp = 0;
};

struct IngestConfig {
  uint32_t min_items_per_user = 5;
  uint32_t min_users_per_item = 5;
  uint32_t max_interactions_per_item = 10000;
  double full_listen_fraction = 0.5;  // strict majority threshold, in (0, 1]
  int64_t full_listen_absolute = 1200;
  uint64_t rng_seed = 42;

  void validate() const;
};

struct IngestStats {
  uint64_t events = 0;
  uint64_t malformed = 0;
  uint64_t merged_pairs = 0;          // distinct (user, track) pairs seen
  uint64_t positives = 0;             // pairs surviving the merge rules
  uint64_t removed_by_floors = 0;
  uint64_t removed_by_sampling = 0;
};

// Field-level sanity of a single event. Plays need a positive track
// duration and listened <= duration.
bool event_is_wellformed(const RawEvent& e);

// A play counts as a full listen when it strictly exceeds the fraction
// threshold or reaches the absolute one. Throws MalformedEvent when the
// duration fields are inconsistent.
bool is_full_listen(int64_t listened_duration, int64_t track_duration,
                    const IngestConfig& cfg);

// Merges all events one user performed on one track. Positive iff some
// event is a strong positive, or the track was fully listened to at least
// twice. first_timestamp is the earliest event that contributed positive
// evidence. Empty input merges to nothing.
std::optional<PositiveInteraction> merge_user_track_events(
    std::span<const RawEvent> events, const IngestConfig& cfg);

// Repeatedly drops users below min_items_per_user and tracks below
// min_users_per_item until neither rule fires; the result is the maximal
// subset satisfying both floors.
std::vector<PositiveInteraction> apply_count_floors(
    std::vector<PositiveInteraction> interactions, const IngestConfig& cfg);

// Caps every track at max_interactions_per_item by keeping a uniform
// random subset. Seeded per track (seed mixed with a hash of the track
// id), so the result does not depend on input order or on other tracks.
//
// Procedure, exactly: sort the track's interactions by user_id, then run
// a partial Fisher-Yates over them with SplitMix64 seeded by
// mix64(rng_seed, fnv1a64(track_id)), keeping the first
// max_interactions_per_item slots.
std::vector<PositiveInteraction> sample_per_item(
    std::vector<PositiveInteraction> interactions, const IngestConfig& cfg);

// Full pipeline: validate -> merge -> floors -> per-item sampling.
// Output is sorted by (user_id, first_timestamp, track_id). Malformed
// events are skipped and counted, never fatal.
std::vector<PositiveInteraction> run_ingest(std::span<const RawEvent> events,
                                            const IngestConfig& cfg,
                                            IngestStats* stats = nullptr);

// Canonical output order.
void sort_interactions(std::vector<PositiveInteraction>& interactions);

}  // namespace trackfm
