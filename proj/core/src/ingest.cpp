#include "trackfm/ingest.hpp"

#include <algorithm>
#include <limits>
#include <unordered_map>
#include <unordered_set>

#include "trackfm/random.hpp"

namespace trackfm {

const char* to_string(EventKind k) {
  switch (k) {
    case EventKind::play: return "play";
    case EventKind::like: return "like";
    case EventKind::share: return "share";
    case EventKind::playlist_add: return "playlist_add";
    case EventKind::other_positive: return "other_positive";
  }
  return "?";
}

EventKind event_kind_from_string(std::string_view s) {
  if (s == "play") return EventKind::play;
  if (s == "like") return EventKind::like;
  if (s == "share") return EventKind::share;
  if (s == "playlist_add") return EventKind::playlist_add;
  // Unknown explicit actions (comment, repost, ...) all count as strong
  // positives.
  return EventKind::other_positive;
}

void IngestConfig::validate() const {
  if (min_items_per_user < 1 || min_users_per_item < 1 ||
      max_interactions_per_item < 1) {
    throw ConfigError("ingest: all count floors/caps must be >= 1");
  }
  if (!(full_listen_fraction > 0.0) || full_listen_fraction > 1.0) {
    throw ConfigError("ingest: full_listen_fraction must be in (0, 1]");
  }
  if (full_listen_absolute <= 0) {
    throw ConfigError("ingest: full_listen_absolute must be > 0");
  }
}

bool event_is_wellformed(const RawEvent& e) {
  if (e.timestamp < 0 || e.listened_duration < 0 || e.track_duration < 0)
    return false;
  if (e.kind == EventKind::play) {
    if (e.track_duration <= 0) return false;
    if (e.listened_duration > e.track_duration) return false;
  }
  return true;
}

bool is_full_listen(int64_t listened_duration, int64_t track_duration,
                    const IngestConfig& cfg) {
  if (track_duration <= 0 || listened_duration < 0 ||
      listened_duration > track_duration) {
    throw MalformedEvent("inconsistent play durations: listened=" +
                         std::to_string(listened_duration) + " track=" +
                         std::to_string(track_duration));
  }
  // Strict majority, so an exactly-half listen does not qualify.
  if (static_cast<double>(listened_duration) >
      cfg.full_listen_fraction * static_cast<double>(track_duration)) {
    return true;
  }
  return listened_duration >= cfg.full_listen_absolute;
}

std::optional<PositiveInteraction> merge_user_track_events(
    std::span<const RawEvent> events, const IngestConfig& cfg) {
  if (events.empty()) return std::nullopt;
  const std::string& user = events.front().user_id;
  const std::string& track = events.front().track_id;
  for (const RawEvent& e : events) {
    if (e.user_id != user || e.track_id != track) {
      throw DataError("merge_user_track_events: mixed (user, track) group");
    }
  }

  constexpr int64_t kNever = std::numeric_limits<int64_t>::max();
  int full_listens = 0;
  int64_t first_full = kNever;
  int64_t first_strong = kNever;
  for (const RawEvent& e : events) {
    if (is_strong_positive(e.kind)) {
      first_strong = std::min(first_strong, e.timestamp);
    } else if (is_full_listen(e.listened_duration, e.track_duration, cfg)) {
      ++full_listens;
      first_full = std::min(first_full, e.timestamp);
    }
  }

  // A single full listen might have happened unintentionally; it only
  // becomes evidence once the track was fully listened to more than once.
  int64_t first = kNever;
  if (first_strong != kNever) first = first_strong;
  if (full_listens >= 2) first = std::min(first, first_full);
  if (first == kNever) return std::nullopt;
  return PositiveInteraction{user, track, first};
}

std::vector<PositiveInteraction> apply_count_floors(
    std::vector<PositiveInteraction> interactions, const IngestConfig& cfg) {
  // Interactions are unique per (user, track), so plain multiplicities
  // equal distinct counts. Simultaneous removal per round, repeated until
  // nothing changes, lands on the maximal subset meeting both floors.
  bool changed = true;
  while (changed && !interactions.empty()) {
    std::unordered_map<std::string, uint32_t> user_items;
    std::unordered_map<std::string, uint32_t> item_users;
    for (const auto& pi : interactions) {
      ++user_items[pi.user_id];
      ++item_users[pi.track_id];
    }
    std::vector<PositiveInteraction> kept;
    kept.reserve(interactions.size());
    for (auto& pi : interactions) {
      if (user_items[pi.user_id] >= cfg.min_items_per_user &&
          item_users[pi.track_id] >= cfg.min_users_per_item) {
        kept.push_back(std::move(pi));
      }
    }
    changed = kept.size() != interactions.size();
    interactions = std::move(kept);
  }
  return interactions;
}

std::vector<PositiveInteraction> sample_per_item(
    std::vector<PositiveInteraction> interactions, const IngestConfig& cfg) {
  std::unordered_map<std::string, std::vector<size_t>> by_track;
  for (size_t idx = 0; idx < interactions.size(); ++idx) {
    by_track[interactions[idx].track_id].push_back(idx);
  }

  std::vector<char> keep(interactions.size(), 1);
  for (auto& [track, indices] : by_track) {
    if (indices.size() <= cfg.max_interactions_per_item) continue;
    // Canonical order first so the draw is independent of input order.
    std::sort(indices.begin(), indices.end(), [&](size_t a, size_t b) {
      return interactions[a].user_id < interactions[b].user_id;
    });
    Rng rng(mix64(cfg.rng_seed, fnv1a64(track)));
    for (size_t i = 0; i < cfg.max_interactions_per_item; ++i) {
      size_t j = i + static_cast<size_t>(rng.below(indices.size() - i));
      std::swap(indices[i], indices[j]);
    }
    for (size_t i = cfg.max_interactions_per_item; i < indices.size(); ++i) {
      keep[indices[i]] = 0;
    }
  }

  std::vector<PositiveInteraction> out;
  out.reserve(interactions.size());
  for (size_t idx = 0; idx < interactions.size(); ++idx) {
    if (keep[idx]) out.push_back(std::move(interactions[idx]));
  }
  return out;
}

void sort_interactions(std::vector<PositiveInteraction>& interactions) {
  std::sort(interactions.begin(), interactions.end(),
            [](const PositiveInteraction& a, const PositiveInteraction& b) {
              if (a.user_id != b.user_id) return a.user_id < b.user_id;
              if (a.first_timestamp != b.first_timestamp)
                return a.first_timestamp < b.first_timestamp;
              return a.track_id < b.track_id;
            });
}

std::vector<PositiveInteraction> run_ingest(std::span<const RawEvent> events,
                                            const IngestConfig& cfg,
                                            IngestStats* stats) {
  cfg.validate();
  IngestStats local;
  IngestStats& st = stats ? *stats : local;
  st = IngestStats{};
  st.events = events.size();

  std::unordered_map<std::string, std::vector<RawEvent>> groups;
  for (const RawEvent& e : events) {
    if (!event_is_wellformed(e)) {
      ++st.malformed;
      continue;
    }
    groups[e.user_id + '\t' + e.track_id].push_back(e);
  }
  st.merged_pairs = groups.size();

  std::vector<PositiveInteraction> positives;
  positives.reserve(groups.size());
  for (auto& [key, group] : groups) {
    if (auto pi = merge_user_track_events(group, cfg)) {
      positives.push_back(std::move(*pi));
    }
  }
  st.positives = positives.size();

  // Canonical order before the global filters so the whole pipeline is a
  // pure function of (input set, seed).
  sort_interactions(positives);

  size_t before = positives.size();
  positives = apply_count_floors(std::move(positives), cfg);
  st.removed_by_floors = before - positives.size();

  before = positives.size();
  positives = sample_per_item(std::move(positives), cfg);
  st.removed_by_sampling = before - positives.size();

  sort_interactions(positives);
  return positives;
}

}  // namespace trackfm
