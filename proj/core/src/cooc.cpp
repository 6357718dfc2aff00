#include "trackfm/cooc.hpp"

#include <algorithm>
#include <thread>

namespace trackfm {

void WindowConfig::validate() const {
  if (mode == WindowMode::track_based && radius_tracks < 1) {
    throw ConfigError("window: radius_tracks must be >= 1 in track mode");
  }
  if (mode == WindowMode::time_based && radius_seconds <= 0) {
    throw ConfigError("window: radius_seconds must be > 0 in time mode");
  }
}

void CoocMatrix::add_pair(uint32_t i, uint32_t j, double w) {
  if (i == j) {
    throw DataError("cooc: self-pair for track " + vocab_.name(i) +
                    " (duplicate track in one user sequence?)");
  }
  if (i >= counts_.size() || j >= counts_.size()) {
    throw DataError("cooc: track index out of range");
  }
  entries_[pair_key(i, j)] += w;
  counts_[i] += w;
  counts_[j] += w;
}

double CoocMatrix::weight(uint32_t i, uint32_t j) const {
  if (i == j) return 0.0;
  auto it = entries_.find(pair_key(i, j));
  return it == entries_.end() ? 0.0 : it->second;
}

std::vector<CoocEntry> CoocMatrix::sorted_entries() const {
  std::vector<CoocEntry> out;
  out.reserve(entries_.size());
  for (const auto& [key, w] : entries_) {
    out.push_back({static_cast<uint32_t>(key >> 32),
                   static_cast<uint32_t>(key & 0xffffffffu), w});
  }
  std::sort(out.begin(), out.end(), [](const CoocEntry& a, const CoocEntry& b) {
    if (a.i != b.i) return a.i < b.i;
    return a.j < b.j;
  });
  return out;
}

namespace {

struct UserRun {
  size_t begin = 0;
  size_t end = 0;  // exclusive
};

double pair_weight(uint32_t rank_distance, Weighting weighting) {
  return weighting == Weighting::uniform
             ? 1.0
             : 1.0 / static_cast<double>(rank_distance);
}

// Counts one user's sequence into the matrix. Positions p < q within
// range contribute from both window directions, hence the factor 2.
void count_user(std::span<const PositiveInteraction> all, const UserRun& run,
                std::span<const uint32_t> track_idx, const WindowConfig& cfg,
                CoocMatrix& m) {
  const size_t len = run.end - run.begin;
  for (size_t p = 0; p < len; ++p) {
    const size_t q_end =
        cfg.mode == WindowMode::track_based
            ? std::min(len, p + static_cast<size_t>(cfg.radius_tracks) + 1)
            : len;
    for (size_t q = p + 1; q < q_end; ++q) {
      if (cfg.mode == WindowMode::time_based) {
        int64_t dt = all[run.begin + q].first_timestamp -
                     all[run.begin + p].first_timestamp;
        if (dt > cfg.radius_seconds) break;  // timestamps ascend within a user
      }
      const uint32_t d = static_cast<uint32_t>(q - p);
      m.add_pair(track_idx[run.begin + p], track_idx[run.begin + q],
                 2.0 * pair_weight(d, cfg.weighting));
    }
  }
}

}  // namespace

CoocMatrix build_cooc(std::span<const PositiveInteraction> interactions,
                      const WindowConfig& cfg, int threads) {
  cfg.validate();

  // Single pass: detect user runs, verify per-user ordering, and assign
  // dense indices by first appearance.
  CoocMatrix result;
  std::vector<uint32_t> track_idx(interactions.size());
  std::vector<UserRun> runs;
  for (size_t i = 0; i < interactions.size(); ++i) {
    const auto& cur = interactions[i];
    track_idx[i] = result.add_track(cur.track_id);
    if (i == 0 || cur.user_id != interactions[i - 1].user_id) {
      runs.push_back({i, i + 1});
      continue;
    }
    const auto& prev = interactions[i - 1];
    if (cur.first_timestamp < prev.first_timestamp ||
        (cur.first_timestamp == prev.first_timestamp &&
         cur.track_id < prev.track_id)) {
      throw DataError("cooc: interactions for user " + cur.user_id +
                      " are not sorted by (first_timestamp, track_id)");
    }
    runs.back().end = i + 1;
  }

  if (threads <= 1 || runs.size() < 2) {
    for (const UserRun& run : runs) {
      count_user(interactions, run, track_idx, cfg, result);
    }
    return result;
  }

  // Partitioned build: per-thread matrices over the shared vocabulary,
  // combined with the commutative merge.
  const size_t n_threads = std::min<size_t>(threads, runs.size());
  std::vector<CoocMatrix> parts(n_threads);
  for (auto& part : parts) {
    for (uint32_t t = 0; t < result.num_tracks(); ++t) {
      part.add_track(result.vocab().name(t));
    }
  }
  std::vector<std::thread> workers;
  workers.reserve(n_threads);
  for (size_t w = 0; w < n_threads; ++w) {
    workers.emplace_back([&, w] {
      for (size_t r = w; r < runs.size(); r += n_threads) {
        count_user(interactions, runs[r], track_idx, cfg, parts[w]);
      }
    });
  }
  for (auto& t : workers) t.join();
  for (auto& part : parts) {
    result = merge(result, part);
  }
  return result;
}

CoocMatrix merge(const CoocMatrix& a, const CoocMatrix& b) {
  CoocMatrix out;
  for (uint32_t t = 0; t < a.num_tracks(); ++t) out.add_track(a.vocab().name(t));

  for (const auto& [key, w] : a.raw_entries()) {
    out.add_pair(static_cast<uint32_t>(key >> 32),
                 static_cast<uint32_t>(key & 0xffffffffu), w);
  }

  std::vector<uint32_t> remap(b.num_tracks());
  for (uint32_t t = 0; t < b.num_tracks(); ++t) {
    remap[t] = out.add_track(b.vocab().name(t));
  }
  for (const auto& [key, w] : b.raw_entries()) {
    out.add_pair(remap[static_cast<uint32_t>(key >> 32)],
                 remap[static_cast<uint32_t>(key & 0xffffffffu)], w);
  }
  return out;
}

}  // namespace trackfm
