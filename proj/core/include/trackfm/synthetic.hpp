#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "trackfm/ingest.hpp"

namespace trackfm {

// Clustered synthetic event-log generator for tests and demos. Tracks are
// grouped into clusters; each user mostly samples tracks from a home
// cluster with a small cross-cluster leak, so cluster membership is the
// ground-truth notion of similarity.
//
// A configurable slice of each cluster is "tail" tracks carried only by a
// few low-activity users whose histories straddle the split point; those
// tracks end up with single-digit train occurrence counts, populating the
// lowest evaluation bins. An optional creator side feature is aligned
// with the clusters.
struct SyntheticConfig {
  uint32_t clusters = 8;
  uint32_t tracks_per_cluster = 50;
  uint32_t users = 2000;
  double leak_probability = 0.05;
  uint32_t events_per_user = 30;       // mean for regular users
  uint32_t tail_tracks_per_cluster = 4;
  uint32_t carriers_per_tail = 7;      // low-activity users per tail track
  bool creators = true;                // emit cluster-aligned creator features
  double noise_fraction = 0.08;        // decoy events the ingest rules reject
  double zipf_exponent = 0.7;          // head-track popularity skew
  int64_t t_begin = 0;
  int64_t t_end = 1000000;
  double split_point = 0.7;            // fraction of the time range
  uint64_t seed = 42;

  void validate() const;
};

struct SyntheticCorpus {
  std::vector<RawEvent> events;
  // (track_id, creator_id) pairs; empty when creators are disabled.
  std::vector<std::pair<std::string, std::string>> track_creators;
  int64_t split_timestamp = 0;  // boundary the generator laid the corpus around
  uint32_t num_tracks = 0;
};

SyntheticCorpus generate_synthetic(const SyntheticConfig& cfg);

// Cluster index encoded in a generated track id, for test assertions.
uint32_t synthetic_cluster_of(const std::string& track_id);

}  // namespace trackfm
