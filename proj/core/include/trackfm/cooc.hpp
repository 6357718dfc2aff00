#pragma once

#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "trackfm/ingest.hpp"
#include "trackfm/vocab.hpp"

namespace trackfm {

enum class WindowMode : uint8_t { track_based, time_based };
enum class Weighting : uint8_t { uniform, inverse_distance };

struct WindowConfig {
  WindowMode mode = WindowMode::track_based;
  uint32_t radius_tracks = 5;    // window of 10: five left, five right
  int64_t radius_seconds = 3600; // time_based mode only
  Weighting weighting = Weighting::uniform;
  uint64_t rng_seed = 42;        // reserved; window construction is deterministic

  void validate() const;
};

struct CoocEntry {
  uint32_t i = 0;  // i < j
  uint32_t j = 0;
  double weight = 0.0;
};

// Sparse symmetric track-track co-occurrence counts. Each unordered pair
// is stored once and holds the total from both sliding-window directions,
// so weight(i, j) == weight(j, i) and the nonzero support is exactly the
// set of observed pairs.
class CoocMatrix {
 public:
  uint32_t add_track(std::string_view id) {
    uint32_t idx = vocab_.add(id);
    if (idx >= counts_.size()) counts_.resize(idx + 1, 0.0);
    return idx;
  }

  // Accumulates w onto the symmetric entry {i, j}. i == j is a contract
  // violation (self-pairs never occur) and throws DataError.
  void add_pair(uint32_t i, uint32_t j, double w);

  // Symmetric query; 0 for unobserved pairs.
  double weight(uint32_t i, uint32_t j) const;

  // Row sum: total occurrence weight of a track.
  double count(uint32_t t) const { return counts_.at(t); }

  const Vocab& vocab() const { return vocab_; }
  Vocab& vocab() { return vocab_; }

  size_t num_entries() const { return entries_.size(); }
  uint32_t num_tracks() const { return vocab_.size(); }
  bool empty() const { return entries_.empty(); }

  // Entries with i < j, ascending by (i, j). Canonical order for files
  // and for seeded training shuffles.
  std::vector<CoocEntry> sorted_entries() const;

  const std::unordered_map<uint64_t, double>& raw_entries() const {
    return entries_;
  }
  const std::vector<double>& counts() const { return counts_; }

  static uint64_t pair_key(uint32_t i, uint32_t j) {
    if (i > j) std::swap(i, j);
    return (static_cast<uint64_t>(i) << 32) | j;
  }

 private:
  Vocab vocab_;
  std::unordered_map<uint64_t, double> entries_;
  std::vector<double> counts_;
};

// Slides a window along each user's time-ordered interactions and counts
// track pairs. Input must be grouped by user and sorted ascending by
// (first_timestamp, track_id) within each user; violations throw
// DataError. Centers near the ends of a sequence use whatever context
// exists (truncated windows).
CoocMatrix build_cooc(std::span<const PositiveInteraction> interactions,
                      const WindowConfig& cfg, int threads = 1);

// Entry-wise sum with vocabulary union. Associative and commutative, so
// partitioned builds can be combined in any order.
CoocMatrix merge(const CoocMatrix& a, const CoocMatrix& b);

}  // namespace trackfm
