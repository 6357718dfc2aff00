#include "trackfm/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <unordered_set>

#include "trackfm/common.hpp"
#include "trackfm/random.hpp"

namespace trackfm {

void SyntheticConfig::validate() const {
  if (clusters < 1 || tracks_per_cluster < 1 || users < 1) {
    throw ConfigError("synthetic: clusters, tracks and users must be >= 1");
  }
  if (leak_probability < 0.0 || leak_probability > 1.0) {
    throw ConfigError("synthetic: leak_probability must be in [0, 1]");
  }
  if (noise_fraction < 0.0 || noise_fraction > 1.0) {
    throw ConfigError("synthetic: noise_fraction must be in [0, 1]");
  }
  if (tail_tracks_per_cluster >= tracks_per_cluster) {
    throw ConfigError("synthetic: tail tracks must leave at least one head");
  }
  if (tail_tracks_per_cluster > 0 && carriers_per_tail < 3) {
    throw ConfigError("synthetic: need at least 3 carriers per tail track");
  }
  if (t_end <= t_begin) throw ConfigError("synthetic: empty time range");
  if (split_point <= 0.0 || split_point >= 1.0) {
    throw ConfigError("synthetic: split_point must be in (0, 1)");
  }
  const uint64_t carriers =
      static_cast<uint64_t>(tail_tracks_per_cluster) * carriers_per_tail;
  if (static_cast<uint64_t>(users) / clusters < carriers + 10) {
    throw ConfigError(
        "synthetic: not enough users per cluster for the tail carriers");
  }
  if (events_per_user < 8) {
    throw ConfigError("synthetic: events_per_user must be >= 8");
  }
}

namespace {

std::string track_name(uint32_t cluster, uint32_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "t%u_%03u", cluster, index);
  return buf;
}

std::string user_name(uint32_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "u%05u", index);
  return buf;
}

std::string creator_name(uint32_t cluster) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "c%u", cluster);
  return buf;
}

// Head-track sampler per cluster: popularity follows a zipf-like decay.
class HeadSampler {
 public:
  HeadSampler(uint32_t heads, double exponent) {
    cumulative_.reserve(heads);
    double total = 0.0;
    for (uint32_t i = 0; i < heads; ++i) {
      total += std::pow(static_cast<double>(i + 1), -exponent);
      cumulative_.push_back(total);
    }
  }

  uint32_t sample(Rng& rng) const {
    const double u = rng.uniform() * cumulative_.back();
    size_t idx = static_cast<size_t>(
        std::upper_bound(cumulative_.begin(), cumulative_.end(), u) -
        cumulative_.begin());
    if (idx >= cumulative_.size()) idx = cumulative_.size() - 1;
    return static_cast<uint32_t>(idx);
  }

 private:
  std::vector<double> cumulative_;
};

struct Emitter {
  std::vector<RawEvent>& events;
  Rng& rng;

  void strong(const std::string& user, const std::string& track, int64_t ts,
              EventKind kind) {
    events.push_back({user, track, kind, ts, 0, 0});
  }

  // Two complete plays; merges to a positive interaction starting at ts.
  void double_play(const std::string& user, const std::string& track,
                   int64_t ts) {
    const int64_t dur = 120 + static_cast<int64_t>(rng.below(480));
    events.push_back({user, track, EventKind::play, ts, dur, dur});
    events.push_back({user, track, EventKind::play,
                      ts + 1 + static_cast<int64_t>(rng.below(600)), dur, dur});
  }

  // A single complete play: rejected by the merge rules.
  void single_play(const std::string& user, const std::string& track,
                   int64_t ts) {
    const int64_t dur = 240 + static_cast<int64_t>(rng.below(240));
    events.push_back({user, track, EventKind::play, ts, dur, dur});
  }

  // A short partial play: below both full-listen thresholds.
  void partial_play(const std::string& user, const std::string& track,
                    int64_t ts) {
    const int64_t dur = 600 + static_cast<int64_t>(rng.below(1200));
    const int64_t listened = static_cast<int64_t>(rng.below(dur / 2));
    events.push_back({user, track, EventKind::play, ts, listened, dur});
  }

  // Emits one positive interaction in a randomly chosen form.
  void positive(const std::string& user, const std::string& track, int64_t ts) {
    const double r = rng.uniform();
    if (r < 0.45) {
      strong(user, track, ts, EventKind::like);
    } else if (r < 0.60) {
      strong(user, track, ts, EventKind::playlist_add);
    } else if (r < 0.70) {
      strong(user, track, ts, EventKind::share);
    } else {
      double_play(user, track, ts);
    }
  }
};

}  // namespace

uint32_t synthetic_cluster_of(const std::string& track_id) {
  if (track_id.size() < 2 || track_id[0] != 't') {
    throw DataError("not a synthetic track id: " + track_id);
  }
  return static_cast<uint32_t>(std::stoul(track_id.substr(1)));
}

SyntheticCorpus generate_synthetic(const SyntheticConfig& cfg) {
  cfg.validate();
  Rng rng(mix64(cfg.seed, fnv1a64("synthetic")));

  SyntheticCorpus corpus;
  corpus.num_tracks = cfg.clusters * cfg.tracks_per_cluster;
  const int64_t range = cfg.t_end - cfg.t_begin;
  const int64_t split =
      cfg.t_begin + static_cast<int64_t>(std::llround(cfg.split_point *
                                                      static_cast<double>(range)));
  corpus.split_timestamp = split;
  // Window right before the split where the early tail appearances live.
  const int64_t pre_window =
      std::max<int64_t>(1, std::min(range / 20, split - cfg.t_begin));
  const int64_t post_range = cfg.t_end - split;

  const uint32_t heads = cfg.tracks_per_cluster - cfg.tail_tracks_per_cluster;
  HeadSampler head_sampler(heads, cfg.zipf_exponent);
  Emitter emit{corpus.events, rng};

  if (cfg.creators) {
    corpus.track_creators.reserve(corpus.num_tracks);
    for (uint32_t g = 0; g < cfg.clusters; ++g) {
      for (uint32_t i = 0; i < cfg.tracks_per_cluster; ++i) {
        corpus.track_creators.emplace_back(track_name(g, i), creator_name(g));
      }
    }
  }

  // Users are assigned to clusters round-robin; the first users of every
  // cluster are reserved as low-activity carriers for the tail tracks.
  const uint32_t carriers_per_cluster =
      cfg.tail_tracks_per_cluster * cfg.carriers_per_tail;

  auto cluster_user = [&](uint32_t g, uint32_t slot) {
    return user_name(slot * cfg.clusters + g);
  };

  auto pick_heads = [&](uint32_t g, uint32_t count,
                        std::unordered_set<uint32_t>& used) {
    std::vector<std::string> out;
    uint32_t attempts = 0;
    while (out.size() < count && attempts < count * 50 + 100) {
      ++attempts;
      uint32_t h = head_sampler.sample(rng);
      if (used.insert(h).second) out.push_back(track_name(g, h));
    }
    if (out.size() < count) {
      throw DataError("synthetic: cluster too small to pick distinct heads");
    }
    return out;
  };

  // Tail carriers. Early carriers put the tail track plus one anchor head
  // just before the split (a tiny train footprint); late carriers carry
  // it only after the split, providing the test context.
  for (uint32_t g = 0; g < cfg.clusters; ++g) {
    for (uint32_t t = 0; t < cfg.tail_tracks_per_cluster; ++t) {
      const std::string tail = track_name(g, heads + t);
      for (uint32_t c = 0; c < cfg.carriers_per_tail; ++c) {
        const std::string user = cluster_user(g, t * cfg.carriers_per_tail + c);
        std::unordered_set<uint32_t> used;
        const bool early = c < 2;
        if (early) {
          const int64_t tx = split - 1 - static_cast<int64_t>(rng.below(pre_window));
          const int64_t ty = split - 1 - static_cast<int64_t>(rng.below(pre_window));
          emit.strong(user, tail, tx, EventKind::like);
          emit.strong(user, pick_heads(g, 1, used)[0], ty, EventKind::like);
          for (const auto& head : pick_heads(g, 3, used)) {
            emit.strong(user, head, split + static_cast<int64_t>(rng.below(post_range)),
                        EventKind::like);
          }
        } else {
          emit.strong(user, tail, split + static_cast<int64_t>(rng.below(post_range)),
                      EventKind::like);
          for (const auto& head : pick_heads(g, 4, used)) {
            emit.strong(user, head, split + static_cast<int64_t>(rng.below(post_range)),
                        EventKind::like);
          }
        }
      }
    }
  }

  // Regular users sample head tracks, mostly from their home cluster.
  for (uint32_t u = 0; u < cfg.users; ++u) {
    const uint32_t g = u % cfg.clusters;
    const uint32_t slot = u / cfg.clusters;
    if (slot < carriers_per_cluster) continue;  // reserved above
    const std::string user = user_name(u);

    const uint32_t lo = cfg.events_per_user - cfg.events_per_user / 5;
    const uint32_t n_events =
        lo + static_cast<uint32_t>(rng.below(2 * (cfg.events_per_user / 5) + 1));

    // Users leak into the next cluster on the ring, so cross-cluster
    // listening is consistent taste rather than unlearnable noise.
    const uint32_t g2 = (g + 1) % cfg.clusters;

    // Distinct tracks for this user; decoy targets are reserved too so a
    // stray second full listen can never turn a decoy positive. The leak
    // coin is rolled once per event, before the duplicate rejection, so
    // the leak fraction stays honest even when a user has consumed most
    // of the home cluster.
    std::unordered_set<std::string> chosen;
    for (uint32_t ev = 0; ev < n_events; ++ev) {
      uint32_t cluster = g;
      if (cfg.clusters > 1 && rng.uniform() < cfg.leak_probability) {
        cluster = g2;
      }
      std::string track;
      bool found = false;
      for (uint32_t attempt = 0; attempt < 60; ++attempt) {
        track = track_name(cluster, head_sampler.sample(rng));
        if (!chosen.contains(track)) {
          found = true;
          break;
        }
      }
      if (!found || !chosen.insert(track).second) continue;
      const int64_t ts = cfg.t_begin + static_cast<int64_t>(rng.below(range));
      emit.positive(user, track, ts);

      if (rng.uniform() < cfg.noise_fraction) {
        // A decoy play the ingest rules must reject.
        uint32_t h = head_sampler.sample(rng);
        const std::string decoy = track_name(g, h);
        if (chosen.insert(decoy).second) {
          const int64_t dts = cfg.t_begin + static_cast<int64_t>(rng.below(range));
          if (rng.coin()) {
            emit.single_play(user, decoy, dts);
          } else {
            emit.partial_play(user, decoy, dts);
          }
        }
      }
    }
  }

  return corpus;
}

}  // namespace trackfm
