#include <doctest.h>

#include <algorithm>
#include <tuple>
#include <unordered_map>
#include <unordered_set>

#include "trackfm/ingest.hpp"
#include "trackfm/random.hpp"

using namespace trackfm;

namespace {

RawEvent play(std::string user, std::string track, int64_t ts, int64_t listened,
              int64_t dur) {
  return {std::move(user), std::move(track), EventKind::play, ts, listened, dur};
}

RawEvent strong(std::string user, std::string track, int64_t ts,
                EventKind kind = EventKind::like) {
  return {std::move(user), std::move(track), kind, ts, 0, 0};
}

bool same_interactions(const std::vector<PositiveInteraction>& a,
                       const std::vector<PositiveInteraction>& b) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i) {
    if (a[i].user_id != b[i].user_id || a[i].track_id != b[i].track_id ||
        a[i].first_timestamp != b[i].first_timestamp) {
      return false;
    }
  }
  return true;
}

}  // namespace

TEST_SUITE_BEGIN("ingest");

TEST_CASE("full listen: strict majority or absolute threshold") {
  IngestConfig cfg;
  CHECK(is_full_listen(180, 240, cfg));        // majority of the track
  CHECK_FALSE(is_full_listen(60, 240, cfg));   // below both thresholds
  CHECK(is_full_listen(1500, 7200, cfg));      // long absolute listen
  CHECK_FALSE(is_full_listen(120, 240, cfg));  // exactly half is not a majority
  CHECK(is_full_listen(1200, 7200, cfg));      // absolute edge is inclusive
}

TEST_CASE("full listen: malformed durations") {
  IngestConfig cfg;
  CHECK_THROWS_AS(is_full_listen(300, 240, cfg), MalformedEvent);
  CHECK_THROWS_AS(is_full_listen(-1, 240, cfg), MalformedEvent);
  CHECK_THROWS_AS(is_full_listen(10, 0, cfg), MalformedEvent);
}

TEST_CASE("merge: strong positives and repeated full listens") {
  IngestConfig cfg;

  SUBCASE("one like is enough") {
    auto events = std::vector<RawEvent>{strong("u", "t", 500)};
    auto pi = merge_user_track_events(events, cfg);
    REQUIRE(pi.has_value());
    CHECK(pi->first_timestamp == 500);
  }
  SUBCASE("a single full listen is not") {
    auto events = std::vector<RawEvent>{play("u", "t", 100, 200, 240)};
    CHECK_FALSE(merge_user_track_events(events, cfg).has_value());
  }
  SUBCASE("two full listens are") {
    auto events = std::vector<RawEvent>{play("u", "t", 900, 200, 240),
                                        play("u", "t", 300, 230, 240)};
    auto pi = merge_user_track_events(events, cfg);
    REQUIRE(pi.has_value());
    CHECK(pi->first_timestamp == 300);
  }
  SUBCASE("empty input merges to nothing") {
    CHECK_FALSE(merge_user_track_events({}, cfg).has_value());
  }
  SUBCASE("a lone full listen is not evidence next to a like") {
    auto events = std::vector<RawEvent>{play("u", "t", 100, 200, 240),
                                        strong("u", "t", 200)};
    auto pi = merge_user_track_events(events, cfg);
    REQUIRE(pi.has_value());
    CHECK(pi->first_timestamp == 200);  // the like, not the single listen
  }
  SUBCASE("repeated full listens count from the earliest") {
    auto events = std::vector<RawEvent>{strong("u", "t", 300),
                                        play("u", "t", 100, 200, 240),
                                        play("u", "t", 400, 200, 240)};
    auto pi = merge_user_track_events(events, cfg);
    REQUIRE(pi.has_value());
    CHECK(pi->first_timestamp == 100);
  }
  SUBCASE("partial listens never add up") {
    auto events = std::vector<RawEvent>{play("u", "t", 100, 60, 240),
                                        play("u", "t", 200, 60, 240),
                                        play("u", "t", 300, 60, 240)};
    CHECK_FALSE(merge_user_track_events(events, cfg).has_value());
  }
  SUBCASE("mixed groups are a contract violation") {
    auto events = std::vector<RawEvent>{strong("u", "t", 1), strong("u", "s", 2)};
    CHECK_THROWS_AS(merge_user_track_events(events, cfg), DataError);
  }
}

TEST_CASE("floors: users and tracks below the minimum are removed") {
  IngestConfig cfg;

  SUBCASE("user with four tracks goes, popular tracks stay") {
    std::vector<PositiveInteraction> in;
    // six users fully covering six tracks
    for (int u = 0; u < 6; ++u) {
      for (int t = 0; t < 6; ++t) {
        in.push_back({"u" + std::to_string(u), "t" + std::to_string(t), u * 10 + t});
      }
    }
    // one extra user with only four tracks
    for (int t = 0; t < 4; ++t) {
      in.push_back({"u9", "t" + std::to_string(t), 100 + t});
    }
    auto out = apply_count_floors(in, cfg);
    CHECK(out.size() == 36);
    CHECK(std::none_of(out.begin(), out.end(),
                       [](const auto& pi) { return pi.user_id == "u9"; }));
  }
  SUBCASE("empty input") {
    CHECK(apply_count_floors({}, cfg).empty());
  }
  SUBCASE("dense 6x6 is already at the fixed point") {
    std::vector<PositiveInteraction> in;
    for (int u = 0; u < 6; ++u) {
      for (int t = 0; t < 6; ++t) {
        in.push_back({"u" + std::to_string(u), "t" + std::to_string(t), t});
      }
    }
    CHECK(apply_count_floors(in, cfg).size() == 36);
  }
  SUBCASE("removals cascade to a fixed point") {
    std::vector<PositiveInteraction> in;
    // stable base: 6 users x 6 tracks
    for (int u = 0; u < 6; ++u) {
      for (int t = 0; t < 6; ++t) {
        in.push_back({"b" + std::to_string(u), "t" + std::to_string(t), t});
      }
    }
    // track X has exactly 5 users: w0..w3 and v. v only has 4 other tracks,
    // so v falls, then X falls, then w0..w3 (who had X plus 4 base tracks).
    in.push_back({"v", "X", 1});
    for (int t = 0; t < 4; ++t) {
      in.push_back({"v", "t" + std::to_string(t), 2 + t});
    }
    for (int w = 0; w < 4; ++w) {
      in.push_back({"w" + std::to_string(w), "X", 1});
      for (int t = 0; t < 4; ++t) {
        in.push_back({"w" + std::to_string(w), "t" + std::to_string(t), 2 + t});
      }
    }
    auto out = apply_count_floors(in, cfg);
    CHECK(out.size() == 36);  // only the base survives
    for (const auto& pi : out) {
      CHECK(pi.user_id[0] == 'b');
      CHECK(pi.track_id[0] == 't');
    }
  }
  SUBCASE("result always satisfies both floors") {
    Rng rng(99);
    for (int round = 0; round < 20; ++round) {
      std::vector<PositiveInteraction> in;
      std::unordered_set<std::string> seen;
      const int n = 30 + static_cast<int>(rng.below(120));
      for (int i = 0; i < n; ++i) {
        std::string u = "u" + std::to_string(rng.below(12));
        std::string t = "t" + std::to_string(rng.below(12));
        if (seen.insert(u + "\t" + t).second) {
          in.push_back({u, t, static_cast<int64_t>(rng.below(1000))});
        }
      }
      auto out = apply_count_floors(in, cfg);
      std::unordered_map<std::string, uint32_t> per_user, per_track;
      for (const auto& pi : out) {
        ++per_user[pi.user_id];
        ++per_track[pi.track_id];
      }
      for (const auto& [u, c] : per_user) CHECK(c >= cfg.min_items_per_user);
      for (const auto& [t, c] : per_track) CHECK(c >= cfg.min_users_per_item);
    }
  }
}

TEST_CASE("per-item sampling caps popular tracks") {
  IngestConfig cfg;
  cfg.max_interactions_per_item = 10;
  cfg.rng_seed = 5;

  std::vector<PositiveInteraction> in;
  for (int u = 0; u < 40; ++u) {
    in.push_back({"u" + std::to_string(100 + u), "hot", u});
  }
  for (int u = 0; u < 7; ++u) {
    in.push_back({"u" + std::to_string(100 + u), "cold", u});
  }

  auto out = sample_per_item(in, cfg);
  size_t hot = 0, cold = 0;
  for (const auto& pi : out) {
    if (pi.track_id == "hot") ++hot;
    if (pi.track_id == "cold") ++cold;
  }
  CHECK(hot == 10);  // capped exactly
  CHECK(cold == 7);  // untouched below the cap

  SUBCASE("same seed, same subset; the kept rows come from the input") {
    auto again = sample_per_item(in, cfg);
    CHECK(same_interactions(out, again));
  }
  SUBCASE("input order does not matter") {
    auto shuffled = in;
    Rng rng(7);
    trackfm::shuffle(shuffled, rng);
    auto out2 = sample_per_item(shuffled, cfg);
    sort_interactions(out2);
    auto sorted = out;
    sort_interactions(sorted);
    CHECK(same_interactions(sorted, out2));
  }
  SUBCASE("unrelated tracks do not shift a track's draw") {
    auto with_extra = in;
    for (int u = 0; u < 25; ++u) {
      with_extra.push_back({"z" + std::to_string(u), "other", u});
    }
    auto out2 = sample_per_item(with_extra, cfg);
    std::vector<std::string> hot_users1, hot_users2;
    for (const auto& pi : out) {
      if (pi.track_id == "hot") hot_users1.push_back(pi.user_id);
    }
    for (const auto& pi : out2) {
      if (pi.track_id == "hot") hot_users2.push_back(pi.user_id);
    }
    std::sort(hot_users1.begin(), hot_users1.end());
    std::sort(hot_users2.begin(), hot_users2.end());
    CHECK(hot_users1 == hot_users2);
  }
}

TEST_CASE("ingest pipeline: canonical order, uniqueness, determinism") {
  IngestConfig cfg;
  cfg.min_items_per_user = 2;
  cfg.min_users_per_item = 2;

  std::vector<RawEvent> events;
  // three users, three tracks, mixed signal forms plus noise
  for (int u = 0; u < 3; ++u) {
    std::string user = "u" + std::to_string(u);
    events.push_back(strong(user, "a", 100 + u));
    events.push_back(play(user, "b", 200 + u, 220, 240));
    events.push_back(play(user, "b", 300 + u, 220, 240));
    events.push_back(play(user, "c", 400 + u, 10, 240));  // partial, dropped
  }
  events.push_back(play("u0", "a", 50, 500, 240));  // malformed: listened > dur

  IngestStats stats;
  auto out = run_ingest(events, cfg, &stats);

  CHECK(stats.malformed == 1);
  CHECK(out.size() == 6);  // (u, a) and (u, b) for three users
  CHECK(std::is_sorted(out.begin(), out.end(), [](const auto& x, const auto& y) {
    return std::tie(x.user_id, x.first_timestamp, x.track_id) <
           std::tie(y.user_id, y.first_timestamp, y.track_id);
  }));

  SUBCASE("shuffled input bytes give identical output") {
    auto shuffled = events;
    Rng rng(123);
    trackfm::shuffle(shuffled, rng);
    IngestStats stats2;
    auto out2 = run_ingest(shuffled, cfg, &stats2);
    CHECK(same_interactions(out, out2));
    CHECK(stats2.malformed == 1);
  }
}

TEST_CASE("config validation") {
  IngestConfig cfg;
  cfg.full_listen_fraction = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = IngestConfig{};
  cfg.min_items_per_user = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = IngestConfig{};
  cfg.full_listen_absolute = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_SUITE_END();
