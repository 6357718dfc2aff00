#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <unordered_set>
#include <vector>

#include "trackfm/cooc.hpp"
#include "trackfm/random.hpp"

using namespace trackfm;

namespace {

std::vector<PositiveInteraction> seq(const std::string& user,
                                     const std::vector<std::string>& tracks,
                                     int64_t t0 = 0, int64_t step = 10) {
  std::vector<PositiveInteraction> out;
  for (size_t i = 0; i < tracks.size(); ++i) {
    out.push_back({user, tracks[i], t0 + static_cast<int64_t>(i) * step});
  }
  return out;
}

double q(const CoocMatrix& m, const std::string& a, const std::string& b) {
  auto i = m.vocab().find(a);
  auto j = m.vocab().find(b);
  if (!i || !j) return 0.0;
  return m.weight(*i, *j);
}

// Independent enumeration of every in-range ordered (center, context)
// position pair; both directions of an unordered pair land on one key.
using PairMap = std::map<std::pair<std::string, std::string>, double>;
PairMap brute_force(std::span<const PositiveInteraction> interactions,
                    const WindowConfig& cfg) {
  PairMap out;
  size_t i = 0;
  while (i < interactions.size()) {
    size_t j = i;
    while (j < interactions.size() &&
           interactions[j].user_id == interactions[i].user_id) {
      ++j;
    }
    for (size_t p = i; p < j; ++p) {
      for (size_t qq = p + 1; qq < j; ++qq) {
        const size_t d = qq - p;
        bool in_range = cfg.mode == WindowMode::track_based
                            ? d <= cfg.radius_tracks
                            : interactions[qq].first_timestamp -
                                      interactions[p].first_timestamp <=
                                  cfg.radius_seconds;
        if (!in_range) continue;
        double w = cfg.weighting == Weighting::uniform
                       ? 1.0
                       : 1.0 / static_cast<double>(d);
        auto key = std::minmax(interactions[p].track_id, interactions[qq].track_id);
        out[{key.first, key.second}] += 2.0 * w;
      }
    }
    i = j;
  }
  return out;
}

PairMap to_map(const CoocMatrix& m) {
  PairMap out;
  for (const CoocEntry& e : m.sorted_entries()) {
    auto key = std::minmax(m.vocab().name(e.i), m.vocab().name(e.j));
    out[{key.first, key.second}] = e.weight;
  }
  return out;
}

}  // namespace

TEST_SUITE_BEGIN("cooc");

TEST_CASE("three-track user, radius 1, uniform") {
  auto interactions = seq("u", {"t1", "t2", "t3"});
  WindowConfig cfg;
  cfg.radius_tracks = 1;
  CoocMatrix m = build_cooc(interactions, cfg);
  CHECK(q(m, "t1", "t2") == 2.0);
  CHECK(q(m, "t2", "t3") == 2.0);
  CHECK(q(m, "t1", "t3") == 0.0);
  CHECK(q(m, "t2", "t1") == 2.0);  // symmetric query
  // row sums
  CHECK(m.count(m.vocab().at("t1")) == 2.0);
  CHECK(m.count(m.vocab().at("t2")) == 4.0);
  CHECK(m.count(m.vocab().at("t3")) == 2.0);
}

TEST_CASE("single-track user contributes nothing") {
  auto interactions = seq("u", {"only"});
  CoocMatrix m = build_cooc(interactions, WindowConfig{});
  CHECK(m.num_entries() == 0);
  CHECK(m.num_tracks() == 1);  // vocabulary still assigns the index
}

TEST_CASE("radius 2 with inverse-distance weighting") {
  auto interactions = seq("u", {"t1", "t2", "t3"});
  WindowConfig cfg;
  cfg.radius_tracks = 2;
  cfg.weighting = Weighting::inverse_distance;
  CoocMatrix m = build_cooc(interactions, cfg);
  CHECK(q(m, "t1", "t2") == 2.0);
  CHECK(q(m, "t2", "t3") == 2.0);
  CHECK(q(m, "t1", "t3") == 2.0 * 0.5);
}

TEST_CASE("time-based windows pair by seconds, weight by rank distance") {
  std::vector<PositiveInteraction> interactions = {
      {"u", "a", 0}, {"u", "b", 10}, {"u", "c", 25}};
  WindowConfig cfg;
  cfg.mode = WindowMode::time_based;
  cfg.radius_seconds = 15;
  CoocMatrix m = build_cooc(interactions, cfg);
  CHECK(q(m, "a", "b") == 2.0);
  CHECK(q(m, "b", "c") == 2.0);
  CHECK(q(m, "a", "c") == 0.0);  // 25 s apart

  cfg.weighting = Weighting::inverse_distance;
  cfg.radius_seconds = 30;
  CoocMatrix m2 = build_cooc(interactions, cfg);
  CHECK(q(m2, "a", "c") == 2.0 * 0.5);  // rank distance 2
}

TEST_CASE("unsorted user sequences are rejected") {
  std::vector<PositiveInteraction> bad = {{"u", "a", 100}, {"u", "b", 50}};
  CHECK_THROWS_AS(build_cooc(bad, WindowConfig{}), DataError);

  // equal timestamps must ascend by track id
  std::vector<PositiveInteraction> tie_bad = {{"u", "b", 100}, {"u", "a", 100}};
  CHECK_THROWS_AS(build_cooc(tie_bad, WindowConfig{}), DataError);
  std::vector<PositiveInteraction> tie_ok = {{"u", "a", 100}, {"u", "b", 100}};
  CHECK_NOTHROW(build_cooc(tie_ok, WindowConfig{}));
}

TEST_CASE("duplicate track within one user is a self-pair violation") {
  std::vector<PositiveInteraction> dup = {{"u", "a", 1}, {"u", "a", 2}};
  CHECK_THROWS_AS(build_cooc(dup, WindowConfig{}), DataError);
}

TEST_CASE("brute-force equivalence on random sequences") {
  Rng rng(321);
  WindowConfig cfg;
  for (int round = 0; round < 40; ++round) {
    std::vector<PositiveInteraction> corpus;
    const int users = 1 + static_cast<int>(rng.below(4));
    for (int u = 0; u < users; ++u) {
      const int len = 1 + static_cast<int>(rng.below(20));
      int64_t t = 0;
      std::vector<std::string> tracks;
      std::unordered_set<int> used;
      for (int i = 0; i < len; ++i) {
        int id;
        do {
          id = static_cast<int>(rng.below(30));
        } while (!used.insert(id).second);
        tracks.push_back("t" + std::to_string(id));
      }
      for (auto& tr : tracks) {
        corpus.push_back({"u" + std::to_string(u), tr, t});
        t += 1 + static_cast<int64_t>(rng.below(20));
      }
    }
    cfg.mode = (round % 2 == 0) ? WindowMode::track_based : WindowMode::time_based;
    cfg.weighting =
        (round / 2) % 2 == 0 ? Weighting::uniform : Weighting::inverse_distance;
    cfg.radius_tracks = 1 + static_cast<uint32_t>(rng.below(6));
    cfg.radius_seconds = 1 + static_cast<int64_t>(rng.below(60));

    CoocMatrix m = build_cooc(corpus, cfg);
    CHECK(to_map(m) == brute_force(corpus, cfg));
  }
}

TEST_CASE("merge is an identity with the empty matrix and commutes") {
  auto a = build_cooc(seq("u", {"x", "y", "z"}), WindowConfig{});
  CoocMatrix empty;
  CHECK(to_map(merge(a, empty)) == to_map(a));
  CHECK(to_map(merge(empty, a)) == to_map(a));

  auto b = build_cooc(seq("v", {"y", "w"}), WindowConfig{});
  CHECK(to_map(merge(a, b)) == to_map(merge(b, a)));
}

TEST_CASE("partitioned per-user builds merge to the whole-corpus matrix") {
  Rng rng(77);
  std::vector<PositiveInteraction> corpus;
  std::vector<CoocMatrix> parts;
  WindowConfig cfg;
  cfg.radius_tracks = 3;
  for (int u = 0; u < 6; ++u) {
    std::vector<std::string> tracks;
    for (int i = 0; i < 8; ++i) {
      tracks.push_back("t" + std::to_string((u * 3 + i * 5) % 17));
    }
    std::unordered_set<std::string> dedup(tracks.begin(), tracks.end());
    tracks.assign(dedup.begin(), dedup.end());
    std::sort(tracks.begin(), tracks.end());
    auto user_seq = seq("u" + std::to_string(u), tracks);
    parts.push_back(build_cooc(user_seq, cfg));
    corpus.insert(corpus.end(), user_seq.begin(), user_seq.end());
  }
  CoocMatrix merged;
  for (const auto& p : parts) merged = merge(merged, p);
  CHECK(to_map(merged) == to_map(build_cooc(corpus, cfg)));
}

TEST_CASE("enlarging the radius never shrinks an entry") {
  auto corpus = seq("u", {"a", "b", "c", "d", "e", "f"});
  WindowConfig small, big;
  small.radius_tracks = 2;
  big.radius_tracks = 4;
  auto ms = to_map(build_cooc(corpus, small));
  auto mb = to_map(build_cooc(corpus, big));
  for (const auto& [key, w] : ms) {
    CHECK(mb[key] >= w);
  }
}

TEST_CASE("total uniform mass counts in-range unordered position pairs twice") {
  auto corpus = seq("u", {"a", "b", "c", "d", "e"});
  WindowConfig cfg;
  cfg.radius_tracks = 2;
  CoocMatrix m = build_cooc(corpus, cfg);
  // positions 5, radius 2: pairs (0,1),(0,2),(1,2),(1,3),(2,3),(2,4),(3,4)
  double total = 0.0;
  for (const auto& e : m.sorted_entries()) total += e.weight;
  CHECK(total == 2.0 * 7);
}

TEST_CASE("threaded build matches single-threaded") {
  Rng rng(5);
  std::vector<PositiveInteraction> corpus;
  for (int u = 0; u < 12; ++u) {
    std::vector<std::string> tracks;
    for (int i = 0; i < 10; ++i) {
      tracks.push_back("t" + std::to_string((u + i * 7) % 23));
    }
    std::unordered_set<std::string> dedup(tracks.begin(), tracks.end());
    tracks.assign(dedup.begin(), dedup.end());
    std::sort(tracks.begin(), tracks.end());
    auto s = seq("u" + std::to_string(u), tracks);
    corpus.insert(corpus.end(), s.begin(), s.end());
  }
  WindowConfig cfg;
  CHECK(to_map(build_cooc(corpus, cfg, 3)) == to_map(build_cooc(corpus, cfg, 1)));
}

TEST_CASE("window config validation") {
  WindowConfig cfg;
  cfg.radius_tracks = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = WindowConfig{};
  cfg.mode = WindowMode::time_based;
  cfg.radius_seconds = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_SUITE_END();
