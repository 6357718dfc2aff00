#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <vector>

#include "trackfm/eval.hpp"
#include "trackfm/random.hpp"

using namespace trackfm;

namespace {

EmbeddingSet make_embeddings(const std::vector<std::string>& ids,
                             const std::vector<std::vector<double>>& vecs) {
  EmbeddingSet emb;
  emb.dim = static_cast<uint32_t>(vecs.front().size());
  for (size_t i = 0; i < ids.size(); ++i) {
    emb.vocab.add(ids[i]);
    emb.data.insert(emb.data.end(), vecs[i].begin(), vecs[i].end());
  }
  return emb;
}

EmbeddingSet random_embeddings(const std::vector<std::string>& ids,
                               uint32_t dim, uint64_t seed) {
  Rng rng(seed);
  EmbeddingSet emb;
  emb.dim = dim;
  for (const auto& id : ids) {
    emb.vocab.add(id);
    for (uint32_t d = 0; d < dim; ++d) {
      emb.data.push_back(rng.uniform(-1.0, 1.0));
    }
  }
  return emb;
}

// Direct Heaviside double loop over (context, candidate) pairs with its
// own cosine, plus the same smallest-edge binning, kept independent of
// the evaluate() implementation.
struct OracleReport {
  std::map<uint64_t, std::pair<uint64_t, double>> bins;
  double overall = 0.0;
  uint64_t evaluated = 0;
};

double oracle_cos(const EmbeddingSet& e, uint32_t a, uint32_t b) {
  double dot = 0, na = 0, nb = 0;
  for (uint32_t d = 0; d < e.dim; ++d) {
    const double x = e.data[size_t(a) * e.dim + d];
    const double y = e.data[size_t(b) * e.dim + d];
    dot += x * y;
    na += x * x;
    nb += y * y;
  }
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

OracleReport oracle_evaluate(std::span<const PositiveInteraction> test,
                             const WindowConfig& window,
                             const CoocMatrix& train_cooc,
                             const EmbeddingSet& emb, const EvalConfig& cfg) {
  // context sets straight from a per-user double loop over positions
  std::map<std::string, std::set<std::string>> ctx;
  size_t i = 0;
  while (i < test.size()) {
    size_t j = i;
    while (j < test.size() && test[j].user_id == test[i].user_id) ++j;
    for (size_t p = i; p < j; ++p) {
      for (size_t q = p + 1; q < j; ++q) {
        const bool in_range =
            window.mode == WindowMode::track_based
                ? q - p <= window.radius_tracks
                : test[q].first_timestamp - test[p].first_timestamp <=
                      window.radius_seconds;
        if (!in_range) continue;
        ctx[test[p].track_id].insert(test[q].track_id);
        ctx[test[q].track_id].insert(test[p].track_id);
      }
    }
    i = j;
  }

  OracleReport rep;
  double total = 0.0;
  for (const auto& [a_id, b_ids] : ctx) {
    auto a = emb.vocab.find(a_id);
    if (!a) continue;
    std::set<uint32_t> b_set;
    for (const auto& b_id : b_ids) {
      if (auto b = emb.vocab.find(b_id)) b_set.insert(*b);
    }
    if (b_set.empty()) continue;

    std::vector<uint32_t> candidates;
    for (uint32_t t = 0; t < emb.size(); ++t) {
      if (t != *a && !b_set.contains(t)) candidates.push_back(t);
    }
    if (candidates.empty()) continue;

    double acc = 0.0;
    for (uint32_t b : b_set) {
      const double cb = oracle_cos(emb, *a, b);
      for (uint32_t c : candidates) {
        const double ci = oracle_cos(emb, *a, c);
        if (ci > cb) {
          acc += 1.0;
        } else if (ci == cb) {
          acc += 0.5;
        }
      }
    }
    const double pr = acc / (double(b_set.size()) * double(candidates.size()));

    double count = 0.0;
    if (auto t = train_cooc.vocab().find(a_id)) count = train_cooc.count(*t);
    size_t bin = cfg.bin_edges.size() - 1;
    for (size_t e = 0; e < cfg.bin_edges.size(); ++e) {
      if (count <= double(cfg.bin_edges[e])) {
        bin = e;
        break;
      }
    }
    auto& slot = rep.bins[cfg.bin_edges[bin]];
    slot.first += 1;
    slot.second += pr;
    total += pr;
    ++rep.evaluated;
  }
  for (auto& [edge, slot] : rep.bins) slot.second /= double(slot.first);
  rep.overall = rep.evaluated ? total / double(rep.evaluated) : 0.0;
  return rep;
}

std::vector<PositiveInteraction> random_test_corpus(Rng& rng, int users,
                                                    int tracks,
                                                    int events_per_user) {
  std::vector<PositiveInteraction> out;
  for (int u = 0; u < users; ++u) {
    std::set<int> used;
    int64_t ts = 0;
    for (int e = 0; e < events_per_user; ++e) {
      int t = static_cast<int>(rng.below(tracks));
      if (!used.insert(t).second) continue;
      ts += 1 + static_cast<int64_t>(rng.below(5));
      out.push_back({"u" + std::to_string(u), "t" + std::to_string(t), ts});
    }
  }
  return out;
}

}  // namespace

TEST_SUITE_BEGIN("eval");

TEST_CASE("time split: boundary, train-pair removal, oracle filter") {
  std::vector<PositiveInteraction> all = {
      {"u1", "a", 100}, {"u1", "b", 200}, {"u1", "a", 300},  // duplicate pair
      {"u2", "a", 250}, {"u2", "c", 50},
  };

  SUBCASE("split before everything empties the train side") {
    auto [train, test] = time_split(all, SplitConfig{10});
    CHECK(train.empty());
    CHECK(test.size() == 4);  // (u1, a) duplicate collapses on the test side?
  }
  SUBCASE("pairs seen in train are dropped from test") {
    auto [train, test] = time_split(all, SplitConfig{210});
    REQUIRE(train.size() == 3);  // u1-a, u1-b, u2-c
    REQUIRE(test.size() == 1);   // u2-a survives; u1-a at 300 is dropped
    CHECK(test[0].user_id == "u2");
    CHECK(test[0].track_id == "a");
  }
  SUBCASE("matches a brute-force filter on random corpora") {
    Rng rng(55);
    for (int round = 0; round < 10; ++round) {
      auto corpus = random_test_corpus(rng, 8, 12, 6);
      const int64_t split = static_cast<int64_t>(rng.below(30));
      auto [train, test] = time_split(corpus, SplitConfig{split});
      std::set<std::string> train_pairs;
      size_t expect_train = 0;
      for (const auto& pi : corpus) {
        if (pi.first_timestamp < split) {
          ++expect_train;
          train_pairs.insert(pi.user_id + "|" + pi.track_id);
        }
      }
      size_t expect_test = 0;
      for (const auto& pi : corpus) {
        if (pi.first_timestamp >= split &&
            !train_pairs.contains(pi.user_id + "|" + pi.track_id)) {
          ++expect_test;
        }
      }
      CHECK(train.size() == expect_train);
      CHECK(test.size() == expect_test);
    }
  }
}

TEST_CASE("bin assignment: smallest edge >= count, last bin catches the rest") {
  EvalConfig cfg;  // 5, 10, 20, 50, 100, 1000, 5000, 15000
  CHECK(cfg.bin_edges[bin_for_count(7, cfg)] == 10);
  CHECK(cfg.bin_edges[bin_for_count(3, cfg)] == 5);
  CHECK(cfg.bin_edges[bin_for_count(5, cfg)] == 5);    // upper-inclusive
  CHECK(cfg.bin_edges[bin_for_count(6, cfg)] == 10);
  CHECK(cfg.bin_edges[bin_for_count(20000, cfg)] == 15000);
}

TEST_CASE("percentile rank: hand-constructed cases") {
  SUBCASE("perfect ranking is 0") {
    auto emb = make_embeddings(
        {"a", "b", "i1", "i2"},
        {{1, 0}, {0.99, std::sqrt(1 - 0.99 * 0.99)}, {-1, 0.3}, {-1, -0.2}});
    CHECK(percentile_rank("a", std::vector<std::string>{"b"}, emb) == 0.0);
  }
  SUBCASE("identical embeddings tie everywhere: 0.5") {
    auto emb = make_embeddings({"a", "b", "c", "d"},
                               {{1, 1}, {1, 1}, {1, 1}, {1, 1}});
    CHECK(percentile_rank("a", std::vector<std::string>{"b"}, emb) == 0.5);
  }
  SUBCASE("one context, three candidates, one of them closer: 1/3") {
    auto unit = [](double c) {
      return std::vector<double>{c, std::sqrt(1.0 - c * c)};
    };
    auto emb = make_embeddings({"a", "b", "i1", "i2", "i3"},
                               {{1, 0}, unit(0.9), unit(0.95), unit(0.5),
                                unit(0.2)});
    CHECK(percentile_rank("a", std::vector<std::string>{"b"}, emb) ==
          doctest::Approx(1.0 / 3.0));
  }
  SUBCASE("zero-norm embeddings are an error naming the track") {
    auto emb = make_embeddings({"a", "b", "zz"}, {{1, 0}, {0, 1}, {0, 0}});
    CHECK_THROWS_WITH_AS(
        percentile_rank("a", std::vector<std::string>{"b"}, emb),
        doctest::Contains("zz"), NumericError);
  }
}

TEST_CASE("evaluate matches the brute-force oracle on small corpora") {
  Rng rng(606);
  WindowConfig window;
  window.radius_tracks = 3;
  EvalConfig cfg;
  for (int round = 0; round < 6; ++round) {
    const int tracks = 10 + static_cast<int>(rng.below(40));
    auto train = random_test_corpus(rng, 10, tracks, 8);
    auto test = random_test_corpus(rng, 10, tracks, 6);
    CoocMatrix train_cooc = build_cooc(train, window);

    std::vector<std::string> ids;
    for (int t = 0; t < tracks; ++t) ids.push_back("t" + std::to_string(t));
    auto emb = random_embeddings(ids, 6, 900 + round);

    EvalReport got = evaluate(test, window, train_cooc, emb, cfg);
    OracleReport want = oracle_evaluate(test, window, train_cooc, emb, cfg);

    CHECK(got.evaluated_tracks == want.evaluated);
    CHECK(std::abs(got.overall_mpr - want.overall) < 1e-12);
    REQUIRE(got.bins.size() == want.bins.size());
    for (const BinResult& b : got.bins) {
      REQUIRE(want.bins.contains(b.edge));
      CHECK(b.track_count == want.bins[b.edge].first);
      CHECK(std::abs(b.mpr - want.bins[b.edge].second) < 1e-12);
    }
    for (const BinResult& b : got.bins) {
      CHECK(b.mpr >= 0.0);
      CHECK(b.mpr <= 1.0);
    }
  }
}

TEST_CASE("threaded evaluation equals single-threaded") {
  Rng rng(31337);
  WindowConfig window;
  auto train = random_test_corpus(rng, 12, 30, 8);
  auto test = random_test_corpus(rng, 12, 30, 6);
  CoocMatrix train_cooc = build_cooc(train, window);
  std::vector<std::string> ids;
  for (int t = 0; t < 30; ++t) ids.push_back("t" + std::to_string(t));
  auto emb = random_embeddings(ids, 5, 4242);
  EvalConfig cfg;
  EvalReport a = evaluate(test, window, train_cooc, emb, cfg, 1);
  EvalReport b = evaluate(test, window, train_cooc, emb, cfg, 4);
  CHECK(a.overall_mpr == b.overall_mpr);
  CHECK(a.evaluated_tracks == b.evaluated_tracks);
}

TEST_CASE("percentile rank is invariant to scaling and rotation") {
  Rng rng(17);
  const uint32_t dim = 5;
  std::vector<std::string> ids;
  for (int t = 0; t < 25; ++t) ids.push_back("t" + std::to_string(t));
  auto emb = random_embeddings(ids, dim, 777);
  std::vector<std::string> context = {"t3", "t7", "t11"};
  const double base = percentile_rank("t0", context, emb);

  SUBCASE("uniform positive scaling") {
    EmbeddingSet scaled = emb;
    for (double& v : scaled.data) v *= 37.5;
    CHECK(percentile_rank("t0", context, scaled) == base);
  }
  SUBCASE("common orthogonal rotation") {
    // Gram-Schmidt on a seeded random matrix gives the rotation
    std::vector<std::vector<double>> q(dim, std::vector<double>(dim));
    for (auto& row : q) {
      for (auto& v : row) v = rng.uniform(-1, 1);
    }
    for (uint32_t i = 0; i < dim; ++i) {
      for (uint32_t j = 0; j < i; ++j) {
        double d = 0;
        for (uint32_t c = 0; c < dim; ++c) d += q[i][c] * q[j][c];
        for (uint32_t c = 0; c < dim; ++c) q[i][c] -= d * q[j][c];
      }
      double n = 0;
      for (double v : q[i]) n += v * v;
      n = std::sqrt(n);
      for (double& v : q[i]) v /= n;
    }
    EmbeddingSet rotated = emb;
    for (uint32_t t = 0; t < emb.size(); ++t) {
      for (uint32_t i = 0; i < dim; ++i) {
        double acc = 0;
        for (uint32_t j = 0; j < dim; ++j) acc += q[i][j] * emb.vec(t)[j];
        rotated.vec(t)[i] = acc;
      }
    }
    CHECK(percentile_rank("t0", context, rotated) ==
          doctest::Approx(base).epsilon(1e-9));
  }
}

TEST_CASE("tracks missing from the embeddings are skipped and counted") {
  WindowConfig window;
  std::vector<PositiveInteraction> test = {
      {"u", "known1", 1}, {"u", "ghost", 2}, {"u", "known2", 3}};
  CoocMatrix train_cooc = build_cooc({}, window);
  auto emb = random_embeddings({"known1", "known2"}, 4, 5);
  EvalDiagnostics diag;
  EvalReport rep = evaluate(test, window, train_cooc, emb, EvalConfig{}, 1, &diag);
  CHECK(diag.skipped_no_embedding == 1);
  CHECK(rep.evaluated_tracks == 0);  // only each other as context: no candidates
  CHECK(diag.skipped_no_candidates == 2);
}

TEST_CASE("subsampled candidate sets stay within bounds and are seeded") {
  Rng rng(9);
  WindowConfig window;
  auto test = random_test_corpus(rng, 10, 40, 8);
  CoocMatrix train_cooc = build_cooc({}, window);
  std::vector<std::string> ids;
  for (int t = 0; t < 40; ++t) ids.push_back("t" + std::to_string(t));
  auto emb = random_embeddings(ids, 4, 11);
  EvalConfig cfg;
  cfg.max_eval_tracks_per_query = 10;
  EvalReport a = evaluate(test, window, train_cooc, emb, cfg);
  EvalReport b = evaluate(test, window, train_cooc, emb, cfg);
  CHECK(a.overall_mpr == b.overall_mpr);
  for (const BinResult& bin : a.bins) {
    CHECK(bin.mpr >= 0.0);
    CHECK(bin.mpr <= 1.0);
  }
}

TEST_CASE("eval config validation") {
  EvalConfig cfg;
  cfg.bin_edges = {5, 5};
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.bin_edges = {};
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = EvalConfig{};
  cfg.max_eval_tracks_per_query = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_SUITE_END();
