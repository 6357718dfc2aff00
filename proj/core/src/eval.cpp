#include "trackfm/eval.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <thread>
#include <unordered_set>

#include "trackfm/random.hpp"

namespace trackfm {

void EvalConfig::validate() const {
  if (bin_edges.empty()) throw ConfigError("eval: bin_edges must be nonempty");
  for (size_t i = 0; i < bin_edges.size(); ++i) {
    if (bin_edges[i] < 1) throw ConfigError("eval: bin edges must be >= 1");
    if (i > 0 && bin_edges[i] <= bin_edges[i - 1]) {
      throw ConfigError("eval: bin edges must be strictly ascending");
    }
  }
  if (max_eval_tracks_per_query && *max_eval_tracks_per_query < 1) {
    throw ConfigError("eval: max_eval_tracks_per_query must be >= 1");
  }
}

std::pair<std::vector<PositiveInteraction>, std::vector<PositiveInteraction>>
time_split(std::span<const PositiveInteraction> interactions,
           const SplitConfig& cfg) {
  std::vector<PositiveInteraction> train;
  std::vector<PositiveInteraction> test;
  std::unordered_set<std::string> train_pairs;
  for (const auto& pi : interactions) {
    if (pi.first_timestamp < cfg.split_timestamp) {
      train_pairs.insert(pi.user_id + '\t' + pi.track_id);
      train.push_back(pi);
    }
  }
  for (const auto& pi : interactions) {
    if (pi.first_timestamp >= cfg.split_timestamp &&
        !train_pairs.contains(pi.user_id + '\t' + pi.track_id)) {
      test.push_back(pi);
    }
  }
  return {std::move(train), std::move(test)};
}

size_t bin_for_count(double count, const EvalConfig& cfg) {
  for (size_t b = 0; b < cfg.bin_edges.size(); ++b) {
    if (count <= static_cast<double>(cfg.bin_edges[b])) return b;
  }
  return cfg.bin_edges.size() - 1;  // beyond the last edge: last bin
}

namespace {

// Row-normalized copy of the embeddings; throws on zero norms so every
// cosine later is well defined.
std::vector<double> normalized_rows(const EmbeddingSet& emb) {
  std::vector<double> out(emb.data.size());
  for (uint32_t t = 0; t < emb.size(); ++t) {
    auto v = emb.vec(t);
    const double n = norm(v);
    if (n == 0.0) {
      throw NumericError("percentile rank: zero-norm embedding for track " +
                         emb.vocab.name(t));
    }
    for (uint32_t d = 0; d < emb.dim; ++d) {
      out[static_cast<size_t>(t) * emb.dim + d] = v[d] / n;
    }
  }
  return out;
}

// Percentile rank from precomputed cosine similarities. `sims` holds the
// cosine of the query to every track; `is_context` flags the b-set; the
// candidate set is everything else except the query (optionally a seeded
// subsample of it). Exact similarity ties count half.
double rank_from_sims(const std::vector<double>& sims,
                      const std::vector<char>& is_context, uint32_t query,
                      const std::vector<uint32_t>& context,
                      const std::optional<uint32_t>& subsample, Rng* rng) {
  std::vector<double> candidates;
  candidates.reserve(sims.size());
  for (uint32_t t = 0; t < sims.size(); ++t) {
    if (t == query || is_context[t]) continue;
    candidates.push_back(sims[t]);
  }
  if (subsample && candidates.size() > *subsample) {
    for (uint32_t i = 0; i < *subsample; ++i) {
      const size_t j = i + static_cast<size_t>(rng->below(candidates.size() - i));
      std::swap(candidates[i], candidates[j]);
    }
    candidates.resize(*subsample);
  }
  if (candidates.empty() || context.empty()) return -1.0;  // undefined

  std::sort(candidates.begin(), candidates.end());
  double acc = 0.0;
  for (uint32_t b : context) {
    const double sb = sims[b];
    const auto lo =
        std::lower_bound(candidates.begin(), candidates.end(), sb);
    const auto hi = std::upper_bound(lo, candidates.end(), sb);
    const double greater = static_cast<double>(candidates.end() - hi);
    const double equal = static_cast<double>(hi - lo);
    acc += greater + 0.5 * equal;
  }
  return acc / (static_cast<double>(context.size()) *
                static_cast<double>(candidates.size()));
}

}  // namespace

double percentile_rank(const std::string& track_id,
                       std::span<const std::string> context_ids,
                       const EmbeddingSet& embeddings) {
  auto a = embeddings.vocab.find(track_id);
  if (!a) throw DataError("percentile_rank: unknown track " + track_id);
  if (context_ids.empty()) {
    throw DataError("percentile_rank: empty context set");
  }
  std::vector<char> is_context(embeddings.size(), 0);
  std::vector<uint32_t> context;
  for (const auto& id : context_ids) {
    uint32_t b = embeddings.vocab.at(id);
    if (b == *a) throw DataError("percentile_rank: track in its own context");
    if (!is_context[b]) {
      is_context[b] = 1;
      context.push_back(b);
    }
  }

  const std::vector<double> normed = normalized_rows(embeddings);
  const uint32_t dim = embeddings.dim;
  std::vector<double> sims(embeddings.size());
  const double* qa = normed.data() + static_cast<size_t>(*a) * dim;
  for (uint32_t t = 0; t < embeddings.size(); ++t) {
    sims[t] = dot({qa, dim}, {normed.data() + static_cast<size_t>(t) * dim, dim});
  }
  double pr = rank_from_sims(sims, is_context, *a, context, std::nullopt, nullptr);
  if (pr < 0.0) {
    throw DataError("percentile_rank: no candidate tracks outside the context");
  }
  return pr;
}

EvalReport evaluate(std::span<const PositiveInteraction> test_interactions,
                    const WindowConfig& window, const CoocMatrix& train_cooc,
                    const EmbeddingSet& embeddings, const EvalConfig& cfg,
                    int threads, EvalDiagnostics* diag) {
  cfg.validate();
  EvalDiagnostics local_diag;
  EvalDiagnostics& dg = diag ? *diag : local_diag;
  dg = EvalDiagnostics{};

  // Context pairs come from the same windowing that produced the train
  // matrix.
  const CoocMatrix test_cooc = build_cooc(test_interactions, window);
  const auto entries = test_cooc.sorted_entries();

  // Adjacency in embedding-index space: for each evaluated track, the
  // tracks seen in its test context.
  std::vector<std::vector<uint32_t>> context_of(embeddings.size());
  std::vector<char> missing_logged(test_cooc.num_tracks(), 0);
  auto emb_index = [&](uint32_t test_idx) -> std::optional<uint32_t> {
    return embeddings.vocab.find(test_cooc.vocab().name(test_idx));
  };
  for (const CoocEntry& e : entries) {
    auto ei = emb_index(e.i);
    auto ej = emb_index(e.j);
    for (uint32_t t : {e.i, e.j}) {
      if (!emb_index(t) && !missing_logged[t]) {
        missing_logged[t] = 1;
        ++dg.skipped_no_embedding;
      }
    }
    if (ei && ej) {
      context_of[*ei].push_back(*ej);
      context_of[*ej].push_back(*ei);
    }
  }

  std::vector<uint32_t> evaluated;
  for (uint32_t t = 0; t < embeddings.size(); ++t) {
    if (!context_of[t].empty()) evaluated.push_back(t);
  }

  const std::vector<double> normed = normalized_rows(embeddings);
  const uint32_t dim = embeddings.dim;
  std::vector<double> ranks(evaluated.size(), -1.0);

  auto eval_range = [&](size_t begin, size_t end) {
    std::vector<double> sims(embeddings.size());
    std::vector<char> is_context(embeddings.size(), 0);
    for (size_t idx = begin; idx < end; ++idx) {
      const uint32_t a = evaluated[idx];
      auto& ctx = context_of[a];
      std::sort(ctx.begin(), ctx.end());
      ctx.erase(std::unique(ctx.begin(), ctx.end()), ctx.end());
      const double* qa = normed.data() + static_cast<size_t>(a) * dim;
      for (uint32_t t = 0; t < embeddings.size(); ++t) {
        sims[t] =
            dot({qa, dim}, {normed.data() + static_cast<size_t>(t) * dim, dim});
      }
      for (uint32_t b : ctx) is_context[b] = 1;
      Rng rng(mix64(cfg.rng_seed, a));
      ranks[idx] = rank_from_sims(sims, is_context, a, ctx,
                                  cfg.max_eval_tracks_per_query, &rng);
      for (uint32_t b : ctx) is_context[b] = 0;
    }
  };

  if (threads <= 1 || evaluated.size() < 2) {
    eval_range(0, evaluated.size());
  } else {
    const size_t n_threads = std::min<size_t>(threads, evaluated.size());
    const size_t chunk = (evaluated.size() + n_threads - 1) / n_threads;
    std::vector<std::thread> workers;
    std::exception_ptr error;
    std::mutex error_mu;
    for (size_t w = 0; w < n_threads; ++w) {
      const size_t lo = w * chunk;
      const size_t hi = std::min(evaluated.size(), lo + chunk);
      if (lo >= hi) break;
      workers.emplace_back([&, lo, hi] {
        try {
          eval_range(lo, hi);
        } catch (...) {
          std::lock_guard<std::mutex> g(error_mu);
          if (!error) error = std::current_exception();
        }
      });
    }
    for (auto& t : workers) t.join();
    if (error) std::rethrow_exception(error);
  }

  // Aggregate into bins by train occurrence count.
  std::vector<double> bin_sum(cfg.bin_edges.size(), 0.0);
  std::vector<uint64_t> bin_count(cfg.bin_edges.size(), 0);
  double total = 0.0;
  uint64_t n_eval = 0;
  for (size_t idx = 0; idx < evaluated.size(); ++idx) {
    if (ranks[idx] < 0.0) {
      ++dg.skipped_no_candidates;
      continue;
    }
    const uint32_t a = evaluated[idx];
    auto train_idx = train_cooc.vocab().find(embeddings.vocab.name(a));
    const double count = train_idx ? train_cooc.count(*train_idx) : 0.0;
    const size_t b = bin_for_count(count, cfg);
    bin_sum[b] += ranks[idx];
    ++bin_count[b];
    total += ranks[idx];
    ++n_eval;
  }

  EvalReport report;
  for (size_t b = 0; b < cfg.bin_edges.size(); ++b) {
    if (bin_count[b] == 0) continue;
    report.bins.push_back({cfg.bin_edges[b], bin_count[b],
                           bin_sum[b] / static_cast<double>(bin_count[b])});
  }
  report.evaluated_tracks = n_eval;
  report.overall_mpr = n_eval ? total / static_cast<double>(n_eval) : 0.0;
  return report;
}

}  // namespace trackfm
