#include "trackfm/embedding.hpp"

#include <algorithm>
#include <cmath>

#include "trackfm/common.hpp"

namespace trackfm {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double cosine(std::span<const double> a, std::span<const double> b) {
  const double na = norm(a);
  const double nb = norm(b);
  if (na == 0.0 || nb == 0.0) {
    throw NumericError("cosine: zero-norm vector");
  }
  return dot(a, b) / (na * nb);
}

EmbeddingSet compose_final_vectors(const FMParams& params,
                                   const FeatureSpace& space,
                                   ComposeMode mode) {
  if (params.slots != space.slot_count()) {
    throw DataError("compose: parameter/slot count mismatch");
  }
  EmbeddingSet out;
  out.dim = params.k;
  out.vocab = space.tracks;
  out.data.assign(static_cast<size_t>(space.catalog_size()) * params.k, 0.0);
  for (uint32_t t = 0; t < space.catalog_size(); ++t) {
    auto dst = out.vec(t);
    auto track_vec = params.vec(space.track_slot(t));
    for (uint32_t d = 0; d < params.k; ++d) dst[d] = track_vec[d];
    if (mode == ComposeMode::track_only) continue;
    for (uint32_t f : space.track_side[t]) {
      auto side_vec = params.vec(space.side_slot(f));
      for (uint32_t d = 0; d < params.k; ++d) dst[d] += side_vec[d];
    }
    if (mode == ComposeMode::track_plus_context_plus_side) {
      auto ctx_vec = params.vec(space.context_slot(t));
      for (uint32_t d = 0; d < params.k; ++d) dst[d] += ctx_vec[d];
    }
  }
  return out;
}

std::vector<std::pair<uint32_t, double>> top_n_similar(
    uint32_t query, size_t n, const EmbeddingSet& embeddings) {
  if (query >= embeddings.size()) {
    throw DataError("top_n_similar: query index out of range");
  }
  auto q = embeddings.vec(query);
  const double qn = norm(q);
  if (qn == 0.0) {
    throw NumericError("top_n_similar: zero-norm query vector for track " +
                       embeddings.vocab.name(query));
  }

  std::vector<std::pair<uint32_t, double>> scored;
  scored.reserve(embeddings.size());
  for (uint32_t t = 0; t < embeddings.size(); ++t) {
    if (t == query) continue;
    auto v = embeddings.vec(t);
    const double vn = norm(v);
    if (vn == 0.0) continue;  // unrankable
    scored.emplace_back(t, dot(q, v) / (qn * vn));
  }

  auto better = [](const std::pair<uint32_t, double>& a,
                   const std::pair<uint32_t, double>& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  };
  if (n < scored.size()) {
    std::partial_sort(scored.begin(), scored.begin() + n, scored.end(), better);
    scored.resize(n);
  } else {
    std::sort(scored.begin(), scored.end(), better);
  }
  return scored;
}

std::vector<std::pair<std::string, double>> top_n_similar(
    const std::string& query_id, size_t n, const EmbeddingSet& embeddings) {
  auto idx = embeddings.vocab.find(query_id);
  if (!idx) throw DataError("top_n_similar: unknown track " + query_id);
  auto ranked = top_n_similar(*idx, n, embeddings);
  std::vector<std::pair<std::string, double>> out;
  out.reserve(ranked.size());
  for (auto& [t, cos] : ranked) {
    out.emplace_back(embeddings.vocab.name(t), cos);
  }
  return out;
}

}  // namespace trackfm
