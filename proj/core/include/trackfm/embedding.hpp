#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "trackfm/fm.hpp"
#include "trackfm/vocab.hpp"

namespace trackfm {

// Final per-track vectors with their id mapping. Immutable after
// composition; queries are read-only.
struct EmbeddingSet {
  uint32_t dim = 0;
  Vocab vocab;
  std::vector<double> data;  // vocab.size() x dim, row-major

  std::span<const double> vec(uint32_t idx) const {
    return {data.data() + static_cast<size_t>(idx) * dim, dim};
  }
  std::span<double> vec(uint32_t idx) {
    return {data.data() + static_cast<size_t>(idx) * dim, dim};
  }
  uint32_t size() const { return vocab.size(); }
};

enum class ComposeMode : uint8_t {
  track_plus_side,               // track vector plus its side-feature vectors
  track_only,
  track_plus_context_plus_side,  // additionally folds in the context-slot vector
};

// The final vector of a track is the sum of the track's latent vectors;
// the mode selects which slots participate.
EmbeddingSet compose_final_vectors(const FMParams& params,
                                   const FeatureSpace& space,
                                   ComposeMode mode = ComposeMode::track_plus_side);

double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> a);
// Throws NumericError when either vector has zero norm.
double cosine(std::span<const double> a, std::span<const double> b);

// Exact top-n by cosine similarity, query excluded, ties broken by
// ascending track index. n larger than the catalog returns the full
// ranked list. Candidates with zero-norm vectors are left out; a
// zero-norm query throws NumericError naming the track.
std::vector<std::pair<uint32_t, double>> top_n_similar(
    uint32_t query, size_t n, const EmbeddingSet& embeddings);
std::vector<std::pair<std::string, double>> top_n_similar(
    const std::string& query_id, size_t n, const EmbeddingSet& embeddings);

}  // namespace trackfm
