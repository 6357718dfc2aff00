#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "trackfm/embedding.hpp"
#include "trackfm/ingest.hpp"
#include "trackfm/vocab.hpp"

namespace trackfm {

// Binary user-track interaction matrix in adjacency-list form. Vocabulary
// indices follow first appearance in the (canonically sorted) input.
struct InteractionMatrix {
  Vocab users;
  Vocab tracks;
  std::vector<std::vector<uint32_t>> user_items;
  std::vector<std::vector<uint32_t>> item_users;
  uint64_t observed = 0;

  static InteractionMatrix from_interactions(
      std::span<const PositiveInteraction> interactions);
};

// Implicit-feedback matrix factorization model. Observed cells carry
// confidence 1 + alpha, unobserved cells confidence 1 with target 0.
struct ImplicitModel {
  uint32_t k = 0;
  double alpha_conf = 0.0;
  double lambda_user = 0.0;
  double lambda_item = 0.0;
  std::vector<double> user_vecs;  // |users| x k, row-major
  std::vector<double> item_vecs;  // |tracks| x k, row-major

  bool all_finite() const;
};

struct AlsConfig {
  uint32_t k = 150;
  uint32_t sweeps = 15;
  double lambda = 0.1;                 // applied to both sides by default
  std::optional<double> lambda_user;   // optional per-side override
  std::optional<double> lambda_item;
  std::optional<double> alpha;         // confidence scale; auto when unset
  uint64_t rng_seed = 42;
  int threads = 1;

  void validate() const;
};

// Confidence scale that balances total positive and negative mass:
// (#cells - #observed) / #observed. Degenerate fully dense input yields 0
// (flag it); empty input throws.
double choose_alpha(const InteractionMatrix& m);

// User vectors start at zero (the first half-sweep solves them exactly),
// item vectors are small seeded uniforms.
ImplicitModel init_implicit_model(const InteractionMatrix& m,
                                  const AlsConfig& cfg);

// Exact value of the weighted regularized objective over all cells.
double als_objective(const InteractionMatrix& m, const ImplicitModel& model);

// One alternating sweep: solves every user vector exactly with items
// fixed, then every item vector with users fixed, via the k x k Gram
// system (never materializing the dense confidence matrix). Returns the
// objective after the sweep, which never exceeds the value before it.
// lambda == 0 with a singular system throws NumericError.
double als_sweep(const InteractionMatrix& m, ImplicitModel& model,
                 int threads = 1);

// init + cfg.sweeps sweeps. When objective_curve is given it receives the
// post-sweep objective values in order.
ImplicitModel train_als(const InteractionMatrix& m, const AlsConfig& cfg,
                        std::vector<double>* objective_curve = nullptr);

// Item vectors as an embedding set over the track vocabulary, pluggable
// into the same evaluation as the factorization-machine embeddings.
EmbeddingSet item_embeddings(const InteractionMatrix& m,
                             const ImplicitModel& model);

}  // namespace trackfm
