#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "trackfm/vocab.hpp"

namespace trackfm {

// Feature slot layout for training instances:
//   [0, C)       track one-hot
//   [C, 2C)      context-track one-hot
//   [2C, 2C+F)   categorical side features (e.g. creator)
// n = 2C + F slots in total.
struct FeatureSpace {
  Vocab tracks;         // size C
  Vocab side_features;  // size F
  // Per track index, the dense side-feature indices attached to it.
  std::vector<std::vector<uint32_t>> track_side;

  uint32_t catalog_size() const { return tracks.size(); }
  uint32_t side_count() const { return side_features.size(); }
  uint32_t slot_count() const { return 2 * tracks.size() + side_features.size(); }

  uint32_t track_slot(uint32_t t) const { return t; }
  uint32_t context_slot(uint32_t t) const { return catalog_size() + t; }
  uint32_t side_slot(uint32_t f) const { return 2 * catalog_size() + f; }

  void validate() const;
};

// Space with no side features over an existing track vocabulary.
FeatureSpace make_feature_space(const Vocab& tracks);

// Space with categorical side features given as (track_id, feature_id)
// pairs. Pairs whose track is not in the vocabulary are ignored and
// counted; duplicate features per track collapse to one.
FeatureSpace make_feature_space(
    const Vocab& tracks,
    std::span<const std::pair<std::string, std::string>> side_pairs,
    uint64_t* ignored = nullptr);

// Model parameters: one bias and one k-dimensional latent vector per slot.
struct FMParams {
  uint32_t slots = 0;
  uint32_t k = 0;
  std::vector<double> bias;    // slots
  std::vector<double> latent;  // slots * k, row-major

  std::span<double> vec(uint32_t slot) {
    return {latent.data() + static_cast<size_t>(slot) * k, k};
  }
  std::span<const double> vec(uint32_t slot) const {
    return {latent.data() + static_cast<size_t>(slot) * k, k};
  }

  bool all_finite() const;
};

// Biases start at zero; latent entries are i.i.d. uniform in
// [-0.5/k, 0.5/k], seeded.
FMParams init_params(uint32_t slots, uint32_t k, uint64_t seed);

// Active slots for a (track, context) pair: the two one-hot slots plus
// the track's side features (plus the context's when requested). All
// indices are distinct and < n.
std::vector<uint32_t> encode_instance(uint32_t track, uint32_t context,
                                      const FeatureSpace& space,
                                      bool include_context_side = false);

// Prediction over binary indicators: sum of active biases plus the dot
// products of all active latent-vector pairs. Invariant under reordering
// of the active slots.
double predict(std::span<const uint32_t> active_slots, const FMParams& params);

// Partial derivatives of the prediction with respect to the parameters of
// the active slots: d/dw_i = 1 and d/dv_i = sum of the other active
// vectors.
struct FMGradient {
  std::vector<double> bias;    // per active slot, always 1
  std::vector<double> latent;  // n_active * k
};
FMGradient gradient(std::span<const uint32_t> active_slots,
                    const FMParams& params);

}  // namespace trackfm
