#include "trackfm/fm.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "trackfm/common.hpp"
#include "trackfm/random.hpp"

namespace trackfm {

void FeatureSpace::validate() const {
  if (track_side.size() != tracks.size()) {
    throw ConfigError("feature space: side list size != catalog size");
  }
  for (uint32_t t = 0; t < track_side.size(); ++t) {
    std::unordered_set<uint32_t> seen;
    for (uint32_t f : track_side[t]) {
      if (f >= side_features.size()) {
        throw ConfigError("feature space: side index out of range");
      }
      if (!seen.insert(f).second) {
        throw ConfigError("feature space: duplicate side feature on track " +
                          tracks.name(t));
      }
    }
  }
}

FeatureSpace make_feature_space(const Vocab& tracks) {
  FeatureSpace space;
  space.tracks = tracks;
  space.track_side.resize(tracks.size());
  return space;
}

FeatureSpace make_feature_space(
    const Vocab& tracks,
    std::span<const std::pair<std::string, std::string>> side_pairs,
    uint64_t* ignored) {
  FeatureSpace space = make_feature_space(tracks);
  uint64_t skipped = 0;
  for (const auto& [track_id, feature_id] : side_pairs) {
    auto t = tracks.find(track_id);
    if (!t) {
      ++skipped;
      continue;
    }
    uint32_t f = space.side_features.add(feature_id);
    auto& list = space.track_side[*t];
    if (std::find(list.begin(), list.end(), f) == list.end()) {
      list.push_back(f);
    }
  }
  if (ignored) *ignored = skipped;
  return space;
}

bool FMParams::all_finite() const {
  for (double b : bias) {
    if (!std::isfinite(b)) return false;
  }
  for (double v : latent) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

FMParams init_params(uint32_t slots, uint32_t k, uint64_t seed) {
  if (k == 0) throw ConfigError("fm: latent dimension must be >= 1");
  FMParams p;
  p.slots = slots;
  p.k = k;
  p.bias.assign(slots, 0.0);
  p.latent.resize(static_cast<size_t>(slots) * k);
  Rng rng(mix64(seed, fnv1a64("fm-init")));
  const double half = 0.5 / static_cast<double>(k);
  for (double& v : p.latent) v = rng.uniform(-half, half);
  return p;
}

std::vector<uint32_t> encode_instance(uint32_t track, uint32_t context,
                                      const FeatureSpace& space,
                                      bool include_context_side) {
  const uint32_t c = space.catalog_size();
  if (track >= c || context >= c) {
    throw DataError("encode_instance: track index out of range");
  }
  std::vector<uint32_t> slots;
  slots.reserve(2 + space.track_side[track].size() +
                (include_context_side ? space.track_side[context].size() : 0));
  slots.push_back(space.track_slot(track));
  slots.push_back(space.context_slot(context));
  for (uint32_t f : space.track_side[track]) slots.push_back(space.side_slot(f));
  if (include_context_side) {
    for (uint32_t f : space.track_side[context]) {
      uint32_t s = space.side_slot(f);
      if (std::find(slots.begin(), slots.end(), s) == slots.end()) {
        slots.push_back(s);  // track and context may share a feature
      }
    }
  }
  return slots;
}

double predict(std::span<const uint32_t> active_slots, const FMParams& params) {
  // sum_{i<j} v_i.v_j == (|sum v|^2 - sum |v|^2) / 2, linear in the number
  // of active slots.
  double bias_sum = 0.0;
  double sq_sum = 0.0;
  std::vector<double> total(params.k, 0.0);
  for (uint32_t s : active_slots) {
    if (s >= params.slots) throw DataError("predict: slot index out of range");
    bias_sum += params.bias[s];
    auto v = params.vec(s);
    for (uint32_t d = 0; d < params.k; ++d) {
      total[d] += v[d];
      sq_sum += v[d] * v[d];
    }
  }
  double total_sq = 0.0;
  for (double t : total) total_sq += t * t;
  return bias_sum + 0.5 * (total_sq - sq_sum);
}

FMGradient gradient(std::span<const uint32_t> active_slots,
                    const FMParams& params) {
  std::vector<double> total(params.k, 0.0);
  for (uint32_t s : active_slots) {
    if (s >= params.slots) throw DataError("gradient: slot index out of range");
    auto v = params.vec(s);
    for (uint32_t d = 0; d < params.k; ++d) total[d] += v[d];
  }
  FMGradient g;
  g.bias.assign(active_slots.size(), 1.0);
  g.latent.resize(active_slots.size() * params.k);
  for (size_t a = 0; a < active_slots.size(); ++a) {
    auto v = params.vec(active_slots[a]);
    for (uint32_t d = 0; d < params.k; ++d) {
      g.latent[a * params.k + d] = total[d] - v[d];
    }
  }
  return g;
}

}  // namespace trackfm
