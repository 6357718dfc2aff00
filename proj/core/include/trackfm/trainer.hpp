#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "trackfm/cooc.hpp"
#include "trackfm/fm.hpp"
#include "trackfm/random.hpp"

namespace trackfm {

enum class Loss : uint8_t { logistic, squared };
enum class PositiveWeight : uint8_t { unit, cooc_weight };

struct TrainConfig {
  Loss loss = Loss::logistic;
  uint32_t negatives_per_positive = 5;  // ignored under squared loss
  double smoothing_exponent = 0.75;     // negative-sampling distribution
  uint32_t epochs = 10;
  double learning_rate = 0.05;
  double lambda1 = 0.0;  // bias regularization
  double lambda2 = 0.0;  // latent-vector regularization
  double adagrad_epsilon = 1e-8;
  uint64_t rng_seed = 42;
  uint32_t k = 150;
  PositiveWeight positive_weight = PositiveWeight::unit;
  bool include_context_side = false;
  int threads = 1;  // > 1 enables lock-free parallel updates (nondeterministic)

  void validate() const;
};

// One scalar accumulator per bias and one per latent vector; the vector
// accumulator collects the squared L2 norm of the whole vector gradient,
// so a single learning rate applies to all dimensions of a vector.
struct AdaGradState {
  std::vector<double> g_bias;
  std::vector<double> g_vec;

  static AdaGradState zeros(uint32_t slots) {
    return {std::vector<double>(slots, 0.0), std::vector<double>(slots, 0.0)};
  }
};

// Draws context tracks with probability proportional to
// track_count^smoothing_exponent over the tracks observed in the matrix.
class NegativeSampler {
 public:
  NegativeSampler(const CoocMatrix& cooc, double smoothing_exponent,
                  uint64_t seed);

  uint32_t sample() { return sample(rng_); }
  uint32_t sample(Rng& rng) const;

  size_t support_size() const { return tracks_.size(); }

 private:
  std::vector<uint32_t> tracks_;
  std::vector<double> cumulative_;
  Rng rng_;
};

// Pointwise losses. The logistic branch uses a log1p/exp identity that is
// stable for large |prediction|.
double loss_value(double prediction, double target, Loss loss);
// d loss / d prediction.
double loss_derivative(double prediction, double target, Loss loss);

// SGD trainer over the observed pairs of a co-occurrence matrix.
//
// Each epoch visits every stored pair in seeded random order. Under
// logistic loss a pair yields one positive instance and
// negatives_per_positive instances with the context slot resampled from
// the smoothed occurrence distribution; under squared loss it yields one
// instance with target log2(pair weight). Updates are AdaGrad steps with
// a shared per-vector rate; the per-instance objective adds a
// regularization pull on the active slots only.
//
// Single-threaded mode is bit-for-bit deterministic given the seed.
// threads > 1 runs lock-free parallel updates over disjoint pair batches
// with benign races on the parameters; results are then nondeterministic.
class Trainer {
 public:
  Trainer(const CoocMatrix& cooc, const FeatureSpace& space,
          const TrainConfig& cfg);

  // Runs one epoch; returns the mean pre-step weighted loss over the
  // instances visited. Throws NumericError when parameters stop being
  // finite (learning rate too high).
  double train_epoch();

  // Runs cfg.epochs epochs; returns the per-epoch summaries.
  std::vector<double> train();

  // Full objective value with a fixed seeded negative sample set.
  double objective() const;

  const FMParams& params() const { return params_; }
  FMParams& params() { return params_; }
  const AdaGradState& state() const { return state_; }
  uint64_t epochs_done() const { return epoch_; }

 private:
  double run_shard(std::span<const uint32_t> order, uint64_t shard_seed);

  const CoocMatrix& cooc_;
  const FeatureSpace& space_;
  TrainConfig cfg_;
  std::vector<CoocEntry> pairs_;
  FMParams params_;
  AdaGradState state_;
  NegativeSampler sampler_;
  uint64_t epoch_ = 0;
};

// Full-pass value of the training objective: the weighted instance losses
// plus the global parameter penalties lambda1*|w|^2 and lambda2*sum|v_i|^2.
// Under logistic loss the negative set is drawn fresh from cfg.rng_seed,
// so repeated calls with equal inputs return the same value.
double objective_value(const CoocMatrix& cooc, const FeatureSpace& space,
                       const FMParams& params, const TrainConfig& cfg);

// Instance weight for an observed pair of the given co-occurrence weight.
double positive_instance_weight(double pair_weight, PositiveWeight mode);

}  // namespace trackfm
