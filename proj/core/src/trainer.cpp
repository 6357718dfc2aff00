#include "trackfm/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "trackfm/common.hpp"

namespace trackfm {

void TrainConfig::validate() const {
  if (learning_rate <= 0.0) throw ConfigError("train: learning_rate must be > 0");
  if (lambda1 < 0.0 || lambda2 < 0.0) {
    throw ConfigError("train: regularization weights must be >= 0");
  }
  if (adagrad_epsilon <= 0.0) {
    throw ConfigError("train: adagrad_epsilon must be > 0");
  }
  if (k == 0) throw ConfigError("train: latent dimension must be >= 1");
  if (smoothing_exponent < 0.0) {
    throw ConfigError("train: smoothing_exponent must be >= 0");
  }
  if (threads < 1) throw ConfigError("train: threads must be >= 1");
}

double positive_instance_weight(double pair_weight, PositiveWeight mode) {
  return mode == PositiveWeight::unit ? 1.0
                                      : 1.0 + std::log2(1.0 + pair_weight);
}

double loss_value(double prediction, double target, Loss loss) {
  if (loss == Loss::squared) {
    const double d = prediction - target;
    return d * d;
  }
  // log(1 + exp(-yt*yp)) via log1p, split on the sign of the margin so the
  // exp argument is never positive.
  const double margin = prediction * target;
  if (margin > 0.0) return std::log1p(std::exp(-margin));
  return -margin + std::log1p(std::exp(margin));
}

double loss_derivative(double prediction, double target, Loss loss) {
  if (loss == Loss::squared) return 2.0 * (prediction - target);
  // d/dyp log(1 + exp(-yt*yp)) = -yt * sigmoid(-yt*yp)
  const double margin = prediction * target;
  double sig;
  if (margin > 0.0) {
    const double e = std::exp(-margin);
    sig = e / (1.0 + e);
  } else {
    sig = 1.0 / (1.0 + std::exp(margin));
  }
  return -target * sig;
}

NegativeSampler::NegativeSampler(const CoocMatrix& cooc,
                                 double smoothing_exponent, uint64_t seed)
    : rng_(mix64(seed, fnv1a64("neg-sampler"))) {
  if (cooc.empty()) {
    throw DataError("negative sampler: empty co-occurrence matrix");
  }
  const auto& counts = cooc.counts();
  tracks_.reserve(counts.size());
  cumulative_.reserve(counts.size());
  double total = 0.0;
  for (uint32_t t = 0; t < counts.size(); ++t) {
    if (counts[t] <= 0.0) continue;
    total += std::pow(counts[t], smoothing_exponent);
    tracks_.push_back(t);
    cumulative_.push_back(total);
  }
  if (tracks_.empty()) {
    throw DataError("negative sampler: no tracks with positive counts");
  }
}

uint32_t NegativeSampler::sample(Rng& rng) const {
  const double u = rng.uniform() * cumulative_.back();
  size_t idx = static_cast<size_t>(
      std::upper_bound(cumulative_.begin(), cumulative_.end(), u) -
      cumulative_.begin());
  if (idx >= tracks_.size()) idx = tracks_.size() - 1;
  return tracks_[idx];
}

Trainer::Trainer(const CoocMatrix& cooc, const FeatureSpace& space,
                 const TrainConfig& cfg)
    : cooc_(cooc),
      space_(space),
      cfg_(cfg),
      pairs_(cooc.sorted_entries()),
      params_(init_params(space.slot_count(), cfg.k, cfg.rng_seed)),
      state_(AdaGradState::zeros(space.slot_count())),
      sampler_(cooc, cfg.smoothing_exponent, cfg.rng_seed) {
  cfg_.validate();
  if (space_.catalog_size() != cooc_.num_tracks()) {
    throw DataError("trainer: feature space catalog != cooc vocabulary");
  }
}

namespace {

// One AdaGrad step on p*L(yhat, y) plus the regularization pull on the
// active slots. Gradients are computed at the pre-step parameters (the
// vector sum is cached before any update). Returns p*L.
double sgd_step(std::span<const uint32_t> slots, double target,
                double instance_weight, const TrainConfig& cfg,
                FMParams& params, AdaGradState& state,
                std::vector<double>& sum_buf, std::vector<double>& grad_buf) {
  const uint32_t k = params.k;
  sum_buf.assign(k, 0.0);
  double bias_sum = 0.0;
  double sq_sum = 0.0;
  for (uint32_t s : slots) {
    bias_sum += params.bias[s];
    auto v = params.vec(s);
    for (uint32_t d = 0; d < k; ++d) {
      sum_buf[d] += v[d];
      sq_sum += v[d] * v[d];
    }
  }
  double total_sq = 0.0;
  for (double t : sum_buf) total_sq += t * t;
  const double yhat = bias_sum + 0.5 * (total_sq - sq_sum);
  if (!std::isfinite(yhat)) {
    throw NumericError(
        "training diverged: non-finite prediction (lower the learning rate)");
  }

  const double lval = loss_value(yhat, target, cfg.loss);
  const double dl = instance_weight * loss_derivative(yhat, target, cfg.loss);

  for (uint32_t s : slots) {
    const double gb = dl + 2.0 * cfg.lambda1 * params.bias[s];
    state.g_bias[s] += gb * gb;
    params.bias[s] -=
        cfg.learning_rate * gb / std::sqrt(state.g_bias[s] + cfg.adagrad_epsilon);

    auto v = params.vec(s);
    double norm_sq = 0.0;
    for (uint32_t d = 0; d < k; ++d) {
      const double g = dl * (sum_buf[d] - v[d]) + 2.0 * cfg.lambda2 * v[d];
      grad_buf[d] = g;
      norm_sq += g * g;
    }
    if (!std::isfinite(norm_sq)) {
      throw NumericError(
          "training diverged: non-finite gradient (lower the learning rate)");
    }
    state.g_vec[s] += norm_sq;
    const double step =
        cfg.learning_rate / std::sqrt(state.g_vec[s] + cfg.adagrad_epsilon);
    for (uint32_t d = 0; d < k; ++d) v[d] -= step * grad_buf[d];
  }
  return instance_weight * lval;
}

}  // namespace

double Trainer::run_shard(std::span<const uint32_t> order, uint64_t shard_seed) {
  Rng rng(shard_seed);
  std::vector<double> sum_buf(cfg_.k), grad_buf(cfg_.k);
  double total = 0.0;
  for (uint32_t idx : order) {
    const CoocEntry& e = pairs_[idx];
    const bool flip = rng.coin();
    const uint32_t focal = flip ? e.j : e.i;
    const uint32_t context = flip ? e.i : e.j;
    auto slots =
        encode_instance(focal, context, space_, cfg_.include_context_side);
    if (cfg_.loss == Loss::squared) {
      total += sgd_step(slots, std::log2(e.weight),
                        positive_instance_weight(e.weight, cfg_.positive_weight),
                        cfg_, params_, state_, sum_buf, grad_buf);
      continue;
    }
    total += sgd_step(slots, +1.0,
                      positive_instance_weight(e.weight, cfg_.positive_weight),
                      cfg_, params_, state_, sum_buf, grad_buf);
    for (uint32_t m = 0; m < cfg_.negatives_per_positive; ++m) {
      auto neg_slots = encode_instance(focal, sampler_.sample(rng), space_,
                                       cfg_.include_context_side);
      total += sgd_step(neg_slots, -1.0, 1.0, cfg_, params_, state_, sum_buf,
                        grad_buf);
    }
  }
  return total;
}

double Trainer::train_epoch() {
  const uint64_t epoch_seed = mix64(cfg_.rng_seed, 0xe90c + epoch_);
  std::vector<uint32_t> order(pairs_.size());
  for (uint32_t i = 0; i < order.size(); ++i) order[i] = i;
  {
    Rng shuffle_rng(mix64(epoch_seed, fnv1a64("order")));
    shuffle(order, shuffle_rng);
  }

  const uint64_t instances_per_pair =
      cfg_.loss == Loss::squared ? 1 : 1 + cfg_.negatives_per_positive;
  const uint64_t n_instances = pairs_.size() * instances_per_pair;

  double total = 0.0;
  if (cfg_.threads <= 1 || order.size() < 2) {
    total = run_shard(order, mix64(epoch_seed, fnv1a64("steps")));
  } else {
    // Lock-free parallel mode: threads update shared parameters over
    // disjoint pair batches; races on hot slots are benign but make the
    // result nondeterministic.
    const size_t n_threads = std::min<size_t>(cfg_.threads, order.size());
    std::vector<std::thread> workers;
    std::vector<double> partial(n_threads, 0.0);
    const size_t chunk = (order.size() + n_threads - 1) / n_threads;
    for (size_t w = 0; w < n_threads; ++w) {
      const size_t lo = w * chunk;
      const size_t hi = std::min(order.size(), lo + chunk);
      workers.emplace_back([&, w, lo, hi] {
        partial[w] = run_shard(std::span(order).subspan(lo, hi - lo),
                               mix64(epoch_seed, w + 1));
      });
    }
    for (auto& t : workers) t.join();
    for (double p : partial) total += p;
  }

  ++epoch_;
  if (!params_.all_finite()) {
    throw NumericError(
        "training diverged: non-finite parameters after epoch " +
        std::to_string(epoch_) + " (lower the learning rate)");
  }
  return n_instances == 0 ? 0.0 : total / static_cast<double>(n_instances);
}

std::vector<double> Trainer::train() {
  std::vector<double> summaries;
  summaries.reserve(cfg_.epochs);
  for (uint32_t e = 0; e < cfg_.epochs; ++e) summaries.push_back(train_epoch());
  return summaries;
}

double Trainer::objective() const {
  return objective_value(cooc_, space_, params_, cfg_);
}

double objective_value(const CoocMatrix& cooc, const FeatureSpace& space,
                       const FMParams& params, const TrainConfig& cfg) {
  if (space.slot_count() != params.slots) {
    throw DataError("objective: parameter/slot count mismatch");
  }
  double sum = 0.0;
  if (!cooc.empty()) {
    const auto pairs = cooc.sorted_entries();
    // Fixed orientation and a fresh seeded sampler make this a pure
    // function of (matrix, params, cfg).
    std::optional<NegativeSampler> sampler;
    Rng rng(mix64(cfg.rng_seed, fnv1a64("objective")));
    if (cfg.loss == Loss::logistic) {
      sampler.emplace(cooc, cfg.smoothing_exponent, cfg.rng_seed);
    }
    for (const CoocEntry& e : pairs) {
      auto slots =
          encode_instance(e.i, e.j, space, cfg.include_context_side);
      const double p = positive_instance_weight(e.weight, cfg.positive_weight);
      if (cfg.loss == Loss::squared) {
        sum += p * loss_value(predict(slots, params), std::log2(e.weight),
                              Loss::squared);
        continue;
      }
      sum += p * loss_value(predict(slots, params), +1.0, Loss::logistic);
      for (uint32_t m = 0; m < cfg.negatives_per_positive; ++m) {
        auto neg = encode_instance(e.i, sampler->sample(rng), space,
                                   cfg.include_context_side);
        sum += loss_value(predict(neg, params), -1.0, Loss::logistic);
      }
    }
  }
  double bias_sq = 0.0;
  for (double b : params.bias) bias_sq += b * b;
  double vec_sq = 0.0;
  for (double v : params.latent) vec_sq += v * v;
  return sum + cfg.lambda1 * bias_sq + cfg.lambda2 * vec_sq;
}

}  // namespace trackfm
