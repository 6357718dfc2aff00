#include "trackfm/als.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <thread>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/LU>

#include "trackfm/random.hpp"

namespace trackfm {

namespace {
using RowMajor =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMajor>;
using ConstMapMat = Eigen::Map<const RowMajor>;
}  // namespace

void AlsConfig::validate() const {
  if (k == 0) throw ConfigError("als: latent dimension must be >= 1");
  if (lambda < 0.0 || (lambda_user && *lambda_user < 0.0) ||
      (lambda_item && *lambda_item < 0.0)) {
    throw ConfigError("als: regularization must be >= 0");
  }
  if (alpha && *alpha < 0.0) throw ConfigError("als: alpha must be >= 0");
  if (threads < 1) throw ConfigError("als: threads must be >= 1");
}

InteractionMatrix InteractionMatrix::from_interactions(
    std::span<const PositiveInteraction> interactions) {
  InteractionMatrix m;
  for (const auto& pi : interactions) {
    uint32_t u = m.users.add(pi.user_id);
    uint32_t t = m.tracks.add(pi.track_id);
    if (u >= m.user_items.size()) m.user_items.resize(u + 1);
    if (t >= m.item_users.size()) m.item_users.resize(t + 1);
    m.user_items[u].push_back(t);
    m.item_users[t].push_back(u);
    ++m.observed;
  }
  return m;
}

bool ImplicitModel::all_finite() const {
  for (double v : user_vecs) {
    if (!std::isfinite(v)) return false;
  }
  for (double v : item_vecs) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

double choose_alpha(const InteractionMatrix& m) {
  if (m.observed == 0) {
    throw DataError("choose_alpha: no observed interactions");
  }
  const double cells = static_cast<double>(m.users.size()) *
                       static_cast<double>(m.tracks.size());
  return (cells - static_cast<double>(m.observed)) /
         static_cast<double>(m.observed);
}

ImplicitModel init_implicit_model(const InteractionMatrix& m,
                                  const AlsConfig& cfg) {
  cfg.validate();
  ImplicitModel model;
  model.k = cfg.k;
  model.alpha_conf = cfg.alpha ? *cfg.alpha : choose_alpha(m);
  model.lambda_user = cfg.lambda_user ? *cfg.lambda_user : cfg.lambda;
  model.lambda_item = cfg.lambda_item ? *cfg.lambda_item : cfg.lambda;
  model.user_vecs.assign(static_cast<size_t>(m.users.size()) * cfg.k, 0.0);
  model.item_vecs.resize(static_cast<size_t>(m.tracks.size()) * cfg.k);
  Rng rng(mix64(cfg.rng_seed, fnv1a64("als-init")));
  for (double& v : model.item_vecs) v = rng.uniform(-0.05, 0.05);
  return model;
}

namespace {

// Solves one side of the alternation: for every row of `solved` (over
// `lists`), minimize the weighted least squares with the other side
// fixed. The dense confidence matrix is never formed: the k x k Gram of
// the fixed side covers all unobserved cells, and observed cells only add
// alpha-scaled rank-one terms.
void solve_side(MapMat solved, ConstMapMat fixed,
                const std::vector<std::vector<uint32_t>>& lists, double alpha,
                double lambda, int threads) {
  const Eigen::Index k = fixed.cols();
  const Eigen::MatrixXd gram = fixed.transpose() * fixed;

  auto solve_rows = [&](size_t begin, size_t end) {
    Eigen::MatrixXd a(k, k);
    Eigen::VectorXd b(k);
    for (size_t r = begin; r < end; ++r) {
      a = gram;
      a.diagonal().array() += lambda;
      b.setZero();
      for (uint32_t j : lists[r]) {
        a.selfadjointView<Eigen::Lower>().rankUpdate(
            fixed.row(j).transpose(), alpha);
        b += (1.0 + alpha) * fixed.row(j).transpose();
      }
      a.triangularView<Eigen::StrictlyUpper>() =
          a.triangularView<Eigen::StrictlyLower>().transpose();
      Eigen::VectorXd x;
      if (lambda == 0.0) {
        // Without the ridge term the normal equations can be singular.
        Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
        if (!lu.isInvertible()) {
          throw NumericError(
              "als: singular normal equations with lambda == 0 (row " +
              std::to_string(r) + ")");
        }
        x = lu.solve(b);
      } else {
        x = a.ldlt().solve(b);
      }
      solved.row(r) = x.transpose();
    }
  };

  const size_t rows = lists.size();
  if (threads <= 1 || rows < 64) {
    solve_rows(0, rows);
    return;
  }
  const size_t n_threads = std::min<size_t>(threads, rows);
  const size_t chunk = (rows + n_threads - 1) / n_threads;
  std::vector<std::thread> workers;
  std::exception_ptr error;
  std::mutex error_mu;
  for (size_t w = 0; w < n_threads; ++w) {
    const size_t lo = w * chunk;
    const size_t hi = std::min(rows, lo + chunk);
    if (lo >= hi) break;
    workers.emplace_back([&, lo, hi] {
      try {
        solve_rows(lo, hi);
      } catch (...) {
        std::lock_guard<std::mutex> g(error_mu);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& t : workers) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace

double als_objective(const InteractionMatrix& m, const ImplicitModel& model) {
  const Eigen::Index k = model.k;
  ConstMapMat users(model.user_vecs.data(), m.users.size(), k);
  ConstMapMat items(model.item_vecs.data(), m.tracks.size(), k);

  // sum over all cells of (r - u.p)^2 with unit confidence, computed via
  // the item Gram, plus the alpha-weighted observed part.
  const Eigen::MatrixXd gram = items.transpose() * items;
  double all_sq = ((users * gram).cwiseProduct(users)).sum();

  const double alpha = model.alpha_conf;
  double observed_part = 0.0;
  for (uint32_t u = 0; u < m.user_items.size(); ++u) {
    for (uint32_t j : m.user_items[u]) {
      const double pred = users.row(u).dot(items.row(j));
      const double err = 1.0 - pred;
      observed_part += (1.0 + alpha) * err * err - pred * pred;
    }
  }
  return all_sq + observed_part + model.lambda_user * users.squaredNorm() +
         model.lambda_item * items.squaredNorm();
}

double als_sweep(const InteractionMatrix& m, ImplicitModel& model,
                 int threads) {
  if (model.user_vecs.size() !=
          static_cast<size_t>(m.users.size()) * model.k ||
      model.item_vecs.size() !=
          static_cast<size_t>(m.tracks.size()) * model.k) {
    throw DataError("als_sweep: model dimensions do not match interactions");
  }
  MapMat users(model.user_vecs.data(), m.users.size(), model.k);
  MapMat items(model.item_vecs.data(), m.tracks.size(), model.k);

  solve_side(users, ConstMapMat(model.item_vecs.data(), m.tracks.size(), model.k),
             m.user_items, model.alpha_conf, model.lambda_user, threads);
  solve_side(items, ConstMapMat(model.user_vecs.data(), m.users.size(), model.k),
             m.item_users, model.alpha_conf, model.lambda_item, threads);

  if (!model.all_finite()) {
    throw NumericError("als: non-finite parameters after sweep");
  }
  return als_objective(m, model);
}

ImplicitModel train_als(const InteractionMatrix& m, const AlsConfig& cfg,
                        std::vector<double>* objective_curve) {
  ImplicitModel model = init_implicit_model(m, cfg);
  for (uint32_t s = 0; s < cfg.sweeps; ++s) {
    double obj = als_sweep(m, model, cfg.threads);
    if (objective_curve) objective_curve->push_back(obj);
  }
  return model;
}

EmbeddingSet item_embeddings(const InteractionMatrix& m,
                             const ImplicitModel& model) {
  EmbeddingSet out;
  out.dim = model.k;
  out.vocab = m.tracks;
  out.data = model.item_vecs;
  return out;
}

}  // namespace trackfm
