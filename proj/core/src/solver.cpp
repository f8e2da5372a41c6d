#include "transduct/solver.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <string>

#include "transduct/error.hpp"
#include "transduct/parallel.hpp"
#include "transduct/pseudo_label.hpp"

namespace transduct {
namespace {

constexpr std::size_t kBlockRows = 256;

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

void check_assignment_shapes(const Matrix& log_p, const SimplexMatrix& z, const AffinityGraph& w,
                             const SimplexMatrix& y_hat) {
  if (z.n() != y_hat.n() || z.k() != y_hat.k() || static_cast<std::size_t>(log_p.rows()) != z.n() ||
      static_cast<std::size_t>(log_p.cols()) != z.k() || w.n() != z.n()) {
    throw Error(ErrorCode::kDimensionError,
                "assignment, prior, log-likelihood and graph shapes disagree");
  }
}

double max_abs_difference(const Matrix& a, const Matrix& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

ZStepWeights step_weights(const SolverConfig& cfg, std::size_t n) {
  ZStepWeights weights;
  weights.gmm = cfg.gmm_weight == GmmWeight::kOne ? 1.0 : 1.0 / static_cast<double>(n);
  weights.laplacian = cfg.laplacian_coefficient;
  return weights;
}

}  // namespace

std::string_view to_string(AffinityChoice choice) noexcept {
  switch (choice) {
    case AffinityChoice::kAuto: return "auto";
    case AffinityChoice::kDenseGram: return "gram";
    case AffinityChoice::kDenseClamped: return "clamped";
    case AffinityChoice::kKnn: return "knn";
  }
  return "?";
}

std::string_view to_string(GmmWeight weight) noexcept {
  return weight == GmmWeight::kOne ? "one" : "inverse-n";
}

void SolverConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::kConfigError, what); };
  if (max_outer_iters == 0) fail("max_outer_iters must be at least 1");
  if (inner_z_iters == 0) fail("inner_z_iters must be at least 1");
  if (!(z_tolerance > 0.0) || !std::isfinite(z_tolerance)) fail("z_tolerance must be positive");
  if (top_m_init == 0) fail("top_m_init must be at least 1");
  if (k_neighbors == 0) fail("k_neighbors must be at least 1");
  if (!(laplacian_coefficient > 0.0) || !std::isfinite(laplacian_coefficient)) {
    fail("laplacian_coefficient must be positive");
  }
}

SolverConfig SolverConfig::objective_consistent() {
  SolverConfig cfg;
  cfg.gmm_weight = GmmWeight::kInverseN;
  cfg.laplacian_coefficient = 2.0;
  return cfg;
}

ObjectiveTerms objective_value(const Matrix& log_p, const SimplexMatrix& z, const AffinityGraph& w,
                               const SimplexMatrix& y_hat, std::size_t threads) {
  check_assignment_shapes(log_p, z, w, y_hat);
  const Matrix& zm = z.data();
  const auto n = static_cast<double>(z.n());

  ObjectiveTerms terms;
  terms.gmm = -zm.cwiseProduct(log_p).sum() / n;
  terms.laplacian = -zm.cwiseProduct(w.multiply(zm, threads)).sum();
  double kl = 0.0;
  for (Eigen::Index i = 0; i < zm.rows(); ++i) {
    for (Eigen::Index k = 0; k < zm.cols(); ++k) {
      const double p = zm(i, k);
      if (p == 0.0) continue;
      const double q = y_hat.data()(i, k);
      kl += q > 0.0 ? p * std::log(p / q) : std::numeric_limits<double>::infinity();
    }
  }
  terms.kl = kl;
  terms.total = terms.gmm + terms.laplacian + terms.kl;
  if (!std::isfinite(terms.total)) {
    throw Error(ErrorCode::kNonFiniteObjective,
                "objective terms gmm=" + std::to_string(terms.gmm) + " laplacian=" +
                    std::to_string(terms.laplacian) + " kl=" + std::to_string(terms.kl));
  }
  return terms;
}

ObjectiveTerms objective_value(const EmbeddingMatrix& f, const SimplexMatrix& z, const GmmState& g,
                               const AffinityGraph& w, const SimplexMatrix& y_hat,
                               std::size_t threads) {
  return objective_value(log_likelihood(f, g, threads), z, w, y_hat, threads);
}

SimplexMatrix z_step(const SimplexMatrix& z_prev, const Matrix& log_p, const AffinityGraph& w,
                     const SimplexMatrix& y_hat, ZStepWeights weights, std::size_t threads) {
  check_assignment_shapes(log_p, z_prev, w, y_hat);
  const Matrix propagated = w.multiply(z_prev.data(), threads);
  const Matrix& prior = y_hat.data();
  const Eigen::Index k_count = prior.cols();

  Matrix next(prior.rows(), k_count);
  parallel_for_blocks(z_prev.n(), kBlockRows, threads, [&](std::size_t b, std::size_t e) {
    for (auto i = static_cast<Eigen::Index>(b); i < static_cast<Eigen::Index>(e); ++i) {
      // Exponent of y_hat * exp(.) in log space, -inf off the prior's support.
      double peak = -std::numeric_limits<double>::infinity();
      for (Eigen::Index k = 0; k < k_count; ++k) {
        const double q = prior(i, k);
        const double a = q > 0.0 ? weights.gmm * log_p(i, k) + weights.laplacian * propagated(i, k) +
                                       std::log(q)
                                 : -std::numeric_limits<double>::infinity();
        next(i, k) = a;
        peak = std::max(peak, a);
      }
      if (!std::isfinite(peak)) {
        throw Error(ErrorCode::kNonFiniteRow, "row " + std::to_string(i) + " has exponent peak " +
                                                  std::to_string(peak));
      }
      double sum = 0.0;
      for (Eigen::Index k = 0; k < k_count; ++k) {
        const double v = prior(i, k) > 0.0 ? std::exp(next(i, k) - peak) : 0.0;
        next(i, k) = v;
        sum += v;
      }
      if (!std::isfinite(sum) || !(sum > 0.0)) {
        throw Error(ErrorCode::kNonFiniteRow, "row " + std::to_string(i) + " normalizer is " +
                                                  std::to_string(sum));
      }
      next.row(i) /= sum;
    }
  });
  return SimplexMatrix(std::move(next));
}

std::pair<AffinityMode, std::size_t> resolve_affinity(const SolverConfig& cfg, std::size_t n) {
  switch (cfg.affinity) {
    case AffinityChoice::kDenseGram: return {AffinityMode::kDenseGram, 0};
    case AffinityChoice::kDenseClamped: return {AffinityMode::kDenseClamped, 0};
    case AffinityChoice::kKnn: return {AffinityMode::kKnn, cfg.k_neighbors};
    case AffinityChoice::kAuto: break;
  }
  return {AffinityMode::kKnn, std::min(cfg.k_neighbors, n == 0 ? 0 : n - 1)};
}

SolveResult solve_with(const EmbeddingMatrix& f, const SimplexMatrix& y_hat, const AffinityGraph& w,
                       const SolverConfig& cfg, const InnerStepObserver& observer) {
  cfg.validate();
  if (y_hat.n() != f.n() || w.n() != f.n()) {
    throw Error(ErrorCode::kDimensionError, "features, prior and graph disagree on N");
  }
  const auto start = Clock::now();
  const ZStepWeights weights = step_weights(cfg, f.n());
  const double n = static_cast<double>(f.n());

  SolverTrace trace;
  trace.affinity_mode = w.mode();
  SimplexMatrix z = y_hat;
  GmmState g = init_gmm(f, y_hat, cfg.top_m_init);
  Matrix log_p = log_likelihood(f, g, cfg.threads);

  for (std::size_t outer = 0; outer < cfg.max_outer_iters; ++outer) {
    const auto iter_start = Clock::now();
    const Matrix z_before = z.data();
    for (std::size_t inner = 0; inner < cfg.inner_z_iters; ++inner) {
      SimplexMatrix next = z_step(z, log_p, w, y_hat, weights, cfg.threads);
      if (cfg.trace_inner_steps) {
        trace.inner_steps.push_back({outer, inner, max_abs_difference(next.data(), z.data())});
      }
      z = std::move(next);
      if (observer) observer(outer, inner, z);
    }

    MuUpdate mu = update_mu(f, z, g.mu);
    for (std::size_t k : mu.empty_classes) trace.empty_class_events.push_back({outer, k});
    SigmaUpdate sigma = update_sigma(f, z, mu.mu, cfg.threads);
    trace.variance_floor_hit = trace.variance_floor_hit || sigma.floor_hit;
    g.mu = std::move(mu.mu);
    g.sigma = std::move(sigma.sigma);
    log_p = log_likelihood(f, g, cfg.threads);

    IterationRecord record;
    record.iteration = outer;
    record.max_abs_change = max_abs_difference(z.data(), z_before);
    if (cfg.track_objective) {
      const ObjectiveTerms terms = objective_value(log_p, z, w, y_hat, cfg.threads);
      record.objective = terms;
      record.surrogate = weights.gmm * n * terms.gmm + 0.5 * weights.laplacian * terms.laplacian + terms.kl;
    }
    record.wall_ms = elapsed_ms(iter_start);
    trace.iterations.push_back(record);

    if (record.max_abs_change < cfg.z_tolerance) {
      trace.converged = true;
      break;
    }
  }

  SolveTiming timing;
  timing.solve_ms = elapsed_ms(start);
  return SolveResult{std::move(z), y_hat, std::move(g), std::move(trace), timing};
}

SolveResult solve(const EmbeddingMatrix& f, const ClassEmbeddings& t, const SolverConfig& cfg,
                  const InnerStepObserver& observer) {
  cfg.validate();
  if (f.d() != t.d()) {
    throw Error(ErrorCode::kDimensionError, "image d=" + std::to_string(f.d()) +
                                                " but text d=" + std::to_string(t.d()));
  }
  auto stage = Clock::now();
  SimplexMatrix y_hat = compute_pseudo_labels(f, t, cfg.tau);
  const double pseudo_ms = elapsed_ms(stage);

  stage = Clock::now();
  const auto [mode, k] = resolve_affinity(cfg, f.n());
  const AffinityGraph w = mode == AffinityMode::kKnn && k == 0
                              ? empty_knn_graph(f.n())
                              : build_affinity(f, mode, k, cfg.threads);
  const double affinity_ms = elapsed_ms(stage);

  SolveResult result = solve_with(f, y_hat, w, cfg, observer);
  result.trace.k_neighbors_used = k;
  result.timing.pseudo_label_ms = pseudo_ms;
  result.timing.affinity_ms = affinity_ms;
  return result;
}

Prediction predict(const SimplexMatrix& z) {
  std::vector<std::int64_t> labels(z.n());
  std::vector<double> confidence(z.n());
  const Matrix& m = z.data();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < m.cols(); ++k) {
      if (m(i, k) > m(i, best)) best = k;
    }
    labels[static_cast<std::size_t>(i)] = best;
    confidence[static_cast<std::size_t>(i)] = m(i, best);
  }
  return {LabelVector(std::move(labels)), std::move(confidence)};
}

}  // namespace transduct
