#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string_view>
#include <vector>

#include "transduct/affinity.hpp"
#include "transduct/gmm.hpp"
#include "transduct/types.hpp"

namespace transduct {

enum class AffinityChoice {
  kAuto,  // knn at every N; see README for why dense is opt-in
  kDenseGram,
  kDenseClamped,
  kKnn,
};

/// Weight of log p inside the z-update. kOne is the default update;
/// kInverseN matches the 1/N factor that the objective puts on the GMM term.
enum class GmmWeight {
  kOne,
  kInverseN,
};

std::string_view to_string(AffinityChoice choice) noexcept;
std::string_view to_string(GmmWeight weight) noexcept;

struct SolverConfig {
  Temperature tau{};
  AffinityChoice affinity = AffinityChoice::kAuto;
  std::size_t k_neighbors = 3;
  std::size_t max_outer_iters = 10;
  std::size_t inner_z_iters = 3;
  double z_tolerance = 1e-6;
  std::size_t top_m_init = kDefaultTopM;
  bool track_objective = true;
  bool trace_inner_steps = false;
  std::uint64_t seed = 0;  // reserved; nothing is randomized yet
  GmmWeight gmm_weight = GmmWeight::kOne;
  /// Multiplier on sum_j w_ij z_j in the z-update. 1 is the default
  /// update; 2 makes each z-step a majorize-minimize step of the objective.
  double laplacian_coefficient = 1.0;
  std::size_t threads = 1;

  /// Throws ConfigError for zero counts or non-positive tolerances.
  void validate() const;

  /// gmm_weight = 1/N and laplacian_coefficient = 2.
  static SolverConfig objective_consistent();
};

struct ObjectiveTerms {
  double gmm = 0.0;        // -(1/N) sum_i z_i^T log p_i
  double laplacian = 0.0;  // -sum_ij w_ij z_i^T z_j
  double kl = 0.0;         // sum_i KL(z_i || y_hat_i)
  double total = 0.0;
};

/// Objective with log p supplied by the caller.
ObjectiveTerms objective_value(const Matrix& log_p, const SimplexMatrix& z,
                               const AffinityGraph& w, const SimplexMatrix& y_hat,
                               std::size_t threads = 1);
ObjectiveTerms objective_value(const EmbeddingMatrix& f, const SimplexMatrix& z,
                               const GmmState& g, const AffinityGraph& w,
                               const SimplexMatrix& y_hat, std::size_t threads = 1);

struct ZStepWeights {
  double gmm = 1.0;
  double laplacian = 1.0;
};

/// One Jacobi sweep of
///   z_i <- normalize(y_hat_i * exp(a log p_i + c sum_j w_ij z_prev_j)).
/// Entries with y_hat = 0 stay exactly 0. Throws NonFiniteRow on overflow.
SimplexMatrix z_step(const SimplexMatrix& z_prev, const Matrix& log_p, const AffinityGraph& w,
                     const SimplexMatrix& y_hat, ZStepWeights weights = {},
                     std::size_t threads = 1);

struct IterationRecord {
  std::size_t iteration = 0;
  std::optional<ObjectiveTerms> objective;
  /// a*N*gmm + (c/2)*laplacian + kl: the function this configuration's
  /// updates actually descend. Equals objective->total when consistent.
  std::optional<double> surrogate;
  double max_abs_change = 0.0;
  double wall_ms = 0.0;
};

struct InnerStepRecord {
  std::size_t outer = 0;
  std::size_t inner = 0;
  double max_abs_change = 0.0;
};

struct EmptyClassEvent {
  std::size_t iteration = 0;
  std::size_t class_index = 0;
};

struct SolverTrace {
  std::vector<IterationRecord> iterations;
  std::vector<InnerStepRecord> inner_steps;
  std::vector<EmptyClassEvent> empty_class_events;
  bool variance_floor_hit = false;
  bool converged = false;
  AffinityMode affinity_mode = AffinityMode::kKnn;
  std::size_t k_neighbors_used = 0;
};

struct SolveTiming {
  double pseudo_label_ms = 0.0;
  double affinity_ms = 0.0;
  double solve_ms = 0.0;
};

struct SolveResult {
  SimplexMatrix z;
  SimplexMatrix y_hat;
  GmmState gmm;
  SolverTrace trace;
  SolveTiming timing;
};

/// Called after every inner z-step with the fresh iterate.
using InnerStepObserver =
    std::function<void(std::size_t outer, std::size_t inner, const SimplexMatrix& z)>;

/// Affinity mode and neighbour count `solve` will use for N samples.
std::pair<AffinityMode, std::size_t> resolve_affinity(const SolverConfig& cfg, std::size_t n);

/// Full pipeline: pseudo-labels, affinity, initialization, then alternating
/// z-steps and closed-form mu/sigma updates until max_outer_iters or the
/// max-abs z change over an outer iteration drops below z_tolerance.
SolveResult solve(const EmbeddingMatrix& f, const ClassEmbeddings& t, const SolverConfig& cfg,
                  const InnerStepObserver& observer = {});

/// Same loop with caller-supplied prior and graph.
SolveResult solve_with(const EmbeddingMatrix& f, const SimplexMatrix& y_hat,
                       const AffinityGraph& w, const SolverConfig& cfg,
                       const InnerStepObserver& observer = {});

struct Prediction {
  LabelVector labels;
  std::vector<double> confidence;
};

/// Row argmax, lowest index on ties.
Prediction predict(const SimplexMatrix& z);

}  // namespace transduct
