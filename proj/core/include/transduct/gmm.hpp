#pragma once

#include <cstddef>
#include <vector>

#include "transduct/types.hpp"

namespace transduct {

/// Lower bound applied to every entry of the shared diagonal covariance.
inline constexpr double kVarianceFloor = 1e-8;
/// Number of most confident samples per class used to seed the means.
inline constexpr std::size_t kDefaultTopM = 8;
/// Class mass below which a mean update is skipped.
inline constexpr double kEmptyClassMass = 1e-12;

/// Balanced K-component mixture with one diagonal covariance shared by all
/// classes.
struct GmmState {
  Matrix mu;     // K x d
  Vector sigma;  // d, every entry >= kVarianceFloor
};

/// log p_{i,k} without the -(d/2) log(2 pi) constant:
///   -1/2 sum_m log sigma_m - 1/2 sum_m (f_im - mu_km)^2 / sigma_m
/// Throws DegenerateSigma if any sigma_m < kVarianceFloor.
Matrix log_likelihood(const EmbeddingMatrix& f, const GmmState& g, std::size_t threads = 1);

/// mu_k = mean of the top_m rows ranked by y_hat(:, k) (ties to the lower
/// index; all rows when N < top_m); sigma = 1/d everywhere.
GmmState init_gmm(const EmbeddingMatrix& f, const SimplexMatrix& y_hat,
                  std::size_t top_m = kDefaultTopM);

struct MuUpdate {
  Matrix mu;
  /// Classes whose mass fell below kEmptyClassMass; their previous mean was kept.
  std::vector<std::size_t> empty_classes;
};

/// mu_k = sum_i z_ik f_i / sum_i z_ik.
MuUpdate update_mu(const EmbeddingMatrix& f, const SimplexMatrix& z, const Matrix& previous_mu);

struct SigmaUpdate {
  Vector sigma;
  bool floor_hit = false;
};

/// sigma_m = max(floor, sum_i sum_k z_ik (f_im - mu_km)^2 / N).
SigmaUpdate update_sigma(const EmbeddingMatrix& f, const SimplexMatrix& z, const Matrix& mu,
                         std::size_t threads = 1);

}  // namespace transduct
