#include "transduct/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "transduct/error.hpp"
#include "transduct/parallel.hpp"

namespace transduct {
namespace {

constexpr std::size_t kBlockRows = 256;

void check_shapes(const EmbeddingMatrix& f, const SimplexMatrix& z) {
  if (z.n() != f.n()) {
    throw Error(ErrorCode::kDimensionError, "assignments have " + std::to_string(z.n()) +
                                                " rows for " + std::to_string(f.n()) + " samples");
  }
}

void check_means(const EmbeddingMatrix& f, const Matrix& mu) {
  if (static_cast<std::size_t>(mu.cols()) != f.d()) {
    throw Error(ErrorCode::kDimensionError, "means have d=" + std::to_string(mu.cols()) +
                                                ", features have d=" + std::to_string(f.d()));
  }
}

}  // namespace

Matrix log_likelihood(const EmbeddingMatrix& f, const GmmState& g, std::size_t threads) {
  check_means(f, g.mu);
  if (static_cast<std::size_t>(g.sigma.size()) != f.d()) {
    throw Error(ErrorCode::kDimensionError, "covariance length differs from d");
  }
  for (Eigen::Index m = 0; m < g.sigma.size(); ++m) {
    if (!(g.sigma(m) >= kVarianceFloor) || !std::isfinite(g.sigma(m))) {
      throw Error(ErrorCode::kDegenerateSigma,
                  "sigma[" + std::to_string(m) + "] = " + std::to_string(g.sigma(m)));
    }
  }
  const Vector inv_sigma = g.sigma.cwiseInverse();
  const double half_log_det = 0.5 * g.sigma.array().log().sum();
  const Matrix& x = f.data();
  const Eigen::Index k_count = g.mu.rows();
  const Eigen::Index d = g.mu.cols();

  Matrix out(x.rows(), k_count);
  parallel_for_blocks(f.n(), kBlockRows, threads, [&](std::size_t b, std::size_t e) {
    for (auto i = static_cast<Eigen::Index>(b); i < static_cast<Eigen::Index>(e); ++i) {
      for (Eigen::Index k = 0; k < k_count; ++k) {
        double quad = 0.0;
        for (Eigen::Index m = 0; m < d; ++m) {
          const double diff = x(i, m) - g.mu(k, m);
          quad += diff * diff * inv_sigma(m);
        }
        out(i, k) = -half_log_det - 0.5 * quad;
      }
    }
  });
  return out;
}

GmmState init_gmm(const EmbeddingMatrix& f, const SimplexMatrix& y_hat, std::size_t top_m) {
  check_shapes(f, y_hat);
  if (top_m == 0) throw Error(ErrorCode::kConfigError, "top_m must be at least 1");
  const std::size_t n = f.n();
  const std::size_t take = std::min(top_m, n);
  const Matrix& x = f.data();

  GmmState g;
  g.mu = Matrix::Zero(static_cast<Eigen::Index>(y_hat.k()), x.cols());
  std::vector<std::size_t> order(n);
  for (std::size_t k = 0; k < y_hat.k(); ++k) {
    std::iota(order.begin(), order.end(), 0);
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(),
                      [&](std::size_t a, std::size_t b) {
                        const double pa = y_hat(a, k);
                        const double pb = y_hat(b, k);
                        return pa > pb || (pa == pb && a < b);
                      });
    for (std::size_t r = 0; r < take; ++r) {
      g.mu.row(static_cast<Eigen::Index>(k)) += x.row(static_cast<Eigen::Index>(order[r]));
    }
    g.mu.row(static_cast<Eigen::Index>(k)) /= static_cast<double>(take);
  }
  g.sigma = Vector::Constant(x.cols(), 1.0 / static_cast<double>(x.cols()));
  return g;
}

MuUpdate update_mu(const EmbeddingMatrix& f, const SimplexMatrix& z, const Matrix& previous_mu) {
  check_shapes(f, z);
  check_means(f, previous_mu);
  if (static_cast<std::size_t>(previous_mu.rows()) != z.k()) {
    throw Error(ErrorCode::kDimensionError, "previous means disagree with class count");
  }
  const Vector mass = z.data().colwise().sum().transpose();
  Matrix weighted = z.data().transpose() * f.data();

  MuUpdate out;
  out.mu = Matrix(weighted.rows(), weighted.cols());
  for (Eigen::Index k = 0; k < weighted.rows(); ++k) {
    if (mass(k) < kEmptyClassMass) {
      out.mu.row(k) = previous_mu.row(k);
      out.empty_classes.push_back(static_cast<std::size_t>(k));
    } else {
      out.mu.row(k) = weighted.row(k) / mass(k);
    }
  }
  return out;
}

SigmaUpdate update_sigma(const EmbeddingMatrix& f, const SimplexMatrix& z, const Matrix& mu,
                         std::size_t threads) {
  check_shapes(f, z);
  check_means(f, mu);
  if (static_cast<std::size_t>(mu.rows()) != z.k()) {
    throw Error(ErrorCode::kDimensionError, "means disagree with class count");
  }
  const std::size_t n = f.n();
  const Matrix& x = f.data();
  const Matrix& w = z.data();
  const Eigen::Index d = x.cols();

  // Per-block partial sums combined in block order keep the reduction
  // independent of the thread count.
  const std::size_t blocks = (n + kBlockRows - 1) / kBlockRows;
  Matrix partial = Matrix::Zero(static_cast<Eigen::Index>(blocks), d);
  parallel_for_blocks(n, kBlockRows, threads, [&](std::size_t b, std::size_t e) {
    auto acc = partial.row(static_cast<Eigen::Index>(b / kBlockRows));
    for (auto i = static_cast<Eigen::Index>(b); i < static_cast<Eigen::Index>(e); ++i) {
      for (Eigen::Index k = 0; k < mu.rows(); ++k) {
        const double weight = w(i, k);
        if (weight == 0.0) continue;
        for (Eigen::Index m = 0; m < d; ++m) {
          const double diff = x(i, m) - mu(k, m);
          acc(m) += weight * diff * diff;
        }
      }
    }
  });

  SigmaUpdate out;
  out.sigma = Vector::Zero(d);
  for (Eigen::Index b = 0; b < partial.rows(); ++b) out.sigma += partial.row(b).transpose();
  out.sigma /= static_cast<double>(n);
  for (Eigen::Index m = 0; m < d; ++m) {
    if (!(out.sigma(m) >= kVarianceFloor)) {
      out.sigma(m) = kVarianceFloor;
      out.floor_hit = true;
    }
  }
  return out;
}

}  // namespace transduct
