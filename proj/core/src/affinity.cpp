#include "transduct/affinity.hpp"

#include <algorithm>
#include <limits>
#include <string>

#include <Eigen/Eigenvalues>

#include "transduct/error.hpp"
#include "transduct/parallel.hpp"

namespace transduct {
namespace {

// Fixed so that block results never depend on the thread count.
constexpr std::size_t kBlockRows = 256;

struct Edge {
  std::size_t column;
  double weight;
};

}  // namespace

std::string_view to_string(AffinityMode mode) noexcept {
  switch (mode) {
    case AffinityMode::kDenseGram: return "gram";
    case AffinityMode::kDenseClamped: return "clamped";
    case AffinityMode::kKnn: return "knn";
  }
  return "?";
}

AffinityGraph::AffinityGraph(Matrix dense, AffinityMode mode)
    : n_(static_cast<std::size_t>(dense.rows())), mode_(mode), storage_(std::move(dense)) {
  const Matrix& w = std::get<Matrix>(storage_);
  if (w.rows() != w.cols()) throw Error(ErrorCode::kDimensionError, "affinity matrix must be square");
  if (mode == AffinityMode::kKnn) {
    throw Error(ErrorCode::kInvalidArgument, "knn graphs use sparse storage");
  }
  scan_weights();
}

AffinityGraph::AffinityGraph(std::size_t n, SparseRows sparse)
    : n_(n), mode_(AffinityMode::kKnn), storage_(std::move(sparse)) {
  const SparseRows& s = std::get<SparseRows>(storage_);
  if (s.row_offsets.size() != n + 1 || s.columns.size() != s.weights.size() ||
      s.row_offsets.back() != s.columns.size()) {
    throw Error(ErrorCode::kDimensionError, "inconsistent sparse affinity layout");
  }
  for (std::size_t c : s.columns) {
    if (c >= n) throw Error(ErrorCode::kDimensionError, "sparse affinity column out of range");
  }
  scan_weights();
}

void AffinityGraph::scan_weights() {
  min_weight_ = std::numeric_limits<double>::infinity();
  symmetric_ = true;
  if (const auto* w = std::get_if<Matrix>(&storage_)) {
    if (!w->allFinite()) throw Error(ErrorCode::kInvalidArgument, "affinity weights must be finite");
    if (w->size() != 0) min_weight_ = w->minCoeff();
    for (Eigen::Index i = 0; i < w->rows() && symmetric_; ++i) {
      for (Eigen::Index j = i + 1; j < w->cols(); ++j) {
        if ((*w)(i, j) != (*w)(j, i)) {
          symmetric_ = false;
          break;
        }
      }
    }
  } else {
    for (double v : sparse().weights) {
      if (!std::isfinite(v)) throw Error(ErrorCode::kInvalidArgument, "affinity weights must be finite");
      min_weight_ = std::min(min_weight_, v);
    }
    for (std::size_t i = 0; i < n_ && symmetric_; ++i) {
      for (std::size_t e = sparse().row_offsets[i]; e < sparse().row_offsets[i + 1]; ++e) {
        if (weight(sparse().columns[e], i) != sparse().weights[e]) {
          symmetric_ = false;
          break;
        }
      }
    }
  }
  if (!std::isfinite(min_weight_)) min_weight_ = 0.0;
  has_negative_ = min_weight_ < 0.0;
  if (has_negative_ && mode_ != AffinityMode::kDenseGram) {
    throw Error(ErrorCode::kInvalidArgument,
                std::string(to_string(mode_)) + " affinities must be non-negative");
  }
}

std::size_t AffinityGraph::stored_entries(std::size_t row) const {
  if (is_dense()) return n_;
  return sparse().row_offsets[row + 1] - sparse().row_offsets[row];
}

double AffinityGraph::weight(std::size_t i, std::size_t j) const {
  if (is_dense()) return dense()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  const SparseRows& s = sparse();
  const auto first = s.columns.begin() + static_cast<std::ptrdiff_t>(s.row_offsets[i]);
  const auto last = s.columns.begin() + static_cast<std::ptrdiff_t>(s.row_offsets[i + 1]);
  const auto it = std::lower_bound(first, last, j);
  if (it == last || *it != j) return 0.0;
  return s.weights[static_cast<std::size_t>(it - s.columns.begin())];
}

Matrix AffinityGraph::multiply(const Matrix& z, std::size_t threads) const {
  if (static_cast<std::size_t>(z.rows()) != n_) {
    throw Error(ErrorCode::kDimensionError, "W * z needs z with " + std::to_string(n_) + " rows");
  }
  Matrix out = Matrix::Zero(z.rows(), z.cols());
  if (is_dense()) {
    const Matrix& w = dense();
    parallel_for_blocks(n_, kBlockRows, threads, [&](std::size_t b, std::size_t e) {
      const auto len = static_cast<Eigen::Index>(e - b);
      out.middleRows(static_cast<Eigen::Index>(b), len).noalias() =
          w.middleRows(static_cast<Eigen::Index>(b), len) * z;
    });
  } else {
    const SparseRows& s = sparse();
    parallel_for_blocks(n_, kBlockRows, threads, [&](std::size_t b, std::size_t e) {
      for (std::size_t i = b; i < e; ++i) {
        for (std::size_t p = s.row_offsets[i]; p < s.row_offsets[i + 1]; ++p) {
          out.row(static_cast<Eigen::Index>(i)) +=
              s.weights[p] * z.row(static_cast<Eigen::Index>(s.columns[p]));
        }
      }
    });
  }
  return out;
}

Matrix AffinityGraph::to_dense() const {
  if (is_dense()) return dense();
  Matrix w = Matrix::Zero(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(n_));
  const SparseRows& s = sparse();
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t p = s.row_offsets[i]; p < s.row_offsets[i + 1]; ++p) {
      w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(s.columns[p])) = s.weights[p];
    }
  }
  return w;
}

AffinityGraph empty_knn_graph(std::size_t n) {
  SparseRows s;
  s.row_offsets.assign(n + 1, 0);
  return AffinityGraph(n, std::move(s));
}

AffinityGraph build_affinity(const EmbeddingMatrix& f, AffinityMode mode,
                             std::optional<std::size_t> k_neighbors, std::size_t threads) {
  const std::size_t n = f.n();
  const Matrix& x = f.data();

  if (mode != AffinityMode::kKnn) {
    Matrix w(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    parallel_for_blocks(n, kBlockRows, threads, [&](std::size_t b, std::size_t e) {
      const auto len = static_cast<Eigen::Index>(e - b);
      w.middleRows(static_cast<Eigen::Index>(b), len).noalias() =
          x.middleRows(static_cast<Eigen::Index>(b), len) * x.transpose();
    });
    // One value per unordered pair: the upper triangle is authoritative.
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      for (Eigen::Index j = i + 1; j < w.cols(); ++j) w(j, i) = w(i, j);
    }
    if (mode == AffinityMode::kDenseClamped) w = w.cwiseMax(0.0);
    return AffinityGraph(std::move(w), mode);
  }

  if (!k_neighbors || *k_neighbors < 1 || *k_neighbors >= n) {
    throw Error(ErrorCode::kInvalidK,
                "k_neighbors must lie in [1, " + std::to_string(n == 0 ? 0 : n - 1) + "], got " +
                    (k_neighbors ? std::to_string(*k_neighbors) : std::string("none")));
  }
  const std::size_t k = *k_neighbors;

  std::vector<std::vector<Edge>> forward(n);
  parallel_for_blocks(n, kBlockRows, threads, [&](std::size_t b, std::size_t e) {
    const auto len = static_cast<Eigen::Index>(e - b);
    const Matrix sims = x.middleRows(static_cast<Eigen::Index>(b), len) * x.transpose();
    std::vector<std::size_t> order;
    order.reserve(n - 1);
    for (std::size_t i = b; i < e; ++i) {
      const auto row = sims.row(static_cast<Eigen::Index>(i - b));
      order.clear();
      for (std::size_t j = 0; j < n; ++j) {
        if (j != i) order.push_back(j);
      }
      // Larger similarity first; the lower index wins on ties.
      std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                        [&](std::size_t a, std::size_t c) {
                          const double sa = row(static_cast<Eigen::Index>(a));
                          const double sc = row(static_cast<Eigen::Index>(c));
                          return sa > sc || (sa == sc && a < c);
                        });
      auto& edges = forward[i];
      edges.reserve(k);
      for (std::size_t r = 0; r < k; ++r) {
        edges.push_back({order[r], std::max(0.0, row(static_cast<Eigen::Index>(order[r])))});
      }
    }
  });

  // w <- max(w, w^T)
  std::vector<std::vector<Edge>> rows(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (const Edge& edge : forward[i]) {
      rows[i].push_back(edge);
      rows[edge.column].push_back({i, edge.weight});
    }
  }
  SparseRows s;
  s.row_offsets.reserve(n + 1);
  s.row_offsets.push_back(0);
  for (auto& row : rows) {
    std::sort(row.begin(), row.end(), [](const Edge& a, const Edge& b) {
      return a.column < b.column || (a.column == b.column && a.weight > b.weight);
    });
    for (std::size_t p = 0; p < row.size(); ++p) {
      if (p > 0 && row[p].column == row[p - 1].column) continue;  // sorted so the max comes first
      s.columns.push_back(row[p].column);
      s.weights.push_back(row[p].weight);
    }
    s.row_offsets.push_back(s.columns.size());
  }
  return AffinityGraph(n, std::move(s));
}

PsdReport psd_check(const AffinityGraph& g, double tolerance) {
  if (g.n() > kPsdCheckMaxN) {
    throw Error(ErrorCode::kTooLarge, "psd_check densifies at most " +
                                          std::to_string(kPsdCheckMaxN) + " samples, got " +
                                          std::to_string(g.n()));
  }
  if (g.n() == 0) return {true, 0.0};
  const Matrix w = g.to_dense();
  // Symmetric part; equal to w for every graph this library builds.
  const Eigen::MatrixXd sym = 0.5 * (w + w.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorCode::kInvalidArgument, "eigensolver failed to converge");
  }
  const double smallest = solver.eigenvalues().minCoeff();
  return {smallest >= -tolerance, smallest};
}

}  // namespace transduct
