#pragma once

#include <cstddef>
#include <optional>
#include <string_view>
#include <variant>
#include <vector>

#include "transduct/types.hpp"

namespace transduct {

enum class AffinityMode {
  kDenseGram,     // w_ij = f_i . f_j
  kDenseClamped,  // w_ij = max(0, f_i . f_j)
  kKnn,           // k largest similarities per row, clamped, symmetrized by max
};

std::string_view to_string(AffinityMode mode) noexcept;

/// Compressed sparse rows. Column indices ascend within each row.
struct SparseRows {
  std::vector<std::size_t> row_offsets;  // n + 1 entries
  std::vector<std::size_t> columns;
  std::vector<double> weights;
};

class AffinityGraph {
 public:
  AffinityGraph(Matrix dense, AffinityMode mode);
  AffinityGraph(std::size_t n, SparseRows sparse);

  std::size_t n() const noexcept { return n_; }
  AffinityMode mode() const noexcept { return mode_; }
  bool is_dense() const noexcept { return std::holds_alternative<Matrix>(storage_); }
  bool symmetric() const noexcept { return symmetric_; }
  /// True when some stored weight is negative (possible in dense-gram mode only).
  bool has_negative() const noexcept { return has_negative_; }
  double min_weight() const noexcept { return min_weight_; }

  const Matrix& dense() const { return std::get<Matrix>(storage_); }
  const SparseRows& sparse() const { return std::get<SparseRows>(storage_); }

  std::size_t stored_entries(std::size_t row) const;
  /// Weight of (i, j); 0 for pairs absent from a sparse graph.
  double weight(std::size_t i, std::size_t j) const;

  /// Returns W * z for an N x K matrix. Rows are computed independently, so
  /// the result does not depend on `threads`.
  Matrix multiply(const Matrix& z, std::size_t threads = 1) const;

  Matrix to_dense() const;

 private:
  void scan_weights();

  std::size_t n_;
  AffinityMode mode_;
  std::variant<Matrix, SparseRows> storage_;
  bool symmetric_ = false;
  bool has_negative_ = false;
  double min_weight_ = 0.0;
};

/// Builds w_ij from normalized image embeddings. knn requires
/// 1 <= k_neighbors < N (InvalidK otherwise); dense modes ignore it.
AffinityGraph build_affinity(const EmbeddingMatrix& f, AffinityMode mode,
                             std::optional<std::size_t> k_neighbors = std::nullopt,
                             std::size_t threads = 1);

/// kNN graph with no edges, used when a query set has a single sample.
AffinityGraph empty_knn_graph(std::size_t n);

struct PsdReport {
  bool is_psd = false;
  double min_eigenvalue = 0.0;
};

inline constexpr std::size_t kPsdCheckMaxN = 4096;

/// Smallest eigenvalue via a dense symmetric eigensolve (TooLarge past
/// kPsdCheckMaxN). Intended for tests and diagnostics.
PsdReport psd_check(const AffinityGraph& g, double tolerance);

}  // namespace transduct
