#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Core>

namespace transduct {

/// Solver arithmetic is double precision; files store 4-byte floats.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Query-set image features, one row per sample.
class EmbeddingMatrix {
 public:
  /// Throws DimensionError on an empty matrix, CorruptPayload on non-finite
  /// values, and InvalidArgument if `normalized` is claimed but some row is
  /// not unit length within 1e-5.
  EmbeddingMatrix(Matrix data, bool normalized);

  const Matrix& data() const noexcept { return data_; }
  std::size_t n() const noexcept { return static_cast<std::size_t>(data_.rows()); }
  std::size_t d() const noexcept { return static_cast<std::size_t>(data_.cols()); }
  bool normalized() const noexcept { return normalized_; }

 private:
  Matrix data_;
  bool normalized_;
};

/// Per-class text features (after prompt ensembling), one row per class.
class ClassEmbeddings {
 public:
  /// Same checks as EmbeddingMatrix plus K >= 2.
  ClassEmbeddings(Matrix data, bool normalized);

  const Matrix& data() const noexcept { return data_; }
  std::size_t k() const noexcept { return static_cast<std::size_t>(data_.rows()); }
  std::size_t d() const noexcept { return static_cast<std::size_t>(data_.cols()); }
  bool normalized() const noexcept { return normalized_; }

 private:
  Matrix data_;
  bool normalized_;
};

/// Ground-truth or predicted class indices.
class LabelVector {
 public:
  LabelVector() = default;
  explicit LabelVector(std::vector<std::int64_t> labels);

  const std::vector<std::int64_t>& labels() const noexcept { return labels_; }
  std::size_t size() const noexcept { return labels_.size(); }
  std::int64_t operator[](std::size_t i) const { return labels_[i]; }

  /// Throws InvalidArgument if any label is >= k.
  void check_class_count(std::size_t k) const;

  friend bool operator==(const LabelVector&, const LabelVector&) = default;

 private:
  std::vector<std::int64_t> labels_;
};

/// Row-stochastic N x K matrix; holds pseudo-labels and assignments alike.
class SimplexMatrix {
 public:
  static constexpr double kRowSumTolerance = 1e-6;

  /// Throws InvalidArgument unless every entry is finite, lies in [0, 1] and
  /// every row sums to 1 within kRowSumTolerance.
  explicit SimplexMatrix(Matrix data);

  const Matrix& data() const noexcept { return data_; }
  std::size_t n() const noexcept { return static_cast<std::size_t>(data_.rows()); }
  std::size_t k() const noexcept { return static_cast<std::size_t>(data_.cols()); }
  double operator()(std::size_t i, std::size_t k) const {
    return data_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
  }

 private:
  Matrix data_;
};

/// Logit scale applied to image-text cosine similarities.
class Temperature {
 public:
  static constexpr double kDefault = 100.0;

  explicit Temperature(double tau = kDefault);
  double value() const noexcept { return tau_; }

 private:
  double tau_;
};

}  // namespace transduct
