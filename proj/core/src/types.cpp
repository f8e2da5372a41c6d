#include "transduct/types.hpp"

#include <cmath>
#include <string>

#include "transduct/error.hpp"

namespace transduct {
namespace {

constexpr double kUnitNormTolerance = 1e-5;

void check_rows(const Matrix& m, bool normalized, const char* what) {
  if (m.rows() == 0 || m.cols() == 0) {
    throw Error(ErrorCode::kDimensionError,
                std::string(what) + " must have at least one row and one column");
  }
  if (!m.allFinite()) {
    throw Error(ErrorCode::kCorruptPayload, std::string(what) + " contains NaN or Inf");
  }
  if (normalized) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      const double norm = m.row(i).norm();
      if (std::abs(norm - 1.0) > kUnitNormTolerance) {
        throw Error(ErrorCode::kInvalidArgument,
                    std::string(what) + " row " + std::to_string(i) +
                        " is flagged normalized but has norm " + std::to_string(norm));
      }
    }
  }
}

}  // namespace

EmbeddingMatrix::EmbeddingMatrix(Matrix data, bool normalized)
    : data_(std::move(data)), normalized_(normalized) {
  check_rows(data_, normalized_, "embedding matrix");
}

ClassEmbeddings::ClassEmbeddings(Matrix data, bool normalized)
    : data_(std::move(data)), normalized_(normalized) {
  check_rows(data_, normalized_, "class embeddings");
  if (data_.rows() < 2) {
    throw Error(ErrorCode::kDimensionError, "class embeddings need at least 2 classes");
  }
}

LabelVector::LabelVector(std::vector<std::int64_t> labels) : labels_(std::move(labels)) {
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i] < 0) {
      throw Error(ErrorCode::kInvalidArgument,
                  "label " + std::to_string(i) + " is negative");
    }
  }
}

void LabelVector::check_class_count(std::size_t k) const {
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (static_cast<std::uint64_t>(labels_[i]) >= k) {
      throw Error(ErrorCode::kInvalidArgument,
                  "label " + std::to_string(labels_[i]) + " at " + std::to_string(i) +
                      " is out of range for " + std::to_string(k) + " classes");
    }
  }
}

SimplexMatrix::SimplexMatrix(Matrix data) : data_(std::move(data)) {
  if (data_.rows() == 0 || data_.cols() == 0) {
    throw Error(ErrorCode::kDimensionError, "simplex matrix must be non-empty");
  }
  for (Eigen::Index i = 0; i < data_.rows(); ++i) {
    double sum = 0.0;
    for (Eigen::Index k = 0; k < data_.cols(); ++k) {
      const double v = data_(i, k);
      if (!std::isfinite(v) || v < 0.0 || v > 1.0 + kRowSumTolerance) {
        throw Error(ErrorCode::kInvalidArgument,
                    "simplex entry (" + std::to_string(i) + "," + std::to_string(k) +
                        ") = " + std::to_string(v) + " is outside [0, 1]");
      }
      sum += v;
    }
    if (std::abs(sum - 1.0) > kRowSumTolerance) {
      throw Error(ErrorCode::kInvalidArgument,
                  "simplex row " + std::to_string(i) + " sums to " + std::to_string(sum));
    }
  }
}

Temperature::Temperature(double tau) : tau_(tau) {
  if (!std::isfinite(tau) || tau <= 0.0) {
    throw Error(ErrorCode::kConfigError, "temperature must be positive and finite");
  }
}

}  // namespace transduct
