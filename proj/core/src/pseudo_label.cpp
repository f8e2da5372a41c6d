#include "transduct/pseudo_label.hpp"

#include <cmath>
#include <string>

#include "transduct/error.hpp"
#include "transduct/tensor_io.hpp"

namespace transduct {

ClassEmbeddings ensemble_class_embedding(const std::vector<Matrix>& prompt_embeddings) {
  if (prompt_embeddings.empty()) {
    throw Error(ErrorCode::kDimensionError, "no prompt embeddings given");
  }
  const Eigen::Index d = prompt_embeddings.front().cols();
  Matrix means(static_cast<Eigen::Index>(prompt_embeddings.size()), d);
  for (std::size_t c = 0; c < prompt_embeddings.size(); ++c) {
    const Matrix& prompts = prompt_embeddings[c];
    if (prompts.rows() == 0) {
      throw Error(ErrorCode::kDimensionError, "class " + std::to_string(c) + " has no prompts");
    }
    if (prompts.cols() != d || d == 0) {
      throw Error(ErrorCode::kDimensionError,
                  "class " + std::to_string(c) + " prompts have d=" +
                      std::to_string(prompts.cols()) + ", expected " + std::to_string(d));
    }
    means.row(static_cast<Eigen::Index>(c)) = prompts.colwise().mean();
  }
  return ClassEmbeddings(normalize_rows(std::move(means)), true);
}

Matrix stable_softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double peak = logits.row(i).maxCoeff();
    double sum = 0.0;
    for (Eigen::Index k = 0; k < logits.cols(); ++k) {
      const double e = std::exp(logits(i, k) - peak);
      out(i, k) = e;
      sum += e;
    }
    out.row(i) /= sum;
  }
  return out;
}

SimplexMatrix compute_pseudo_labels(const EmbeddingMatrix& f, const ClassEmbeddings& t,
                                    Temperature tau) {
  if (f.d() != t.d()) {
    throw Error(ErrorCode::kDimensionError, "image d=" + std::to_string(f.d()) +
                                                " but text d=" + std::to_string(t.d()));
  }
  const Matrix logits = tau.value() * (f.data() * t.data().transpose());
  return SimplexMatrix(stable_softmax_rows(logits));
}

}  // namespace transduct
