#pragma once

#include <vector>

#include "transduct/types.hpp"

namespace transduct {

/// Averages each class's prompt embeddings (one M x d matrix per class, in
/// class order) and renormalizes the mean. Throws DimensionError when the
/// matrices disagree on d or one is empty, ZeroNormRow when a mean cancels.
ClassEmbeddings ensemble_class_embedding(const std::vector<Matrix>& prompt_embeddings);

/// Row-wise softmax of the logit matrix with max subtraction.
Matrix stable_softmax_rows(const Matrix& logits);

/// Text-driven zero-shot prior: softmax_k(tau * f_i . t_k).
SimplexMatrix compute_pseudo_labels(const EmbeddingMatrix& f, const ClassEmbeddings& t,
                                    Temperature tau);

}  // namespace transduct
