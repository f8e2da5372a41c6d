#pragma once

#include <cstddef>
#include <cstdint>

#include "transduct/types.hpp"

namespace transduct {

/// Seeded Gaussian-mixture query set with text embeddings near the class
/// means. Sample noise spreads the clusters; text noise moves each class
/// prototype off its cluster centre, which is what makes the text-only
/// (inductive) classifier err.
struct SyntheticSpec {
  std::size_t n = 2000;
  std::size_t k = 5;
  std::size_t d = 64;
  std::uint64_t seed = 0;
  double separation = 1.0;  // norm of each class mean before noise
  double noise = 2.5;       // expected norm of the per-sample perturbation
  double text_noise = 2.0;  // expected norm of the per-class text perturbation
};

struct SyntheticInstance {
  EmbeddingMatrix images;
  ClassEmbeddings texts;
  LabelVector labels;
};

/// Class means are uniform on the unit sphere scaled by `separation`;
/// labels are balanced (i mod k) then shuffled. Rows are L2-normalized.
SyntheticInstance generate_mixture(const SyntheticSpec& spec);

}  // namespace transduct
