#include "transduct/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "transduct/error.hpp"
#include "transduct/tensor_io.hpp"

namespace transduct {

SyntheticInstance generate_mixture(const SyntheticSpec& spec) {
  if (spec.n == 0 || spec.k < 2 || spec.d == 0) {
    throw Error(ErrorCode::kConfigError, "synthetic mixture needs n >= 1, k >= 2, d >= 1");
  }
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const auto d = static_cast<Eigen::Index>(spec.d);
  const auto k = static_cast<Eigen::Index>(spec.k);
  const double per_coord = 1.0 / std::sqrt(static_cast<double>(spec.d));

  Matrix directions(k, d);
  for (Eigen::Index i = 0; i < directions.size(); ++i) directions.data()[i] = gauss(rng);
  directions = normalize_rows(std::move(directions));

  std::vector<std::int64_t> labels(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) labels[i] = static_cast<std::int64_t>(i % spec.k);
  std::shuffle(labels.begin(), labels.end(), rng);

  Matrix images(static_cast<Eigen::Index>(spec.n), d);
  for (Eigen::Index i = 0; i < images.rows(); ++i) {
    const auto c = static_cast<Eigen::Index>(labels[static_cast<std::size_t>(i)]);
    for (Eigen::Index m = 0; m < d; ++m) {
      images(i, m) = spec.separation * directions(c, m) + spec.noise * per_coord * gauss(rng);
    }
  }

  Matrix texts(k, d);
  for (Eigen::Index c = 0; c < k; ++c) {
    for (Eigen::Index m = 0; m < d; ++m) {
      texts(c, m) = spec.separation * directions(c, m) + spec.text_noise * per_coord * gauss(rng);
    }
  }

  return SyntheticInstance{EmbeddingMatrix(normalize_rows(std::move(images)), true),
                           ClassEmbeddings(normalize_rows(std::move(texts)), true),
                           LabelVector(std::move(labels))};
}

}  // namespace transduct
