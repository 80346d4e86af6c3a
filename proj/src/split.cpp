#include "qgnn/split.hpp"

#include <cmath>
#include <numeric>

#include "qgnn/errors.hpp"
#include "qgnn/rng.hpp"

namespace qgnn {

Splits split_dataset(const Dataset& dataset, const SplitSpec& spec) {
  if (dataset.empty()) throw ParameterError("cannot split an empty dataset");
  for (double f : spec.fractions) {
    if (!(f >= 0.0)) throw ParameterError("split fractions must be non-negative");
  }
  const double total = std::accumulate(spec.fractions.begin(), spec.fractions.end(), 0.0);
  if (std::abs(total - 1.0) > 1e-9) throw ParameterError("split fractions must sum to 1");

  const std::size_t n = dataset.size();
  const auto n_valid = static_cast<std::size_t>(std::floor(spec.fractions[1] * static_cast<double>(n)));
  const auto n_test = static_cast<std::size_t>(std::floor(spec.fractions[2] * static_cast<double>(n)));
  const std::size_t n_train = n - n_valid - n_test;

  Rng rng(spec.seed);
  const auto perm = rng.permutation(n);
  const std::span<const std::size_t> all(perm);
  return Splits{dataset.subset(all.subspan(0, n_train)), dataset.subset(all.subspan(n_train, n_valid)),
                dataset.subset(all.subspan(n_train + n_valid, n_test))};
}

}  // namespace qgnn
