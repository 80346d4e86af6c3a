#pragma once

#include <array>
#include <cstdint>

#include "qgnn/graph.hpp"

namespace qgnn {

struct SplitSpec {
  std::array<double, 3> fractions{0.8, 0.1, 0.1};  // train, valid, test
  std::uint64_t seed = 0;
};

struct Splits {
  Dataset train;
  Dataset valid;
  Dataset test;
};

/// Seeded random split. Valid and test receive floor(fraction * n) graphs,
/// train absorbs the remainder. The permutation is Rng(seed).permutation(n)
/// and is consumed in order: train, valid, test.
Splits split_dataset(const Dataset& dataset, const SplitSpec& spec);

}  // namespace qgnn
