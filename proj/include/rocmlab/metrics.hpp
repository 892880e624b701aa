#pragma once

#include <cstdint>

#include "rocmlab/samples.hpp"

namespace rocmlab {

/// Sliced 2-Wasserstein distance: root mean over random unit directions of
/// the squared 1-D W2 between projected empirical distributions. Unequal
/// sample counts are matched by quantile.
double sliced_w2(const Samples& a, const Samples& b, int projections = 128, std::uint64_t seed = 0x5eed);

}  // namespace rocmlab
