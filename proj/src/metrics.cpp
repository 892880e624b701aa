#include "rocmlab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "rocmlab/random.hpp"

namespace rocmlab {

namespace {

std::vector<double> project_sorted(const Samples& s, const std::vector<double>& dir) {
  std::vector<double> out(s.n);
  for (std::size_t i = 0; i < s.n; ++i) {
    const auto r = s.row(i);
    double acc = 0.0;
    for (std::size_t j = 0; j < s.d; ++j) acc += r[j] * dir[j];
    out[i] = acc;
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

double sliced_w2(const Samples& a, const Samples& b, int projections, std::uint64_t seed) {
  if (a.d != b.d) throw std::invalid_argument("sliced_w2 dimension mismatch");
  if (a.n == 0 || b.n == 0) throw std::invalid_argument("sliced_w2 of an empty sample");
  if (projections < 1) throw std::invalid_argument("sliced_w2 needs at least one projection");
  Rng rng(seed);
  const std::size_t m = std::max(a.n, b.n);
  double total = 0.0;
  std::vector<double> dir(a.d);
  for (int p = 0; p < projections; ++p) {
    double norm = 0.0;
    for (double& v : dir) {
      v = rng.normal();
      norm += v * v;
    }
    norm = std::sqrt(norm);
    for (double& v : dir) v /= norm;
    const auto pa = project_sorted(a, dir);
    const auto pb = project_sorted(b, dir);
    double acc = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double q = (static_cast<double>(i) + 0.5) / static_cast<double>(m);
      const double va = pa[std::min(a.n - 1, static_cast<std::size_t>(q * static_cast<double>(a.n)))];
      const double vb = pb[std::min(b.n - 1, static_cast<std::size_t>(q * static_cast<double>(b.n)))];
      acc += (va - vb) * (va - vb);
    }
    total += acc / static_cast<double>(m);
  }
  return std::sqrt(total / projections);
}

}  // namespace rocmlab
