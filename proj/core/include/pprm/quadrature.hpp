#pragma once

#include <cstddef>
#include <vector>

namespace pprm {

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Gauss-Legendre rule with `n` nodes on [lo, hi]. Nodes ascend.
/// Reference rules on [-1, 1] are cached per node count; the cache is
/// thread-safe.
QuadratureRule gauss_legendre(std::size_t n, double lo, double hi);

}  // namespace pprm
