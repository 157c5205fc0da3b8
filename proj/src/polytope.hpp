#pragma once

#include <vector>

namespace cgame {

/// a . x <= b, or a . x == b when `equality` is set.
struct LinearConstraint {
  std::vector<double> a;
  double b = 0.0;
  bool equality = false;
};

/// Vertices of the bounded polyhedron {x in R^dim : constraints}, deduplicated
/// within eps and in a deterministic order. Empty when infeasible. The caller
/// must include enough constraints to make the region bounded.
std::vector<std::vector<double>> polytope_vertices(std::size_t dim, const std::vector<LinearConstraint>& constraints,
                                                   double eps = 1e-9);

/// Whether x satisfies every constraint within eps.
bool satisfies(const std::vector<LinearConstraint>& constraints, const std::vector<double>& x, double eps = 1e-9);

}  // namespace cgame
