#pragma once

// Exact solver for the balanced transportation problem
//
//   minimise   sum_ij plan(i,j) * cost(i,j)
//   subject to sum_j plan(i,j) = supply[i],  sum_i plan(i,j) = demand[j],  plan >= 0
//
// by the transportation simplex (MODI / u-v potentials) method. The basis is a
// spanning tree over the m row nodes and n column nodes with m+n-1 basic
// cells, degenerate zero-flow cells included, so potentials and pivot cycles
// are read directly off the tree. Dantzig pricing is used until a run of
// degenerate pivots suggests cycling, after which Bland's rule guarantees
// termination.

#include <cstddef>
#include <span>
#include <vector>

namespace clickbait::transport {

/// Dense row-major cost matrix.
struct CostMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;

    CostMatrix() = default;
    CostMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), values(r * c, 0.0) {}

    double& operator()(std::size_t i, std::size_t j) { return values[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return values[i * cols + j]; }
};

struct Flow {
    std::size_t row;
    std::size_t col;
    double amount;
};

struct Solution {
    double cost = 0.0;
    /// Basic cells of the optimal basis (m+n-1 entries, some may carry 0).
    std::vector<Flow> plan;
    std::size_t iterations = 0;
};

/// Supplies and demands must be non-negative with equal totals (relative
/// mismatch up to 1e-9 is absorbed). Throws ValidationError otherwise.
Solution solve(std::span<const double> supply, std::span<const double> demand, const CostMatrix& cost);

/// Cost of the initial basic feasible solution (matrix-minimum rule); a
/// cheap upper bound on the optimum.
double greedy_upper_bound(std::span<const double> supply, std::span<const double> demand,
                          const CostMatrix& cost);

} // namespace clickbait::transport
