#pragma once

#include <limits>
#include <vector>

#include "tazza/errors.hpp"
#include "tazza/mat.hpp"

namespace tazza {

// Exact min-cost perfect matching on a square cost matrix via the O(n^3)
// potentials method (Jonker-Volgenant style shortest augmenting paths).
// Returns the column assigned to each row.
inline std::vector<std::size_t> solve_assignment(const Mat& cost) {
    if (cost.rows != cost.cols || cost.rows == 0)
        throw ShapeError("solve_assignment: cost matrix must be square and non-empty");
    const std::size_t n = cost.rows;
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<std::size_t> match(n + 1, 0), way(n + 1, 0);
    for (std::size_t i = 1; i <= n; ++i) {
        match[0] = i;
        std::size_t j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const std::size_t i0 = match[j0];
            std::size_t j1 = 0;
            double delta = inf;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[match[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (match[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            match[j0] = match[j1];
            j0 = j1;
        } while (j0);
    }
    std::vector<std::size_t> row_to_col(n);
    for (std::size_t j = 1; j <= n; ++j)
        if (match[j]) row_to_col[match[j] - 1] = j - 1;
    return row_to_col;
}

}  // namespace tazza
