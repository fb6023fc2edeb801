#pragma once

#include <vector>

namespace stablab::ergo {

// Exact minimum-cost assignment on a dense square cost matrix (row-major),
// shortest augmenting path with dual potentials (Jonker-Volgenant family;
// same algorithm as Crouse, IEEE TAES 2016). O(n^3) worst case.
// Returns the optimal total cost; col_of_row, when non-null, receives the
// matched column of each row.
double solve_assignment(const double* cost, int n, std::vector<int>* col_of_row = nullptr);

}  // namespace stablab::ergo
