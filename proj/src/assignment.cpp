#include "stablab/assignment.hpp"

#include <limits>
#include <stdexcept>

namespace stablab::ergo {

double solve_assignment(const double* cost, int n, std::vector<int>* col_of_row) {
  if (n <= 0) throw std::invalid_argument("solve_assignment: n must be positive");
  const double inf = std::numeric_limits<double>::infinity();

  std::vector<double> u(n, 0.0), v(n, 0.0), shortest(n);
  std::vector<int> path(n, -1), row4col(n, -1), col4row(n, -1), remaining(n);

  for (int cur = 0; cur < n; ++cur) {
    std::fill(shortest.begin(), shortest.end(), inf);
    std::vector<char> scanned_rows(n, 0), scanned_cols(n, 0);
    for (int j = 0; j < n; ++j) remaining[j] = j;
    int num_remaining = n;

    double min_val = 0.0;
    int sink = -1;
    int i = cur;
    while (sink == -1) {
      scanned_rows[i] = 1;
      const double* row = cost + static_cast<std::size_t>(i) * n;
      int best_it = -1;
      double lowest = inf;
      for (int it = 0; it < num_remaining; ++it) {
        const int j = remaining[it];
        const double r = min_val + row[j] - u[i] - v[j];
        if (r < shortest[j]) {
          path[j] = i;
          shortest[j] = r;
        }
        if (shortest[j] < lowest ||
            (shortest[j] == lowest && best_it >= 0 && row4col[j] == -1 &&
             row4col[remaining[best_it]] != -1)) {
          lowest = shortest[j];
          best_it = it;
        }
      }
      min_val = lowest;
      if (!(min_val < inf))
        throw std::runtime_error("solve_assignment: infeasible cost matrix");
      const int j = remaining[best_it];
      if (row4col[j] == -1) sink = j;
      else i = row4col[j];
      scanned_cols[j] = 1;
      remaining[best_it] = remaining[--num_remaining];
    }

    u[cur] += min_val;
    for (int r = 0; r < n; ++r)
      if (scanned_rows[r] && r != cur) u[r] += min_val - shortest[col4row[r]];
    for (int j = 0; j < n; ++j)
      if (scanned_cols[j]) v[j] -= min_val - shortest[j];

    int j = sink;
    while (true) {
      const int r = path[j];
      row4col[j] = r;
      std::swap(col4row[r], j);
      if (r == cur) break;
    }
  }

  double total = 0.0;
  for (int r = 0; r < n; ++r)
    total += cost[static_cast<std::size_t>(r) * n + col4row[r]];
  if (col_of_row != nullptr) *col_of_row = col4row;
  return total;
}

}  // namespace stablab::ergo
