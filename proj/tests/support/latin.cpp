#include "latin.hpp"

namespace testsupport {

namespace {

void fill(int n, int pos, std::vector<long long>& grid,
          std::vector<std::vector<long long>>& out) {
  if (pos == n * n) {
    out.push_back(grid);
    return;
  }
  const int r = pos / n;
  const int c = pos % n;
  for (long long v = 1; v <= n; ++v) {
    bool clash = false;
    for (int k = 0; k < c && !clash; ++k) clash = grid[r * n + k] == v;
    for (int k = 0; k < r && !clash; ++k) clash = grid[k * n + c] == v;
    if (clash) continue;
    grid[pos] = v;
    fill(n, pos + 1, grid, out);
  }
  grid[pos] = 0;
}

}  // namespace

std::vector<std::vector<long long>> all_latin_squares(int n) {
  std::vector<std::vector<long long>> out;
  std::vector<long long> grid(static_cast<std::size_t>(n) * n, 0);
  fill(n, 0, grid, out);
  return out;
}

}  // namespace testsupport
