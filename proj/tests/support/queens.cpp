#include "queens.hpp"

#include <algorithm>
#include <cstdlib>
#include <numeric>

namespace testsupport {

std::vector<std::vector<long long>> all_queens(int n) {
  std::vector<long long> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 1);
  std::vector<std::vector<long long>> out;
  do {
    bool ok = true;
    for (int i = 0; i < n && ok; ++i) {
      for (int j = i + 1; j < n && ok; ++j) {
        if (std::llabs(perm[j] - perm[i]) == j - i) ok = false;
      }
    }
    if (ok) out.push_back(perm);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return out;
}

}  // namespace testsupport
