#include "archrec/ranking.hpp"

#include <algorithm>

namespace archrec::recsys {

std::vector<int> top_k(const Eigen::Ref<const Eigen::VectorXd>& scores, std::span<const int> exclude, int k) {
  std::vector<int> candidates;
  candidates.reserve(static_cast<std::size_t>(scores.size()));
  for (int i = 0; i < static_cast<int>(scores.size()); ++i) {
    if (!std::binary_search(exclude.begin(), exclude.end(), i)) candidates.push_back(i);
  }
  const auto kk = std::min<std::size_t>(static_cast<std::size_t>(std::max(k, 0)), candidates.size());
  std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(kk), candidates.end(),
                    [&](int a, int b) { return scores(a) != scores(b) ? scores(a) > scores(b) : a < b; });
  candidates.resize(kk);
  return candidates;
}

}  // namespace archrec::recsys
