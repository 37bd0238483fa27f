#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

namespace archrec::recsys {

// Indices of the k highest scores, descending, lowest index first on ties,
// skipping every index in `exclude` (sorted ascending).
std::vector<int> top_k(const Eigen::Ref<const Eigen::VectorXd>& scores, std::span<const int> exclude, int k);

}  // namespace archrec::recsys
