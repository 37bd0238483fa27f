#pragma once

#include <span>
#include <vector>

namespace archrec::eval {

// `holdout` must be sorted ascending and duplicate-free. Recommendation
// lists shorter than K count the missing ranks as non-relevant.
double precision_at_k(std::span<const int> recommendations, std::span<const int> holdout, int k);
double recall_at_k(std::span<const int> recommendations, std::span<const int> holdout, int k);
double dcg_at_k(std::span<const int> recommendations, std::span<const int> holdout, int k);
// Ideal DCG places min(K, |holdout|) relevant items first.
double ideal_dcg_at_k(std::size_t n_relevant, int k);
double ndcg_at_k(std::span<const int> recommendations, std::span<const int> holdout, int k);

}  // namespace archrec::eval
