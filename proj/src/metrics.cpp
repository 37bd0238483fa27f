#include "archrec/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace archrec::eval {

namespace {

bool relevant(std::span<const int> holdout, int item) {
  return std::binary_search(holdout.begin(), holdout.end(), item);
}

std::size_t hits(std::span<const int> recs, std::span<const int> holdout, int k) {
  const auto n = std::min<std::size_t>(recs.size(), static_cast<std::size_t>(std::max(k, 0)));
  std::size_t h = 0;
  for (std::size_t i = 0; i < n; ++i) h += relevant(holdout, recs[i]) ? 1 : 0;
  return h;
}

}  // namespace

double precision_at_k(std::span<const int> recs, std::span<const int> holdout, int k) {
  if (k <= 0) return 0.0;
  return static_cast<double>(hits(recs, holdout, k)) / k;
}

double recall_at_k(std::span<const int> recs, std::span<const int> holdout, int k) {
  const auto denom = std::min<std::size_t>(static_cast<std::size_t>(std::max(k, 0)), holdout.size());
  if (denom == 0) return 0.0;
  return static_cast<double>(hits(recs, holdout, k)) / static_cast<double>(denom);
}

double dcg_at_k(std::span<const int> recs, std::span<const int> holdout, int k) {
  const auto n = std::min<std::size_t>(recs.size(), static_cast<std::size_t>(std::max(k, 0)));
  double dcg = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (relevant(holdout, recs[i])) dcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
  }
  return dcg;
}

double ideal_dcg_at_k(std::size_t n_relevant, int k) {
  const auto n = std::min<std::size_t>(n_relevant, static_cast<std::size_t>(std::max(k, 0)));
  double idcg = 0.0;
  for (std::size_t i = 0; i < n; ++i) idcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
  return idcg;
}

double ndcg_at_k(std::span<const int> recs, std::span<const int> holdout, int k) {
  const double idcg = ideal_dcg_at_k(holdout.size(), k);
  if (idcg == 0.0) return 0.0;
  return dcg_at_k(recs, holdout, k) / idcg;
}

}  // namespace archrec::eval
