#include "archrec/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/special_functions/gamma.hpp>

#include "archrec/common.hpp"

namespace archrec::eval {

std::vector<double> average_ranks(std::span<const double> x) {
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && x[idx[j + 1]] == x[idx[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}

double chi_square_survival(double x, double dof) {
  if (x <= 0.0) return 1.0;
  return boost::math::gamma_q(dof / 2.0, x / 2.0);
}

double normal_survival(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b, Alternative alt) {
  if (a.size() != b.size()) throw Error("eval", "wilcoxon needs paired samples of equal length");
  std::vector<double> d;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = a[i] - b[i];
    if (diff != 0.0) d.push_back(diff);
  }
  WilcoxonResult res;
  res.n_used = static_cast<int>(d.size());
  if (d.empty()) return res;

  std::vector<double> mags(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) mags[i] = std::abs(d[i]);
  const auto ranks = average_ranks(mags);
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d[i] > 0) res.statistic += ranks[i];
  }
  const int n = res.n_used;

  if (n <= 25) {
    // Exact null: each rank enters W+ with probability 1/2. Average ranks
    // are multiples of 1/2, so work on doubled integer ranks.
    res.exact = true;
    std::vector<int> r2(n);
    int total = 0;
    for (int i = 0; i < n; ++i) {
      r2[i] = static_cast<int>(std::lround(2.0 * ranks[i]));
      total += r2[i];
    }
    std::vector<double> dist(total + 1, 0.0);
    dist[0] = 1.0;
    for (int i = 0; i < n; ++i) {
      for (int s = total; s >= r2[i]; --s) dist[s] += dist[s - r2[i]];
    }
    const double count = std::ldexp(1.0, n);
    const int w2 = static_cast<int>(std::lround(2.0 * res.statistic));
    double le = 0.0, ge = 0.0;
    for (int s = 0; s <= total; ++s) {
      if (s <= w2) le += dist[s];
      if (s >= w2) ge += dist[s];
    }
    le /= count;
    ge /= count;
    switch (alt) {
      case Alternative::kTwoSided: res.p_value = std::min(1.0, 2.0 * std::min(le, ge)); break;
      case Alternative::kGreater: res.p_value = ge; break;
      case Alternative::kLess: res.p_value = le; break;
    }
    return res;
  }

  const double dn = n;
  const double mean = dn * (dn + 1.0) / 4.0;
  double tie_term = 0.0;
  {
    std::vector<double> sorted = mags;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size();) {
      std::size_t j = i;
      while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
      const double t = static_cast<double>(j - i + 1);
      tie_term += t * t * t - t;
      i = j + 1;
    }
  }
  const double sd = std::sqrt(dn * (dn + 1.0) * (2.0 * dn + 1.0) / 24.0 - tie_term / 48.0);
  if (sd == 0.0) return res;
  const double diff = res.statistic - mean;
  switch (alt) {
    case Alternative::kTwoSided: {
      const double z = std::max(0.0, std::abs(diff) - 0.5) / sd;
      res.p_value = std::min(1.0, 2.0 * normal_survival(z));
      break;
    }
    case Alternative::kGreater: res.p_value = normal_survival((diff - 0.5) / sd); break;
    case Alternative::kLess: res.p_value = 1.0 - normal_survival((diff + 0.5) / sd); break;
  }
  return res;
}

FriedmanResult friedman_test(const Eigen::MatrixXd& values) {
  FriedmanResult res;
  const Eigen::Index n = values.rows(), m = values.cols();
  res.n_blocks = static_cast<int>(n);
  res.n_treatments = static_cast<int>(m);
  if (n < 1 || m < 2) throw Error("eval", "friedman test needs >= 1 block and >= 2 treatments");
  Eigen::VectorXd rank_sum = Eigen::VectorXd::Zero(m);
  double tie_term = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    std::vector<double> row(m);
    for (Eigen::Index j = 0; j < m; ++j) row[j] = values(i, j);
    const auto r = average_ranks(row);
    for (Eigen::Index j = 0; j < m; ++j) rank_sum(j) += r[j];
    std::sort(row.begin(), row.end());
    for (std::size_t a = 0; a < row.size();) {
      std::size_t b = a;
      while (b + 1 < row.size() && row[b + 1] == row[a]) ++b;
      const double t = static_cast<double>(b - a + 1);
      tie_term += t * t * t - t;
      a = b + 1;
    }
  }
  const double dn = static_cast<double>(n), dm = static_cast<double>(m);
  double stat = 12.0 / (dn * dm * (dm + 1.0)) * rank_sum.squaredNorm() - 3.0 * dn * (dm + 1.0);
  const double correction = 1.0 - tie_term / (dn * (dm * dm * dm - dm));
  if (correction <= 0.0) return res;  // every block fully tied
  stat /= correction;
  res.statistic = std::max(0.0, stat);
  res.p_value = chi_square_survival(res.statistic, dm - 1.0);
  return res;
}

}  // namespace archrec::eval
