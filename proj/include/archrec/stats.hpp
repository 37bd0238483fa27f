#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

namespace archrec::eval {

enum class Alternative { kTwoSided, kGreater, kLess };

struct WilcoxonResult {
  double statistic = 0.0;  // W+ (sum of ranks of positive differences)
  double p_value = 1.0;
  int n_used = 0;          // non-zero differences
  bool exact = false;
};

// Paired signed-rank test on a - b. Zero differences are dropped and tied
// |differences| get average ranks. Exact null distribution for n <= 25,
// otherwise a tie-corrected normal approximation with continuity correction.
WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b,
                                    Alternative alt = Alternative::kTwoSided);

struct FriedmanResult {
  double statistic = 0.0;
  double p_value = 1.0;
  int n_blocks = 0;
  int n_treatments = 0;
};

// values: n_blocks x n_treatments (users x models). Ranks within each block
// with averaged ties; statistic is tie-corrected and referred to chi-square
// with m - 1 degrees of freedom.
FriedmanResult friedman_test(const Eigen::MatrixXd& values);

// Average ranks (1-based) of a sample.
std::vector<double> average_ranks(std::span<const double> x);

double chi_square_survival(double x, double dof);
double normal_survival(double z);

}  // namespace archrec::eval
