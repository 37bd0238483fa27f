#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace archrec::embed {

struct TsneConfig {
  double perplexity = 5.0;
  int output_dims = 2;
  int iterations = 1000;
  double early_exaggeration = 12.0;
  int exaggeration_iterations = 250;
  double learning_rate = 200.0;
  double initial_momentum = 0.5;
  double final_momentum = 0.8;
  int momentum_switch_iteration = 250;
  double init_stddev = 1e-4;
  bool adaptive_gains = true;
  std::uint64_t seed = 0;

  void validate(int n_points) const;
};

struct EmbeddingResult {
  Eigen::MatrixXd coords;  // n x 2
  double final_kl = 0.0;
  // KL(P || Q) after every iteration once exaggeration is off.
  std::vector<double> kl_trace;
};

struct Calibration {
  Eigen::MatrixXd conditional;  // row i holds P(j | i); zero diagonal
  Eigen::VectorXd beta;         // 1 / (2 sigma_i^2)
  std::vector<int> steps;       // bisection steps used per row
};

Eigen::MatrixXd pairwise_distances(const Eigen::MatrixXd& points);

// Gaussian conditionals over Euclidean distances with per-row bandwidth
// chosen by bisection so that exp(H_i) matches the perplexity (H in nats).
Calibration perplexity_calibration(const Eigen::MatrixXd& distances, double perplexity,
                                   double tolerance = 1e-5, int max_steps = 50);

// P_ij = (P(j|i) + P(i|j)) / (2n).
Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& conditional);

// Student-t (one degree of freedom) joint affinities of the embedding.
Eigen::MatrixXd student_t_affinities(const Eigen::MatrixXd& y);

double kl_divergence(const Eigen::MatrixXd& p, const Eigen::MatrixXd& y);
Eigen::MatrixXd kl_gradient(const Eigen::MatrixXd& p, const Eigen::MatrixXd& y);

// Joint P used by tsne_run (calibrated, symmetrized, floored at 1e-12).
Eigen::MatrixXd input_affinities(const Eigen::MatrixXd& points, double perplexity);

EmbeddingResult tsne_run(const Eigen::MatrixXd& points, const TsneConfig& cfg);
// Same descent from caller-provided starting coordinates.
EmbeddingResult tsne_run_from(const Eigen::MatrixXd& points, const TsneConfig& cfg, Eigen::MatrixXd init);

// Mean fraction of each point's k nearest neighbors in `high` that are also
// among its k nearest neighbors in `low`.
double neighborhood_preservation(const Eigen::MatrixXd& high, const Eigen::MatrixXd& low, int k);

}  // namespace archrec::embed
