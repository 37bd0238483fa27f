#include "archrec/embed.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "archrec/common.hpp"

namespace archrec::embed {

void TsneConfig::validate(int n_points) const {
  if (n_points < 3) throw Error("embed", "t-SNE needs at least 3 points");
  if (!(perplexity > 0.0) || perplexity >= n_points) {
    throw Error("embed", "perplexity must be in (0, n_points)");
  }
  if (output_dims != 2) throw Error("embed", "only 2-D output is supported");
  if (iterations < 1) throw Error("embed", "iterations must be >= 1");
}

Eigen::MatrixXd pairwise_distances(const Eigen::MatrixXd& points) {
  const Eigen::Index n = points.rows();
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      d(i, j) = d(j, i) = (points.row(i) - points.row(j)).norm();
    }
  }
  return d;
}

Calibration perplexity_calibration(const Eigen::MatrixXd& distances, double perplexity, double tolerance,
                                   int max_steps) {
  const Eigen::Index n = distances.rows();
  if (!distances.allFinite()) throw Error("embed", "non-finite distances");
  Calibration out;
  out.conditional = Eigen::MatrixXd::Zero(n, n);
  out.beta = Eigen::VectorXd::Ones(n);
  out.steps.assign(n, 0);
  const double target = std::log(perplexity);

  for (Eigen::Index i = 0; i < n; ++i) {
    std::vector<double> d2;
    d2.reserve(n - 1);
    double dmin = std::numeric_limits<double>::infinity(), dsum = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i) continue;
      const double v = distances(i, j) * distances(i, j);
      d2.push_back(v);
      dmin = std::min(dmin, v);
      dsum += v;
    }
    const double dmean = dsum / static_cast<double>(d2.size());
    std::vector<double> w(d2.size());
    // Evaluates the row at bandwidth beta; returns entropy in nats.
    auto evaluate = [&](double beta) {
      double z = 0.0, wd = 0.0;
      for (std::size_t j = 0; j < d2.size(); ++j) {
        w[j] = std::exp(-beta * (d2[j] - dmin));
        z += w[j];
        wd += w[j] * (d2[j] - dmin);
      }
      for (auto& v : w) v /= z;
      return std::log(z) + beta * wd / z;
    };

    double beta = dmean > 0.0 ? 1.0 / dmean : 1.0;
    double lo = 0.0, hi = std::numeric_limits<double>::infinity();
    double h = evaluate(beta);
    int step = 0;
    while (step < max_steps && std::abs(h - target) > tolerance) {
      if (h > target) {
        lo = beta;
        beta = std::isinf(hi) ? beta * 2.0 : 0.5 * (beta + hi);
      } else {
        hi = beta;
        beta = 0.5 * (beta + lo);
      }
      h = evaluate(beta);
      ++step;
    }
    out.beta(i) = beta;
    out.steps[i] = step;
    for (Eigen::Index j = 0, k = 0; j < n; ++j) {
      if (j == i) continue;
      out.conditional(i, j) = w[k++];
    }
  }
  return out;
}

Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& conditional) {
  const double n = static_cast<double>(conditional.rows());
  return (conditional + conditional.transpose()) / (2.0 * n);
}

namespace {

Eigen::MatrixXd student_kernel(const Eigen::MatrixXd& y) {
  const Eigen::Index n = y.rows();
  Eigen::MatrixXd num = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      num(i, j) = num(j, i) = 1.0 / (1.0 + (y.row(i) - y.row(j)).squaredNorm());
    }
  }
  return num;
}

double kl_from(const Eigen::MatrixXd& p, const Eigen::MatrixXd& q) {
  double kl = 0.0;
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    for (Eigen::Index j = 0; j < p.cols(); ++j) {
      if (i == j || p(i, j) <= 0.0) continue;
      kl += p(i, j) * std::log(p(i, j) / std::max(q(i, j), 1e-300));
    }
  }
  return kl;
}

// Gradient with P scaled by `exaggeration`; also returns un-scaled Q.
Eigen::MatrixXd gradient_with(const Eigen::MatrixXd& p, const Eigen::MatrixXd& y, double exaggeration,
                              Eigen::MatrixXd* q_out) {
  const Eigen::MatrixXd num = student_kernel(y);
  const double z = num.sum();
  const Eigen::MatrixXd q = num / z;
  const Eigen::MatrixXd coeff = ((exaggeration * p - q).array() * num.array()).matrix();
  Eigen::MatrixXd grad(y.rows(), y.cols());
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    Eigen::RowVectorXd g = Eigen::RowVectorXd::Zero(y.cols());
    for (Eigen::Index j = 0; j < y.rows(); ++j) {
      if (j != i) g += coeff(i, j) * (y.row(i) - y.row(j));
    }
    grad.row(i) = 4.0 * g;
  }
  if (q_out) *q_out = q;
  return grad;
}

}  // namespace

Eigen::MatrixXd student_t_affinities(const Eigen::MatrixXd& y) {
  const Eigen::MatrixXd num = student_kernel(y);
  return num / num.sum();
}

double kl_divergence(const Eigen::MatrixXd& p, const Eigen::MatrixXd& y) {
  return kl_from(p, student_t_affinities(y));
}

Eigen::MatrixXd kl_gradient(const Eigen::MatrixXd& p, const Eigen::MatrixXd& y) {
  return gradient_with(p, y, 1.0, nullptr);
}

Eigen::MatrixXd input_affinities(const Eigen::MatrixXd& points, double perplexity) {
  const auto cal = perplexity_calibration(pairwise_distances(points), perplexity);
  Eigen::MatrixXd p = symmetrize(cal.conditional);
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    for (Eigen::Index j = 0; j < p.cols(); ++j) {
      if (i != j) p(i, j) = std::max(p(i, j), 1e-12);
    }
  }
  return p;
}

EmbeddingResult tsne_run(const Eigen::MatrixXd& points, const TsneConfig& cfg) {
  cfg.validate(static_cast<int>(points.rows()));
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, cfg.init_stddev);
  Eigen::MatrixXd init(points.rows(), cfg.output_dims);
  for (Eigen::Index i = 0; i < init.rows(); ++i) {
    for (Eigen::Index j = 0; j < init.cols(); ++j) init(i, j) = normal(rng);
  }
  return tsne_run_from(points, cfg, std::move(init));
}

EmbeddingResult tsne_run_from(const Eigen::MatrixXd& points, const TsneConfig& cfg, Eigen::MatrixXd y) {
  cfg.validate(static_cast<int>(points.rows()));
  if (y.rows() != points.rows() || y.cols() != cfg.output_dims) {
    throw Error("embed", "initial coordinates have the wrong shape");
  }
  const Eigen::MatrixXd p = input_affinities(points, cfg.perplexity);
  const Eigen::Index n = y.rows();
  Eigen::MatrixXd update = Eigen::MatrixXd::Zero(n, y.cols());
  Eigen::MatrixXd gains = Eigen::MatrixXd::Ones(n, y.cols());

  EmbeddingResult out;
  for (int iter = 0; iter < cfg.iterations; ++iter) {
    const bool exaggerating = iter < cfg.exaggeration_iterations;
    const double exaggeration = exaggerating ? cfg.early_exaggeration : 1.0;
    const double momentum = iter < cfg.momentum_switch_iteration ? cfg.initial_momentum : cfg.final_momentum;
    const Eigen::MatrixXd grad = gradient_with(p, y, exaggeration, nullptr);
    if (cfg.adaptive_gains) {
      for (Eigen::Index k = 0; k < gains.size(); ++k) {
        const bool flip = (grad.data()[k] > 0.0) != (update.data()[k] > 0.0);
        gains.data()[k] = flip ? gains.data()[k] + 0.2 : gains.data()[k] * 0.8;
        gains.data()[k] = std::max(gains.data()[k], 0.01);
      }
    }
    // The step is taken on grad / 4, the scaling the reference t-SNE codes
    // use, so learning rates carry over from them.
    update = momentum * update - (0.25 * cfg.learning_rate) * gains.cwiseProduct(grad);
    y += update;
    y.rowwise() -= y.colwise().mean();
    if (!y.allFinite()) throw Error("embed", "t-SNE diverged at iteration " + std::to_string(iter));
    if (!exaggerating) out.kl_trace.push_back(kl_divergence(p, y));
  }
  out.final_kl = out.kl_trace.empty() ? kl_divergence(p, y) : out.kl_trace.back();
  out.coords = std::move(y);
  return out;
}

namespace {

std::vector<int> knn(const Eigen::MatrixXd& d, Eigen::Index i, int k) {
  std::vector<int> idx;
  for (Eigen::Index j = 0; j < d.rows(); ++j) {
    if (j != i) idx.push_back(static_cast<int>(j));
  }
  const auto kk = std::min<std::size_t>(k, idx.size());
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(kk), idx.end(), [&](int a, int b) {
    return d(i, a) != d(i, b) ? d(i, a) < d(i, b) : a < b;
  });
  idx.resize(kk);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace

double neighborhood_preservation(const Eigen::MatrixXd& high, const Eigen::MatrixXd& low, int k) {
  const Eigen::MatrixXd dh = pairwise_distances(high), dl = pairwise_distances(low);
  const Eigen::Index n = high.rows();
  if (n < 2 || k < 1) return 0.0;
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto a = knn(dh, i, k), b = knn(dl, i, k);
    std::vector<int> common;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(common));
    total += static_cast<double>(common.size()) / static_cast<double>(a.size());
  }
  return total / static_cast<double>(n);
}

}  // namespace archrec::embed
