#include "archrec/countrymap.hpp"

#include <algorithm>
#include <random>

#include "archrec/common.hpp"

namespace archrec::countrymap {

CountryTrackMatrix build_matrix(const ingest::Dataset& ds) {
  if (ds.n_events() == 0) throw Error("countrymap", "dataset is empty");
  CountryTrackMatrix out;
  out.row_countries = ds.country_codes();
  out.values = Eigen::MatrixXd::Zero(ds.n_countries(), ds.n_tracks());
  for (int u = 0; u < ds.n_users(); ++u) {
    const int c = ds.user_country(u);
    for (int t : ds.user_events(u)) out.values(c, t) += 1.0;
  }
  for (int c = 0; c < ds.n_countries(); ++c) {
    const double total = out.values.row(c).sum();
    if (total <= 0.0) throw Error("countrymap", "country " + out.row_countries[c] + " has no listening events");
    out.values.row(c) /= total;
  }
  return out;
}

namespace {

// Left singular vectors and singular values of x (n x p, n small) via the
// n x n Gram matrix, returned in descending order.
void gram_svd(const Eigen::MatrixXd& x, Eigen::MatrixXd& u, Eigen::VectorXd& s) {
  const Eigen::MatrixXd gram = x * x.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  const Eigen::Index n = gram.rows();
  u.resize(n, n);
  s.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    u.col(i) = eig.eigenvectors().col(n - 1 - i);
    s(i) = std::sqrt(std::max(0.0, eig.eigenvalues()(n - 1 - i)));
  }
}

Eigen::MatrixXd randomized_basis(const Eigen::MatrixXd& x, int k, const PcaOptions& opts) {
  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd omega(x.cols(), k);
  for (Eigen::Index i = 0; i < omega.size(); ++i) omega.data()[i] = normal(rng);
  Eigen::MatrixXd y = x * omega;
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(y);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(y.rows(), std::min<Eigen::Index>(k, y.rows()));
  for (int it = 0; it < opts.power_iterations; ++it) {
    Eigen::MatrixXd z = x.transpose() * q;
    Eigen::HouseholderQR<Eigen::MatrixXd> qz(z);
    z = qz.householderQ() * Eigen::MatrixXd::Identity(z.rows(), z.cols());
    y = x * z;
    Eigen::HouseholderQR<Eigen::MatrixXd> qy(y);
    q = qy.householderQ() * Eigen::MatrixXd::Identity(y.rows(), std::min<Eigen::Index>(y.cols(), y.rows()));
  }
  return q;
}

}  // namespace

PcaResult pca_reduce(const Eigen::MatrixXd& m, int d, const PcaOptions& opts) {
  if (d < 1) throw Error("countrymap", "pca dimension must be >= 1");
  const Eigen::Index n = m.rows(), p = m.cols();
  PcaResult out;
  out.mean = opts.center ? Eigen::VectorXd(m.colwise().mean().transpose()) : Eigen::VectorXd::Zero(p);
  const Eigen::MatrixXd x = m.rowwise() - out.mean.transpose();
  const Eigen::Index max_rank = std::max<Eigen::Index>(0, opts.center ? n - 1 : n);
  const Eigen::Index k = std::min<Eigen::Index>({max_rank, p, static_cast<Eigen::Index>(d)});

  const double total = x.squaredNorm();
  Eigen::MatrixXd u;
  Eigen::VectorXd s;
  if (opts.randomized && k + opts.oversample < std::min(n, p)) {
    const Eigen::MatrixXd q = randomized_basis(x, static_cast<int>(k + opts.oversample), opts);
    const Eigen::MatrixXd b = q.transpose() * x;
    Eigen::MatrixXd ub;
    gram_svd(b, ub, s);
    u = q * ub;
  } else {
    gram_svd(x, u, s);
  }

  out.components = Eigen::MatrixXd::Zero(k, p);
  out.projected = Eigen::MatrixXd::Zero(n, k);
  out.explained_variance_ratio = Eigen::VectorXd::Zero(k);
  const double tol = 1e-7 * (s.size() ? s(0) : 0.0);
  for (Eigen::Index i = 0; i < k; ++i) {
    if (s(i) <= tol) continue;  // rank deficient: leave zero component
    Eigen::RowVectorXd v = (u.col(i).transpose() * x) / s(i);
    Eigen::Index arg;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    out.components.row(i) = v;
    out.explained_variance_ratio(i) = total > 0.0 ? s(i) * s(i) / total : 0.0;
  }
  out.projected = x * out.components.transpose();
  return out;
}

}  // namespace archrec::countrymap
