#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "archrec/ingest.hpp"

namespace archrec::countrymap {

// Countries x tracks, each row normalized to sum to one.
struct CountryTrackMatrix {
  Eigen::MatrixXd values;
  std::vector<std::string> row_countries;
};

struct PcaResult {
  Eigen::MatrixXd components;  // d x n_tracks, orthonormal rows
  Eigen::MatrixXd projected;   // n_countries x d
  Eigen::VectorXd explained_variance_ratio;
  Eigen::VectorXd mean;        // n_tracks (zero when not centering)
};

struct PcaOptions {
  bool center = true;
  // Halko-style randomized range finder. Off by default; deterministic
  // eigen-decomposition of the Gram matrix otherwise.
  bool randomized = false;
  int oversample = 10;
  int power_iterations = 4;
  std::uint64_t seed = 0;
};

CountryTrackMatrix build_matrix(const ingest::Dataset& ds);

// Projects rows onto the top-d principal directions. d is clamped to
// min(rows - 1, cols, d) when centering (min(rows, cols, d) otherwise).
// Component signs are fixed so each component's largest-magnitude entry is
// positive.
PcaResult pca_reduce(const Eigen::MatrixXd& m, int d, const PcaOptions& opts = {});

}  // namespace archrec::countrymap
