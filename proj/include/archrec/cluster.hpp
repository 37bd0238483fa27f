#pragma once

#include <limits>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace archrec::cluster {

struct OpticsConfig {
  // Neighbor count for core distances (self included) and minimum size of
  // an extracted cluster.
  int min_cluster_size = 3;
  double xi = 0.05;
  double max_eps = std::numeric_limits<double>::infinity();
  bool predecessor_correction = true;

  void validate() const;
};

struct OpticsOrdering {
  std::vector<int> order;
  std::vector<double> reachability;   // indexed by point; inf when unreached
  std::vector<double> core_distance;  // indexed by point
  std::vector<int> predecessor;       // -1 when none
};

struct ClusterAssignment {
  std::vector<int> labels;  // -1 = noise
  int n_clusters = 0;
  // Cluster spans as [start, end] positions in the ordering, in discovery
  // order.
  std::vector<std::pair<int, int>> spans;
};

// Core distance: distance to the min_cluster_size-th nearest neighbor with the
// point itself counted as the first. Expansion always continues from the
// unprocessed point of smallest reachability, lowest index on ties.
OpticsOrdering optics_order(const Eigen::MatrixXd& points, const OpticsConfig& cfg);
OpticsOrdering optics_order_from_distances(const Eigen::MatrixXd& distances, const OpticsConfig& cfg);

ClusterAssignment extract_xi_clusters(const OpticsOrdering& ordering, const OpticsConfig& cfg);

ClusterAssignment optics_cluster(const Eigen::MatrixXd& points, const OpticsConfig& cfg);

double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b);

}  // namespace archrec::cluster
