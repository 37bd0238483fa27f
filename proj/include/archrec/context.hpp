#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "archrec/user_matrix.hpp"

namespace archrec::context {

enum class ContextKind {
  kCountryOneHot,  // model 1
  kClusterOneHot,  // model 2
  kClusterDist,    // model 3
  kCountryDist,    // model 4
};

std::string to_string(ContextKind kind);
std::optional<ContextKind> parse_context_kind(std::string_view name);

enum class UserNormalization { kSum, kL2 };

// Maps dense countries onto context groups. For cluster kinds, noise
// countries (-1) share one extra trailing group when any exist.
struct GroupMap {
  std::vector<int> group_of_country;
  int n_groups = 0;
  bool has_noise_group = false;
};

GroupMap cluster_groups(const std::vector<int>& country_labels);
GroupMap country_groups(int n_countries);
GroupMap groups_for(ContextKind kind, const std::vector<int>& country_labels);

struct Centroids {
  bool by_cluster = true;
  Eigen::MatrixXd vectors;  // n_groups x n_tracks, rows sum to 1
};

// Summed listening counts per group, normalized by the group total.
Centroids compute_centroids(const UserMatrix& users, const std::vector<int>& user_country, const GroupMap& groups,
                            int n_tracks, bool by_cluster);

struct ContextModel {
  ContextKind kind = ContextKind::kCountryOneHot;
  Eigen::MatrixXd vectors;  // n_users x n_context
  int n_context() const { return static_cast<int>(vectors.cols()); }
};

// One-hot kinds ignore `centroids`; distance kinds need them.
ContextModel build_context(ContextKind kind, const UserMatrix& users, const std::vector<int>& user_country,
                           const GroupMap& groups, const Centroids* centroids, int n_tracks,
                           UserNormalization norm = UserNormalization::kSum);

// Convenience: centroids and context from the full dataset.
ContextModel build_context(ContextKind kind, const ingest::Dataset& ds, const std::vector<int>& country_labels,
                           UserNormalization norm = UserNormalization::kSum);

}  // namespace archrec::context
