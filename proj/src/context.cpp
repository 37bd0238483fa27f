#include "archrec/context.hpp"

#include <algorithm>
#include <cmath>

#include "archrec/common.hpp"

namespace archrec::context {

std::string to_string(ContextKind kind) {
  switch (kind) {
    case ContextKind::kCountryOneHot: return "country-id";
    case ContextKind::kClusterOneHot: return "cluster-id";
    case ContextKind::kClusterDist: return "cluster-dist";
    case ContextKind::kCountryDist: return "country-dist";
  }
  return "unknown";
}

std::optional<ContextKind> parse_context_kind(std::string_view name) {
  for (auto k : {ContextKind::kCountryOneHot, ContextKind::kClusterOneHot, ContextKind::kClusterDist,
                 ContextKind::kCountryDist}) {
    if (to_string(k) == name) return k;
  }
  return std::nullopt;
}

GroupMap cluster_groups(const std::vector<int>& country_labels) {
  GroupMap g;
  int n_clusters = 0;
  for (int l : country_labels) n_clusters = std::max(n_clusters, l + 1);
  g.has_noise_group = std::any_of(country_labels.begin(), country_labels.end(), [](int l) { return l < 0; });
  g.n_groups = n_clusters + (g.has_noise_group ? 1 : 0);
  g.group_of_country.resize(country_labels.size());
  for (std::size_t c = 0; c < country_labels.size(); ++c) {
    g.group_of_country[c] = country_labels[c] >= 0 ? country_labels[c] : n_clusters;
  }
  return g;
}

GroupMap country_groups(int n_countries) {
  GroupMap g;
  g.n_groups = n_countries;
  g.group_of_country.resize(n_countries);
  for (int c = 0; c < n_countries; ++c) g.group_of_country[c] = c;
  return g;
}

GroupMap groups_for(ContextKind kind, const std::vector<int>& country_labels) {
  if (kind == ContextKind::kCountryOneHot || kind == ContextKind::kCountryDist) {
    return country_groups(static_cast<int>(country_labels.size()));
  }
  return cluster_groups(country_labels);
}

Centroids compute_centroids(const UserMatrix& users, const std::vector<int>& user_country, const GroupMap& groups,
                            int n_tracks, bool by_cluster) {
  Centroids out;
  out.by_cluster = by_cluster;
  out.vectors = Eigen::MatrixXd::Zero(groups.n_groups, n_tracks);
  for (std::size_t u = 0; u < users.size(); ++u) {
    const int g = groups.group_of_country[user_country[u]];
    const auto& row = users[u];
    for (std::size_t k = 0; k < row.nnz(); ++k) out.vectors(g, row.tracks[k]) += row.values[k];
  }
  for (int g = 0; g < groups.n_groups; ++g) {
    const double total = out.vectors.row(g).sum();
    if (total <= 0.0) throw Error("context", "centroid group " + std::to_string(g) + " is empty");
    out.vectors.row(g) /= total;
  }
  return out;
}

ContextModel build_context(ContextKind kind, const UserMatrix& users, const std::vector<int>& user_country,
                           const GroupMap& groups, const Centroids* centroids, int n_tracks,
                           UserNormalization norm) {
  ContextModel out;
  out.kind = kind;
  const auto n_users = static_cast<Eigen::Index>(users.size());
  out.vectors = Eigen::MatrixXd::Zero(n_users, groups.n_groups);

  if (kind == ContextKind::kCountryOneHot || kind == ContextKind::kClusterOneHot) {
    for (Eigen::Index u = 0; u < n_users; ++u) out.vectors(u, groups.group_of_country[user_country[u]]) = 1.0;
    return out;
  }

  if (!centroids || centroids->vectors.rows() != groups.n_groups || centroids->vectors.cols() != n_tracks) {
    throw Error("context", "distance context needs centroids matching the group map");
  }
  const Eigen::MatrixXd& cent = centroids->vectors;
  parallel_for(users.size(), [&](std::size_t u) {
    const auto& row = users[u];
    double scale = 0.0;
    if (norm == UserNormalization::kSum) {
      scale = row.sum();
    } else {
      for (double v : row.values) scale += v * v;
      scale = std::sqrt(scale);
    }
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n_tracks);
    if (scale > 0.0) {
      for (std::size_t k = 0; k < row.nnz(); ++k) x(row.tracks[k]) = row.values[k] / scale;
    }
    for (int g = 0; g < groups.n_groups; ++g) {
      out.vectors(static_cast<Eigen::Index>(u), g) = (cent.row(g).transpose() - x).norm();
    }
  });
  return out;
}

ContextModel build_context(ContextKind kind, const ingest::Dataset& ds, const std::vector<int>& country_labels,
                           UserNormalization norm) {
  const auto users = user_counts(ds);
  const auto groups = groups_for(kind, country_labels);
  if (kind == ContextKind::kCountryOneHot || kind == ContextKind::kClusterOneHot) {
    return build_context(kind, users, ds.user_countries(), groups, nullptr, ds.n_tracks(), norm);
  }
  const auto cent = compute_centroids(users, ds.user_countries(), groups, ds.n_tracks(),
                                      kind == ContextKind::kClusterDist);
  return build_context(kind, users, ds.user_countries(), groups, &cent, ds.n_tracks(), norm);
}

}  // namespace archrec::context
