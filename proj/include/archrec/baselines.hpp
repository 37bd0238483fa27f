#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "archrec/user_matrix.hpp"

namespace archrec::recsys {

enum class MpScope { kGlobal, kCountry, kCluster };

std::string to_string(MpScope scope);
std::optional<MpScope> parse_mp_scope(std::string_view name);

// Most-popular rankings by summed training playcount, one per scope value.
struct MpModel {
  MpScope scope = MpScope::kGlobal;
  std::vector<int> group_of_country;   // scope value of each dense country
  std::vector<std::vector<int>> ranked;  // per group: every track, playcount desc, index asc
  std::vector<int> global;               // fallback for groups without training users

  const std::vector<int>& ranking_for_country(int country) const;
  std::vector<int> recommend(int country, std::span<const int> known_sorted, int k) const;
};

// country_labels is only consulted for MpScope::kCluster (noise countries share
// one group).
MpModel mp_fit(std::span<const SparseRow> train_rows, std::span<const int> train_country, int n_tracks,
               int n_countries, MpScope scope, const std::vector<int>& country_labels = {});

enum class ImfLoss {
  kSquared,   // (score - y)^2 with y = +1 for plays, -1 for sampled negatives
  kLogistic,  // -log sigmoid(y * score)
};

struct ImfConfig {
  int factors = 128;
  int epochs = 15;
  double learning_rate = 0.05;
  double l2 = 1e-4;
  ImfLoss loss = ImfLoss::kSquared;
  double init_stddev = 0.1;
  std::uint64_t seed = 0;
};

struct ImfModel {
  Eigen::MatrixXd user_factors;  // n_users x factors
  Eigen::MatrixXd item_factors;  // n_tracks x factors
  Eigen::VectorXd item_bias;
  Eigen::VectorXd popularity;    // cold-start scores

  // user outside [0, n_users) falls back to item popularity.
  Eigen::VectorXd scores(int user) const;
  std::vector<int> recommend(int user, std::span<const int> known_sorted, int k) const;
};

// Factorizes the binarized user-track matrix; each observed pair is paired
// with one uniformly drawn unobserved track per epoch (50:50 sampling).
ImfModel imf_train(std::span<const SparseRow> rows, int n_tracks, const ImfConfig& cfg);

void save_mp(const std::filesystem::path& dir, const MpModel& m);
MpModel load_mp(const std::filesystem::path& dir);
void save_imf(const std::filesystem::path& dir, const ImfModel& m);
ImfModel load_imf(const std::filesystem::path& dir);

}  // namespace archrec::recsys
