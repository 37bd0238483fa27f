#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "archrec/baselines.hpp"
#include "archrec/context.hpp"
#include "archrec/ingest.hpp"
#include "archrec/splits.hpp"
#include "archrec/stats.hpp"
#include "archrec/vae.hpp"

namespace archrec::eval {

enum class ModelKind {
  kMpGlobal,
  kMpCountry,
  kMpCluster,
  kImf,
  kVae,
  kVaeCountryId,
  kVaeClusterId,
  kVaeClusterDist,
  kVaeCountryDist,
};

std::string model_name(ModelKind kind);
std::optional<ModelKind> parse_model_name(std::string_view name);
std::optional<context::ContextKind> context_of(ModelKind kind);
const std::vector<ModelKind>& all_model_kinds();

enum class Metric { kPrecision = 0, kRecall = 1, kNdcg = 2 };
std::string metric_name(Metric m);

// Inputs shared by every model of one experiment.
struct PreparedData {
  int n_tracks = 0;
  int n_countries = 0;
  std::vector<int> country_labels;
  UserMatrix train_rows;
  std::vector<int> train_country;
  UserMatrix val_inputs;
  std::vector<std::vector<int>> val_holdout;
  std::vector<int> val_country;
  UserMatrix test_inputs;
  std::vector<std::vector<int>> test_holdout;
  std::vector<int> test_country;
  std::vector<bool> test_scored;
};

PreparedData prepare(const ingest::Dataset& ds, const std::vector<int>& country_labels, const Splits& splits);

struct ContextSet {
  Eigen::MatrixXd train, val, test;  // users x n_context
};

// Centroids use training histories plus the input part of validation and
// test users; holdout events never enter.
ContextSet make_context(const PreparedData& data, context::ContextKind kind,
                        context::UserNormalization norm = context::UserNormalization::kSum,
                        bool standardize_distances = false);

struct ExperimentConfig {
  std::vector<ModelKind> models = all_model_kinds();
  recsys::VaeConfig vae;
  recsys::ImfConfig imf;
  std::vector<int> ks = {10, 100};
  context::UserNormalization context_norm = context::UserNormalization::kSum;
  // Z-score distance contexts per column with training-user statistics
  // before they reach the gate.
  bool standardize_distances = false;
  std::string baseline = "vae";
  Alternative alternative = Alternative::kTwoSided;
};

struct TrainedModel {
  ModelKind kind = ModelKind::kVae;
  std::optional<recsys::GatedVae> vae;
  std::optional<recsys::MpModel> mp;
  std::optional<recsys::ImfModel> imf;
  recsys::TrainReport report;
};

TrainedModel train_model(ModelKind kind, const PreparedData& data, const ContextSet* contexts,
                         const ExperimentConfig& cfg);

// Top-k lists (input history excluded) for every test user.
std::vector<std::vector<int>> recommend_test_users(const TrainedModel& model, const PreparedData& data,
                                                   const ContextSet* contexts, int k);

struct MetricTable {
  std::string model;
  std::vector<int> ks;
  // values[metric][k index][scored test user]
  std::array<std::vector<std::vector<double>>, 3> values;

  double mean(Metric m, std::size_t k_index) const;
};

MetricTable evaluate_lists(const std::string& name, const std::vector<std::vector<int>>& recs,
                           const PreparedData& data, const std::vector<int>& ks);

struct ComparisonRow {
  std::string model;
  Metric metric;
  int k;
  double mean;
  double p_vs_baseline;  // NaN for the baseline itself
};

struct ExperimentResult {
  std::vector<MetricTable> tables;
  std::map<std::string, recsys::TrainReport> reports;
  std::vector<ComparisonRow> rows;
  // Friedman across all models per (metric, k), keyed "ndcg@10".
  std::map<std::string, FriedmanResult> friedman;
};

std::vector<ComparisonRow> compare(const std::vector<MetricTable>& tables, const std::string& baseline,
                                   Alternative alt = Alternative::kTwoSided);
std::map<std::string, FriedmanResult> friedman_all(const std::vector<MetricTable>& tables);

ExperimentResult run_experiment(const PreparedData& data, const ExperimentConfig& cfg);

// CSV columns: model,metric,K,mean,p_vs_baseline
std::string results_csv(const std::vector<ComparisonRow>& rows);

// Restricts a dataset to the given dense track indices (kept in ascending
// order); users left without events disappear.
ingest::Dataset restrict_tracks(const ingest::Dataset& ds, const std::vector<int>& tracks);

struct SampledSubsetConfig {
  ingest::FilterConfig lowered_filter;
  int subset_size = 0;
  int n_samples = 3;
  std::uint64_t seed = 0;
  SplitSpec split;
  ExperimentConfig experiment;
};

struct SampledSubsetResult {
  int universe_size = 0;
  std::vector<ExperimentResult> runs;
  // Mean of per-run means, row order of the first run.
  std::vector<ComparisonRow> averaged;
};

// country_labels maps country code to cluster label; codes missing from the
// map are noise.
SampledSubsetResult sampled_subset_experiment(std::span<const ingest::ListeningEvent> events,
                                              const ingest::UserTable& users,
                                              const std::map<std::string, int>& country_labels,
                                              const SampledSubsetConfig& cfg);

std::vector<int> labels_for(const ingest::Dataset& ds, const std::map<std::string, int>& by_code);

}  // namespace archrec::eval
