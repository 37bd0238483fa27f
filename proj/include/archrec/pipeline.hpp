#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "archrec/cluster.hpp"
#include "archrec/context.hpp"
#include "archrec/embed.hpp"
#include "archrec/experiment.hpp"
#include "archrec/ingest.hpp"
#include "archrec/io.hpp"
#include "archrec/splits.hpp"
#include "archrec/synth.hpp"

namespace archrec::pipeline {

namespace fs = std::filesystem;

// Points OPTICS runs on: the 2-D t-SNE coordinates or the PCA vectors.
enum class ClusterSource { kEmbedding, kPca };
std::string to_string(ClusterSource s);

// Every stage parameter plus the global seed and artifact root. Loaded from
// a flat key = value file; keys are listed by to_key_values().
struct PipelineConfig {
  fs::path root = "artifacts";
  std::uint64_t seed = 1;
  int threads = 1;

  bool synthetic = false;
  ingest::SynthSpec synth;
  fs::path events_path;
  fs::path users_path;
  ingest::FilterConfig filter;

  int pca_dims = 100;
  embed::TsneConfig tsne;
  cluster::OpticsConfig optics;
  ClusterSource cluster_source = ClusterSource::kEmbedding;
  double idf_threshold = 4.2;
  int top_k = 10;
  fs::path tags_path;

  eval::SplitSpec split;
  context::UserNormalization context_norm = context::UserNormalization::kSum;
  bool standardize_distances = true;
  recsys::VaeConfig vae;
  recsys::ImfConfig imf;
  std::vector<eval::ModelKind> models = eval::all_model_kinds();
  std::vector<int> ks = {10, 100};
  std::string baseline = "vae";
  eval::Alternative alternative = eval::Alternative::kTwoSided;

  // Overrides fields named in kv; unknown keys throw.
  void apply(const io::KeyValues& kv);
  io::KeyValues to_key_values() const;
  void validate() const;
};

PipelineConfig load_config(const fs::path& path);

// Desk-scale synthetic defaults used by `reproduce --synthetic`.
PipelineConfig synthetic_config(std::uint64_t seed, const fs::path& root);

// Stage manifest (manifest.txt in the stage directory):
//   stage = <name>
//   param.<key> = <value>
//   input.<name> = <path>      input.<name>.hash = <hex of its manifest or file>
//   output.<file> = <hex content hash>
struct Manifest {
  std::string stage;
  io::KeyValues params;
  std::vector<std::pair<std::string, fs::path>> inputs;
  std::vector<std::string> outputs;  // file names relative to the stage dir
};

void write_manifest(const fs::path& dir, const Manifest& m);
io::KeyValues read_manifest(const fs::path& dir);

// True when dir/manifest.txt records the same params and input hashes and
// every recorded output still has its recorded hash.
bool up_to_date(const fs::path& dir, const Manifest& planned);

// Follows input.* links from `dir` (breadth first) until a manifest declares
// an input called `name`; returns that path.
std::optional<fs::path> resolve_input(const fs::path& dir, const std::string& name);

struct StageOptions {
  bool force = false;  // ignore an up-to-date manifest
  bool write_svg = true;
};

// Each stage returns true when it ran and false when it was already up to
// date. Failures throw Error tagged with the stage name.
bool stage_synth(const ingest::SynthSpec& spec, const fs::path& out, const StageOptions& opt = {});
bool stage_ingest(const fs::path& events, const fs::path& users, const ingest::FilterConfig& cfg, const fs::path& out,
                  const StageOptions& opt = {});
bool stage_features(const fs::path& dataset_dir, int pca_dims, const fs::path& out, const StageOptions& opt = {});
bool stage_embed(const fs::path& features_dir, const embed::TsneConfig& cfg, const fs::path& out,
                 const StageOptions& opt = {});
bool stage_cluster(const fs::path& embed_dir, const cluster::OpticsConfig& cfg, const fs::path& out,
                   const StageOptions& opt = {}, ClusterSource source = ClusterSource::kEmbedding);
bool stage_archetypes(const fs::path& cluster_dir, double idf_threshold, int top_k, const fs::path& tags,
                      const fs::path& out, const StageOptions& opt = {});
bool stage_splits(const fs::path& dataset_dir, const eval::SplitSpec& spec, const fs::path& out,
                  const StageOptions& opt = {});
bool stage_context(const fs::path& cluster_dir, const fs::path& splits_dir, context::ContextKind kind,
                   context::UserNormalization norm, bool standardize, const fs::path& out,
                   const StageOptions& opt = {});

struct TrainInputs {
  fs::path splits_dir;
  fs::path cluster_dir;  // MP cluster scope and context models
  fs::path context_dir;  // context models only
};

bool stage_train(eval::ModelKind kind, const TrainInputs& in, const eval::ExperimentConfig& cfg, const fs::path& out,
                 const StageOptions& opt = {});

struct EvaluateOptions {
  std::vector<int> ks = {10, 100};
  std::string baseline = "vae";
  eval::Alternative alternative = eval::Alternative::kTwoSided;
  fs::path svg;  // optional metrics bar chart
};

// Writes the results CSV and a friedman.txt next to it.
bool stage_evaluate(const std::vector<fs::path>& model_dirs, const fs::path& splits_dir, const fs::path& out_csv,
                    const EvaluateOptions& eo, const StageOptions& opt = {});

struct Recommendation {
  std::int64_t track_id = 0;
  double score = 0.0;
};

// Top-k unseen tracks for a user id of the model's dataset. Validation and
// test users are scored from their input events only.
std::vector<Recommendation> recommend_for_user(const fs::path& model_dir, std::int64_t user_id, int k);

// Runs every stage under cfg.root, skipping stages whose manifest is current.
// Returns the path of results.csv.
fs::path run_pipeline(const PipelineConfig& cfg, const StageOptions& opt = {});

// Stage directory names under the artifact root.
fs::path stage_dir(const PipelineConfig& cfg, const std::string& stage);

}  // namespace archrec::pipeline
