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

enum class InputMode {
  kBinary,         // play indicators
  kCounts,         // raw playcounts
  kSumNormalized,  // playcounts divided by the user's total
};

std::string to_string(InputMode mode);
std::optional<InputMode> parse_input_mode(std::string_view name);

struct VaeConfig {
  int hidden = 1200;
  int latent = 600;
  double beta_max = 0.2;         // KL weight after annealing
  double anneal_fraction = 0.5;  // share of training steps spent ramping beta from 0
  double dropout = 0.5;          // input dropout while training
  int epochs = 20;
  int batch_size = 500;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  InputMode input_mode = InputMode::kBinary;
  bool l2_normalize_input = true;  // applied after dropout
  int validation_k = 100;
  std::uint64_t seed = 0;

  void validate() const;
};

// Weight matrices act on column vectors: enc1 = tanh(enc1_w * t), ...
struct VaeWeights {
  Eigen::MatrixXd enc1;     // hidden x n_tracks
  Eigen::MatrixXd enc_mu;   // latent x hidden
  Eigen::MatrixXd enc_sigma;// latent x hidden
  Eigen::MatrixXd context;  // latent x n_context (0 columns: no gate)
  Eigen::MatrixXd dec1;     // hidden x latent
  Eigen::MatrixXd dec2;     // n_tracks x hidden

  void set_zero_like(const VaeWeights& other);
  std::size_t parameter_count() const;
  bool all_finite() const;
};

struct GatedVae {
  VaeConfig config;
  VaeWeights weights;

  int n_tracks() const { return static_cast<int>(weights.enc1.cols()); }
  int n_context() const { return static_cast<int>(weights.context.cols()); }
  bool gated() const { return n_context() > 0; }

  // Xavier-uniform weights. The context layer draws from its own stream, so
  // a gated and a contextless model with the same seed share every other
  // weight.
  static GatedVae initialize(int n_tracks, int n_context, const VaeConfig& cfg);
};

// Column-per-user activations of one forward pass.
struct ForwardPass {
  Eigen::MatrixXd enc1, mu, sigma, gate, z, dec1, logits;
  Eigen::MatrixXd t_hat() const { return logits.array().tanh().matrix(); }
};

// inputs: n_tracks x B. contexts: n_context x B (ignored by a contextless
// model; a gated model needs it). eps: latent x B, nullptr means zero noise.
ForwardPass forward(const GatedVae& model, const Eigen::MatrixXd& inputs, const Eigen::MatrixXd* contexts,
                    const Eigen::MatrixXd* eps);

struct LossTerms {
  double total = 0.0;           // mean over the batch of recon + beta * kl
  double reconstruction = 0.0;  // mean multinomial negative log-likelihood
  double kl = 0.0;              // mean KL(N(mu, sigma^2) || N(0, 1))
};

// targets, logits: n_tracks x B. sigma^2 is floored at 1e-12.
LossTerms vae_loss(const Eigen::MatrixXd& targets, const Eigen::MatrixXd& logits, const Eigen::MatrixXd& mu,
                   const Eigen::MatrixXd& sigma, double beta);

struct LossGradient {
  LossTerms loss;
  VaeWeights grad;
};

LossGradient loss_and_gradient(const GatedVae& model, const Eigen::MatrixXd& inputs,
                               const Eigen::MatrixXd& targets, const Eigen::MatrixXd* contexts,
                               const Eigen::MatrixXd& eps, double beta);

// Dense column per user of the selected rows, preprocessed for the encoder
// without dropout.
Eigen::MatrixXd encode_inputs(std::span<const SparseRow> rows, int n_tracks, InputMode mode, bool l2_normalize);
Eigen::MatrixXd reconstruction_targets(std::span<const SparseRow> rows, int n_tracks, InputMode mode);

struct ValidationSet {
  std::span<const SparseRow> inputs;
  std::span<const std::vector<int>> holdout;  // sorted relevant tracks
  const Eigen::MatrixXd* context = nullptr;   // n_users x n_context
};

struct TrainReport {
  std::vector<double> epoch_loss;
  std::vector<double> epoch_reconstruction;
  std::vector<double> epoch_kl;
  std::vector<double> validation_ndcg;  // NDCG@validation_k per epoch
  int best_epoch = 0;
};

struct TrainResult {
  GatedVae model;
  TrainReport report;
};

// train_context: n_train x n_context or nullptr for the contextless model.
TrainResult train_vae(std::span<const SparseRow> train_rows, const Eigen::MatrixXd* train_context, int n_tracks,
                      const VaeConfig& cfg, const ValidationSet* validation = nullptr);

// Trains from an already initialized model (used to pin the gate open).
TrainResult train_vae_from(GatedVae model, std::span<const SparseRow> train_rows,
                           const Eigen::MatrixXd* train_context, const ValidationSet* validation = nullptr);

// Deterministic scores (eps = 0) for many users: n_tracks x B logits.
Eigen::MatrixXd score_users(const GatedVae& model, std::span<const SparseRow> rows, const Eigen::MatrixXd* contexts);

// Top-k unseen tracks for one user, ranked by the decoded mean.
std::vector<int> recommend(const GatedVae& model, const SparseRow& known, const Eigen::VectorXd* context, int k);

void save_vae(const std::filesystem::path& dir, const GatedVae& model);
GatedVae load_vae(const std::filesystem::path& dir);

}  // namespace archrec::recsys
