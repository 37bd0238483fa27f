#include "archrec/vae.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <Eigen/SparseCore>

#include "archrec/common.hpp"
#include "archrec/io.hpp"
#include "archrec/metrics.hpp"
#include "archrec/ranking.hpp"

namespace archrec::recsys {

namespace {

constexpr double kVarianceFloor = 1e-12;

Eigen::MatrixXd xavier(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> unif(-limit, limit);
  Eigen::MatrixXd m(rows, cols);
  // Row-major fill order keeps the stream layout independent of Eigen storage.
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = unif(rng);
  }
  return m;
}

Eigen::MatrixXd tanh_of(const Eigen::MatrixXd& a) { return a.array().tanh().matrix(); }

Eigen::MatrixXd sigmoid_of(const Eigen::MatrixXd& a) {
  return (1.0 / (1.0 + (-a.array()).exp())).matrix();
}

template <class F>
void for_each_pair(VaeWeights& a, const VaeWeights& b, F&& f) {
  f(a.enc1, b.enc1);
  f(a.enc_mu, b.enc_mu);
  f(a.enc_sigma, b.enc_sigma);
  f(a.context, b.context);
  f(a.dec1, b.dec1);
  f(a.dec2, b.dec2);
}

}  // namespace

std::string to_string(InputMode mode) {
  switch (mode) {
    case InputMode::kBinary: return "binary";
    case InputMode::kCounts: return "counts";
    case InputMode::kSumNormalized: return "sum-normalized";
  }
  return "unknown";
}

std::optional<InputMode> parse_input_mode(std::string_view name) {
  for (auto m : {InputMode::kBinary, InputMode::kCounts, InputMode::kSumNormalized}) {
    if (to_string(m) == name) return m;
  }
  return std::nullopt;
}

void VaeConfig::validate() const {
  auto fail = [](const std::string& m) { throw Error("recsys", m); };
  if (hidden < 1 || latent < 1) fail("layer sizes must be positive");
  if (beta_max < 0.0) fail("beta must be >= 0");
  if (anneal_fraction < 0.0 || anneal_fraction > 1.0) fail("anneal_fraction must be in [0, 1]");
  if (dropout < 0.0 || dropout >= 1.0) fail("dropout must be in [0, 1)");
  if (epochs < 1 || batch_size < 1) fail("epochs and batch size must be >= 1");
  if (!(learning_rate > 0.0)) fail("learning rate must be positive");
}

void VaeWeights::set_zero_like(const VaeWeights& other) {
  for_each_pair(*this, other, [](Eigen::MatrixXd& a, const Eigen::MatrixXd& b) { a.setZero(b.rows(), b.cols()); });
}

std::size_t VaeWeights::parameter_count() const {
  return static_cast<std::size_t>(enc1.size() + enc_mu.size() + enc_sigma.size() + context.size() + dec1.size() +
                                  dec2.size());
}

bool VaeWeights::all_finite() const {
  return enc1.allFinite() && enc_mu.allFinite() && enc_sigma.allFinite() && context.allFinite() &&
         dec1.allFinite() && dec2.allFinite();
}

GatedVae GatedVae::initialize(int n_tracks, int n_context, const VaeConfig& cfg) {
  cfg.validate();
  if (n_tracks < 1) throw Error("recsys", "model needs at least one track");
  GatedVae m;
  m.config = cfg;
  std::mt19937_64 rng(derive_seed(cfg.seed, "vae-init"));
  m.weights.enc1 = xavier(cfg.hidden, n_tracks, rng);
  m.weights.enc_mu = xavier(cfg.latent, cfg.hidden, rng);
  m.weights.enc_sigma = xavier(cfg.latent, cfg.hidden, rng);
  m.weights.dec1 = xavier(cfg.hidden, cfg.latent, rng);
  m.weights.dec2 = xavier(n_tracks, cfg.hidden, rng);
  std::mt19937_64 ctx_rng(derive_seed(cfg.seed, "vae-init-context"));
  m.weights.context = n_context > 0 ? xavier(cfg.latent, n_context, ctx_rng) : Eigen::MatrixXd(cfg.latent, 0);
  return m;
}

ForwardPass forward(const GatedVae& model, const Eigen::MatrixXd& inputs, const Eigen::MatrixXd* contexts,
                    const Eigen::MatrixXd* eps) {
  const auto& w = model.weights;
  const Eigen::Index batch = inputs.cols();
  if (inputs.rows() != model.n_tracks()) throw Error("recsys", "input length does not match n_tracks");
  ForwardPass f;
  // Inputs are mostly zeros; the sparse product skips them.
  const Eigen::SparseMatrix<double> sparse_in = inputs.sparseView();
  f.enc1 = tanh_of(w.enc1 * sparse_in);
  f.mu = tanh_of(w.enc_mu * f.enc1);
  f.sigma = tanh_of(w.enc_sigma * f.enc1);
  if (model.gated()) {
    if (!contexts || contexts->rows() != model.n_context() || contexts->cols() != batch) {
      throw Error("recsys", "context shape does not match the model");
    }
    f.gate = sigmoid_of(w.context * *contexts);
  } else {
    f.gate = Eigen::MatrixXd::Ones(w.enc_mu.rows(), batch);
  }
  if (eps) {
    if (eps->rows() != f.mu.rows() || eps->cols() != batch) throw Error("recsys", "noise shape mismatch");
    f.z = ((f.mu.array() + f.sigma.array() * eps->array()) * f.gate.array()).matrix();
  } else {
    f.z = (f.mu.array() * f.gate.array()).matrix();
  }
  f.dec1 = tanh_of(w.dec1 * f.z);
  f.logits = w.dec2 * f.dec1;
  return f;
}

LossTerms vae_loss(const Eigen::MatrixXd& targets, const Eigen::MatrixXd& logits, const Eigen::MatrixXd& mu,
                   const Eigen::MatrixXd& sigma, double beta) {
  LossTerms out;
  const Eigen::Index batch = logits.cols();
  if (batch == 0) return out;
  for (Eigen::Index b = 0; b < batch; ++b) {
    const double mx = logits.col(b).maxCoeff();
    const double lse = mx + std::log((logits.col(b).array() - mx).exp().sum());
    out.reconstruction -= (targets.col(b).array() * (logits.col(b).array() - lse)).sum();
    for (Eigen::Index j = 0; j < mu.rows(); ++j) {
      const double s2 = std::max(sigma(j, b) * sigma(j, b), kVarianceFloor);
      out.kl += 0.5 * (mu(j, b) * mu(j, b) + s2 - std::log(s2) - 1.0);
    }
  }
  out.reconstruction /= static_cast<double>(batch);
  out.kl /= static_cast<double>(batch);
  out.total = out.reconstruction + beta * out.kl;
  return out;
}

LossGradient loss_and_gradient(const GatedVae& model, const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets,
                               const Eigen::MatrixXd* contexts, const Eigen::MatrixXd& eps, double beta) {
  const auto& w = model.weights;
  const ForwardPass f = forward(model, inputs, contexts, &eps);
  LossGradient out;
  out.loss = vae_loss(targets, f.logits, f.mu, f.sigma, beta);
  out.grad.set_zero_like(w);
  const double inv_b = 1.0 / static_cast<double>(inputs.cols());

  // Multinomial likelihood: d/dlogits = softmax * sum(t) - t.
  Eigen::MatrixXd g_logits(f.logits.rows(), f.logits.cols());
  for (Eigen::Index b = 0; b < f.logits.cols(); ++b) {
    const double mx = f.logits.col(b).maxCoeff();
    Eigen::VectorXd p = (f.logits.col(b).array() - mx).exp();
    p /= p.sum();
    g_logits.col(b) = (p * targets.col(b).sum() - targets.col(b)) * inv_b;
  }
  out.grad.dec2 = g_logits * f.dec1.transpose();
  const Eigen::MatrixXd g_a1 = ((w.dec2.transpose() * g_logits).array() * (1.0 - f.dec1.array().square())).matrix();
  out.grad.dec1 = g_a1 * f.z.transpose();
  const Eigen::MatrixXd g_z = w.dec1.transpose() * g_a1;

  const Eigen::ArrayXXd pre = f.mu.array() + f.sigma.array() * eps.array();
  Eigen::ArrayXXd g_mu = g_z.array() * f.gate.array() + beta * inv_b * f.mu.array();
  Eigen::ArrayXXd g_sigma = g_z.array() * f.gate.array() * eps.array();
  for (Eigen::Index k = 0; k < g_sigma.size(); ++k) {
    const double s = f.sigma.data()[k];
    if (s * s > kVarianceFloor) g_sigma.data()[k] += beta * inv_b * (s - 1.0 / s);
  }
  if (model.gated()) {
    const Eigen::MatrixXd g_actx = (g_z.array() * pre * f.gate.array() * (1.0 - f.gate.array())).matrix();
    out.grad.context = g_actx * contexts->transpose();
  }
  const Eigen::MatrixXd g_amu = (g_mu * (1.0 - f.mu.array().square())).matrix();
  const Eigen::MatrixXd g_asig = (g_sigma * (1.0 - f.sigma.array().square())).matrix();
  out.grad.enc_mu = g_amu * f.enc1.transpose();
  out.grad.enc_sigma = g_asig * f.enc1.transpose();
  const Eigen::MatrixXd g_a0 =
      ((w.enc_mu.transpose() * g_amu + w.enc_sigma.transpose() * g_asig).array() * (1.0 - f.enc1.array().square()))
          .matrix();
  const Eigen::SparseMatrix<double> sparse_in = inputs.sparseView();
  out.grad.enc1 = g_a0 * sparse_in.transpose();
  return out;
}

namespace {

double row_value(const SparseRow& row, std::size_t k, InputMode mode, double total) {
  switch (mode) {
    case InputMode::kBinary: return 1.0;
    case InputMode::kCounts: return row.values[k];
    case InputMode::kSumNormalized: return total > 0.0 ? row.values[k] / total : 0.0;
  }
  return 0.0;
}

void l2_normalize_columns(Eigen::MatrixXd& m) {
  for (Eigen::Index b = 0; b < m.cols(); ++b) {
    const double n = m.col(b).norm();
    if (n > 0.0) m.col(b) /= n;
  }
}

// Encoder input with each observed entry kept with probability 1 - rate.
Eigen::MatrixXd encode_with_dropout(std::span<const SparseRow* const> rows, int n_tracks, const VaeConfig& cfg,
                                    std::mt19937_64& rng) {
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n_tracks, static_cast<Eigen::Index>(rows.size()));
  std::bernoulli_distribution keep(1.0 - cfg.dropout);
  for (std::size_t b = 0; b < rows.size(); ++b) {
    const auto& row = *rows[b];
    const double total = row.sum();
    for (std::size_t k = 0; k < row.nnz(); ++k) {
      if (cfg.dropout > 0.0 && !keep(rng)) continue;
      x(row.tracks[k], static_cast<Eigen::Index>(b)) = row_value(row, k, cfg.input_mode, total);
    }
  }
  if (cfg.l2_normalize_input) {
    l2_normalize_columns(x);
  } else if (cfg.dropout > 0.0) {
    x /= (1.0 - cfg.dropout);
  }
  return x;
}

Eigen::MatrixXd gather_context(const Eigen::MatrixXd& ctx, std::span<const int> idx) {
  Eigen::MatrixXd out(ctx.cols(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t b = 0; b < idx.size(); ++b) out.col(static_cast<Eigen::Index>(b)) = ctx.row(idx[b]).transpose();
  return out;
}

double validation_ndcg(const GatedVae& model, const ValidationSet& val) {
  const Eigen::MatrixXd* ctx_ptr = nullptr;
  Eigen::MatrixXd ctx;
  if (model.gated()) {
    ctx = val.context->transpose();
    ctx_ptr = &ctx;
  }
  const Eigen::MatrixXd scores = score_users(model, val.inputs, ctx_ptr);
  double total = 0.0;
  int counted = 0;
  for (std::size_t u = 0; u < val.inputs.size(); ++u) {
    if (val.holdout[u].empty()) continue;
    const auto recs = top_k(scores.col(static_cast<Eigen::Index>(u)), val.inputs[u].tracks, model.config.validation_k);
    total += eval::ndcg_at_k(recs, val.holdout[u], model.config.validation_k);
    ++counted;
  }
  return counted ? total / counted : 0.0;
}

}  // namespace

Eigen::MatrixXd encode_inputs(std::span<const SparseRow> rows, int n_tracks, InputMode mode, bool l2_normalize) {
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n_tracks, static_cast<Eigen::Index>(rows.size()));
  for (std::size_t b = 0; b < rows.size(); ++b) {
    const double total = rows[b].sum();
    for (std::size_t k = 0; k < rows[b].nnz(); ++k) {
      x(rows[b].tracks[k], static_cast<Eigen::Index>(b)) = row_value(rows[b], k, mode, total);
    }
  }
  if (l2_normalize) l2_normalize_columns(x);
  return x;
}

Eigen::MatrixXd reconstruction_targets(std::span<const SparseRow> rows, int n_tracks, InputMode mode) {
  return encode_inputs(rows, n_tracks, mode, false);
}

TrainResult train_vae(std::span<const SparseRow> train_rows, const Eigen::MatrixXd* train_context, int n_tracks,
                      const VaeConfig& cfg, const ValidationSet* validation) {
  const int n_context = train_context ? static_cast<int>(train_context->cols()) : 0;
  return train_vae_from(GatedVae::initialize(n_tracks, n_context, cfg), train_rows, train_context, validation);
}

TrainResult train_vae_from(GatedVae model, std::span<const SparseRow> train_rows, const Eigen::MatrixXd* train_context,
                           const ValidationSet* validation) {
  const VaeConfig& cfg = model.config;
  cfg.validate();
  if (train_rows.empty()) throw Error("recsys", "no training users");
  if (model.gated() && (!train_context || train_context->rows() != static_cast<Eigen::Index>(train_rows.size()) ||
                        train_context->cols() != model.n_context())) {
    throw Error("recsys", "training context does not match the model");
  }
  if (validation && model.gated() && !validation->context) {
    throw Error("recsys", "validation set lacks context for a gated model");
  }

  std::mt19937_64 rng(derive_seed(cfg.seed, "vae-train"));
  std::normal_distribution<double> normal(0.0, 1.0);
  const int n_tracks = model.n_tracks();
  const auto n_users = static_cast<int>(train_rows.size());
  const int batches_per_epoch = (n_users + cfg.batch_size - 1) / cfg.batch_size;
  const double total_steps = static_cast<double>(batches_per_epoch) * cfg.epochs;

  VaeWeights m1, m2;
  m1.set_zero_like(model.weights);
  m2.set_zero_like(model.weights);
  TrainResult result;
  auto& rep = result.report;
  GatedVae best = model;
  double best_ndcg = -1.0;

  std::vector<int> order(n_users);
  std::iota(order.begin(), order.end(), 0);
  long long step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0, recon_sum = 0.0, kl_sum = 0.0;
    for (int b0 = 0; b0 < n_users; b0 += cfg.batch_size) {
      const int bsize = std::min(cfg.batch_size, n_users - b0);
      std::span<const int> idx(order.data() + b0, static_cast<std::size_t>(bsize));
      std::vector<const SparseRow*> rows;
      std::vector<SparseRow> target_rows;
      for (int i : idx) {
        rows.push_back(&train_rows[i]);
        target_rows.push_back(train_rows[i]);
      }
      const Eigen::MatrixXd x = encode_with_dropout(rows, n_tracks, cfg, rng);
      const Eigen::MatrixXd t = reconstruction_targets(target_rows, n_tracks, cfg.input_mode);
      Eigen::MatrixXd eps(cfg.latent, bsize);
      for (Eigen::Index k = 0; k < eps.size(); ++k) eps.data()[k] = normal(rng);
      Eigen::MatrixXd ctx;
      if (model.gated()) ctx = gather_context(*train_context, idx);

      const double anneal_steps = cfg.anneal_fraction * total_steps;
      const double beta =
          anneal_steps > 0.0 ? cfg.beta_max * std::min(1.0, static_cast<double>(step) / anneal_steps) : cfg.beta_max;
      const auto lg = loss_and_gradient(model, x, t, model.gated() ? &ctx : nullptr, eps, beta);
      if (!std::isfinite(lg.loss.total)) {
        throw Error("recsys", "non-finite loss at epoch " + std::to_string(epoch) + ", batch starting at " +
                                  std::to_string(b0) + " (size " + std::to_string(bsize) + ", beta " +
                                  std::to_string(beta) + ")");
      }
      loss_sum += lg.loss.total * bsize;
      recon_sum += lg.loss.reconstruction * bsize;
      kl_sum += lg.loss.kl * bsize;

      ++step;
      const double c1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(step));
      const double lr = cfg.learning_rate;
      auto adam = [&](Eigen::MatrixXd& param, const Eigen::MatrixXd& g, Eigen::MatrixXd& mm, Eigen::MatrixXd& vv) {
        mm = cfg.adam_beta1 * mm + (1.0 - cfg.adam_beta1) * g;
        vv = cfg.adam_beta2 * vv + (1.0 - cfg.adam_beta2) * g.cwiseProduct(g);
        param.array() -= lr * (mm.array() / c1) / ((vv.array() / c2).sqrt() + cfg.adam_epsilon);
      };
      adam(model.weights.enc1, lg.grad.enc1, m1.enc1, m2.enc1);
      adam(model.weights.enc_mu, lg.grad.enc_mu, m1.enc_mu, m2.enc_mu);
      adam(model.weights.enc_sigma, lg.grad.enc_sigma, m1.enc_sigma, m2.enc_sigma);
      adam(model.weights.context, lg.grad.context, m1.context, m2.context);
      adam(model.weights.dec1, lg.grad.dec1, m1.dec1, m2.dec1);
      adam(model.weights.dec2, lg.grad.dec2, m1.dec2, m2.dec2);
    }
    rep.epoch_loss.push_back(loss_sum / n_users);
    rep.epoch_reconstruction.push_back(recon_sum / n_users);
    rep.epoch_kl.push_back(kl_sum / n_users);

    if (validation && !validation->inputs.empty()) {
      const double ndcg = validation_ndcg(model, *validation);
      rep.validation_ndcg.push_back(ndcg);
      if (ndcg > best_ndcg) {
        best_ndcg = ndcg;
        best = model;
        rep.best_epoch = epoch;
      }
    } else {
      best = model;
      rep.best_epoch = epoch;
    }
  }
  result.model = std::move(best);
  return result;
}

Eigen::MatrixXd score_users(const GatedVae& model, std::span<const SparseRow> rows, const Eigen::MatrixXd* contexts) {
  const Eigen::MatrixXd x =
      encode_inputs(rows, model.n_tracks(), model.config.input_mode, model.config.l2_normalize_input);
  return forward(model, x, contexts, nullptr).logits;
}

std::vector<int> recommend(const GatedVae& model, const SparseRow& known, const Eigen::VectorXd* context, int k) {
  if (k < 1) throw Error("recsys", "k must be >= 1");
  Eigen::MatrixXd ctx;
  if (model.gated()) {
    if (!context) throw Error("recsys", "gated model needs a context vector");
    ctx = *context;
  }
  const Eigen::MatrixXd scores = score_users(model, std::span<const SparseRow>(&known, 1), model.gated() ? &ctx : nullptr);
  return top_k(scores.col(0), known.tracks, k);
}

void save_vae(const std::filesystem::path& dir, const GatedVae& model) {
  const auto& w = model.weights;
  io::write_matrices_binary(dir / "model.bin", {{"enc1", w.enc1},
                                                {"enc_mu", w.enc_mu},
                                                {"enc_sigma", w.enc_sigma},
                                                {"context", w.context},
                                                {"dec1", w.dec1},
                                                {"dec2", w.dec2}});
  const auto& c = model.config;
  io::KeyValues kv{{"hidden", std::to_string(c.hidden)},
                   {"latent", std::to_string(c.latent)},
                   {"beta_max", io::format_double(c.beta_max)},
                   {"anneal_fraction", io::format_double(c.anneal_fraction)},
                   {"dropout", io::format_double(c.dropout)},
                   {"epochs", std::to_string(c.epochs)},
                   {"batch_size", std::to_string(c.batch_size)},
                   {"learning_rate", io::format_double(c.learning_rate)},
                   {"input_mode", to_string(c.input_mode)},
                   {"l2_normalize_input", c.l2_normalize_input ? "1" : "0"},
                   {"validation_k", std::to_string(c.validation_k)},
                   {"seed", std::to_string(c.seed)}};
  io::write_key_values(dir / "vae.cfg", kv);
}

GatedVae load_vae(const std::filesystem::path& dir) {
  GatedVae m;
  const auto kv = io::read_key_values(dir / "vae.cfg");
  auto get = [&](const std::string& k) {
    auto it = kv.find(k);
    if (it == kv.end()) throw Error("recsys", "missing key " + k + " in vae.cfg");
    return it->second;
  };
  auto& c = m.config;
  c.hidden = std::stoi(get("hidden"));
  c.latent = std::stoi(get("latent"));
  c.beta_max = std::stod(get("beta_max"));
  c.anneal_fraction = std::stod(get("anneal_fraction"));
  c.dropout = std::stod(get("dropout"));
  c.epochs = std::stoi(get("epochs"));
  c.batch_size = std::stoi(get("batch_size"));
  c.learning_rate = std::stod(get("learning_rate"));
  c.input_mode = parse_input_mode(get("input_mode")).value_or(InputMode::kBinary);
  c.l2_normalize_input = get("l2_normalize_input") == "1";
  c.validation_k = std::stoi(get("validation_k"));
  c.seed = std::stoull(get("seed"));
  for (auto& nm : io::read_matrices_binary(dir / "model.bin")) {
    if (nm.name == "enc1") m.weights.enc1 = std::move(nm.value);
    else if (nm.name == "enc_mu") m.weights.enc_mu = std::move(nm.value);
    else if (nm.name == "enc_sigma") m.weights.enc_sigma = std::move(nm.value);
    else if (nm.name == "context") m.weights.context = std::move(nm.value);
    else if (nm.name == "dec1") m.weights.dec1 = std::move(nm.value);
    else if (nm.name == "dec2") m.weights.dec2 = std::move(nm.value);
  }
  if (m.weights.enc1.rows() != c.hidden || m.weights.dec2.rows() != m.weights.enc1.cols() ||
      m.weights.enc_mu.rows() != c.latent || m.weights.context.rows() != c.latent) {
    throw Error("recsys", "inconsistent weight shapes in " + dir.string());
  }
  return m;
}

}  // namespace archrec::recsys
