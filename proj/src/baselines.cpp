#include "archrec/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "archrec/common.hpp"
#include "archrec/context.hpp"
#include "archrec/io.hpp"
#include "archrec/ranking.hpp"

namespace archrec::recsys {

std::string to_string(MpScope scope) {
  switch (scope) {
    case MpScope::kGlobal: return "global";
    case MpScope::kCountry: return "country";
    case MpScope::kCluster: return "cluster";
  }
  return "unknown";
}

std::optional<MpScope> parse_mp_scope(std::string_view name) {
  for (auto s : {MpScope::kGlobal, MpScope::kCountry, MpScope::kCluster}) {
    if (to_string(s) == name) return s;
  }
  return std::nullopt;
}

namespace {

std::vector<int> rank_counts(const std::vector<double>& counts) {
  std::vector<int> idx(counts.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return counts[a] > counts[b]; });
  return idx;
}

}  // namespace

const std::vector<int>& MpModel::ranking_for_country(int country) const {
  if (country < 0 || country >= static_cast<int>(group_of_country.size())) return global;
  const auto& r = ranked[group_of_country[country]];
  return r.empty() ? global : r;
}

std::vector<int> MpModel::recommend(int country, std::span<const int> known_sorted, int k) const {
  std::vector<int> out;
  for (int t : ranking_for_country(country)) {
    if (static_cast<int>(out.size()) >= k) break;
    if (!std::binary_search(known_sorted.begin(), known_sorted.end(), t)) out.push_back(t);
  }
  return out;
}

MpModel mp_fit(std::span<const SparseRow> train_rows, std::span<const int> train_country, int n_tracks,
               int n_countries, MpScope scope, const std::vector<int>& country_labels) {
  MpModel m;
  m.scope = scope;
  context::GroupMap groups;
  switch (scope) {
    case MpScope::kGlobal:
      groups.n_groups = 1;
      groups.group_of_country.assign(n_countries, 0);
      break;
    case MpScope::kCountry: groups = context::country_groups(n_countries); break;
    case MpScope::kCluster:
      if (static_cast<int>(country_labels.size()) != n_countries) {
        throw Error("recsys", "MP cluster needs a label for every country");
      }
      groups = context::cluster_groups(country_labels);
      break;
  }
  m.group_of_country = groups.group_of_country;
  std::vector<std::vector<double>> counts(groups.n_groups, std::vector<double>(n_tracks, 0.0));
  std::vector<double> global(n_tracks, 0.0);
  std::vector<bool> seen(groups.n_groups, false);
  for (std::size_t u = 0; u < train_rows.size(); ++u) {
    const int g = groups.group_of_country[train_country[u]];
    seen[g] = true;
    for (std::size_t k = 0; k < train_rows[u].nnz(); ++k) {
      counts[g][train_rows[u].tracks[k]] += train_rows[u].values[k];
      global[train_rows[u].tracks[k]] += train_rows[u].values[k];
    }
  }
  m.global = rank_counts(global);
  m.ranked.resize(groups.n_groups);
  for (int g = 0; g < groups.n_groups; ++g) {
    if (seen[g]) m.ranked[g] = rank_counts(counts[g]);
  }
  return m;
}

Eigen::VectorXd ImfModel::scores(int user) const {
  if (user < 0 || user >= user_factors.rows()) return popularity;
  return item_factors * user_factors.row(user).transpose() + item_bias;
}

std::vector<int> ImfModel::recommend(int user, std::span<const int> known_sorted, int k) const {
  return top_k(scores(user), known_sorted, k);
}

ImfModel imf_train(std::span<const SparseRow> rows, int n_tracks, const ImfConfig& cfg) {
  if (cfg.factors < 1 || cfg.epochs < 0) throw Error("recsys", "invalid IMF configuration");
  std::mt19937_64 rng(derive_seed(cfg.seed, "imf"));
  std::normal_distribution<double> init(0.0, cfg.init_stddev);
  const auto n_users = static_cast<Eigen::Index>(rows.size());
  ImfModel m;
  m.user_factors.resize(n_users, cfg.factors);
  m.item_factors.resize(n_tracks, cfg.factors);
  for (Eigen::Index r = 0; r < n_users; ++r) {
    for (int f = 0; f < cfg.factors; ++f) m.user_factors(r, f) = init(rng);
  }
  for (Eigen::Index r = 0; r < n_tracks; ++r) {
    for (int f = 0; f < cfg.factors; ++f) m.item_factors(r, f) = init(rng);
  }
  m.item_bias = Eigen::VectorXd::Zero(n_tracks);
  m.popularity = Eigen::VectorXd::Zero(n_tracks);

  std::vector<std::pair<int, int>> positives;
  for (Eigen::Index u = 0; u < n_users; ++u) {
    for (int t : rows[u].tracks) {
      positives.emplace_back(static_cast<int>(u), t);
      m.popularity(t) += 1.0;
    }
  }
  std::uniform_int_distribution<int> any_track(0, n_tracks - 1);

  auto step = [&](int u, int i, double y) {
    const double score = m.user_factors.row(u).dot(m.item_factors.row(i)) + m.item_bias(i);
    double g = 0.0;  // dLoss/dscore
    if (cfg.loss == ImfLoss::kSquared) {
      g = 2.0 * (score - y);
    } else {
      g = -y / (1.0 + std::exp(y * score));
    }
    const Eigen::RowVectorXd pu = m.user_factors.row(u);
    m.user_factors.row(u) -= cfg.learning_rate * (g * m.item_factors.row(i) + cfg.l2 * pu);
    m.item_factors.row(i) -= cfg.learning_rate * (g * pu + cfg.l2 * m.item_factors.row(i));
    m.item_bias(i) -= cfg.learning_rate * g;
  };

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(positives.begin(), positives.end(), rng);
    for (const auto& [u, i] : positives) {
      step(u, i, 1.0);
      int j = any_track(rng);
      for (int tries = 0; tries < 10 && rows[u].contains(j); ++tries) j = any_track(rng);
      if (!rows[u].contains(j)) step(u, j, -1.0);
    }
    if (!m.user_factors.allFinite() || !m.item_factors.allFinite()) {
      throw Error("recsys", "IMF diverged at epoch " + std::to_string(epoch));
    }
  }
  return m;
}

void save_mp(const std::filesystem::path& dir, const MpModel& m) {
  std::ostringstream out;
  out << "scope " << to_string(m.scope) << '\n';
  out << "countries";
  for (int g : m.group_of_country) out << ' ' << g;
  out << '\n';
  auto put = [&](const std::vector<int>& r) {
    out << r.size();
    for (int t : r) out << ' ' << t;
    out << '\n';
  };
  put(m.global);
  out << m.ranked.size() << '\n';
  for (const auto& r : m.ranked) put(r);
  io::write_text(dir / "mp.txt", out.str());
}

MpModel load_mp(const std::filesystem::path& dir) {
  std::istringstream in(io::read_text(dir / "mp.txt"));
  MpModel m;
  std::string tag, scope;
  in >> tag >> scope;
  m.scope = parse_mp_scope(scope).value_or(MpScope::kGlobal);
  std::string line;
  std::getline(in, line);
  std::getline(in, line);
  {
    std::istringstream ls(line);
    ls >> tag;
    int g;
    while (ls >> g) m.group_of_country.push_back(g);
  }
  auto get = [&](std::vector<int>& r) {
    std::size_t n = 0;
    in >> n;
    r.resize(n);
    for (auto& t : r) in >> t;
  };
  get(m.global);
  std::size_t groups = 0;
  in >> groups;
  m.ranked.resize(groups);
  for (auto& r : m.ranked) get(r);
  if (!in) throw Error("recsys", "malformed mp.txt in " + dir.string());
  return m;
}

void save_imf(const std::filesystem::path& dir, const ImfModel& m) {
  io::write_matrices_binary(dir / "model.bin", {{"user_factors", m.user_factors},
                                                {"item_factors", m.item_factors},
                                                {"item_bias", m.item_bias},
                                                {"popularity", m.popularity}});
}

ImfModel load_imf(const std::filesystem::path& dir) {
  ImfModel m;
  for (auto& nm : io::read_matrices_binary(dir / "model.bin")) {
    if (nm.name == "user_factors") m.user_factors = std::move(nm.value);
    else if (nm.name == "item_factors") m.item_factors = std::move(nm.value);
    else if (nm.name == "item_bias") m.item_bias = nm.value.col(0);
    else if (nm.name == "popularity") m.popularity = nm.value.col(0);
  }
  return m;
}

}  // namespace archrec::recsys
