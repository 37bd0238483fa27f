#include "archrec/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "archrec/common.hpp"
#include "archrec/io.hpp"
#include "archrec/metrics.hpp"
#include "archrec/ranking.hpp"

namespace archrec::eval {

namespace {

struct KindName {
  ModelKind kind;
  const char* name;
};

constexpr KindName kNames[] = {
    {ModelKind::kMpGlobal, "mp-global"},
    {ModelKind::kMpCountry, "mp-country"},
    {ModelKind::kMpCluster, "mp-cluster"},
    {ModelKind::kImf, "imf"},
    {ModelKind::kVae, "vae"},
    {ModelKind::kVaeCountryId, "vae-country-id"},
    {ModelKind::kVaeClusterId, "vae-cluster-id"},
    {ModelKind::kVaeClusterDist, "vae-cluster-dist"},
    {ModelKind::kVaeCountryDist, "vae-country-dist"},
};

// All rows whose history is known at training time: training users in
// full, validation and test users by their input part.
UserMatrix known_rows(const PreparedData& d, std::vector<int>* countries) {
  UserMatrix rows;
  rows.reserve(d.train_rows.size() + d.val_inputs.size() + d.test_inputs.size());
  rows.insert(rows.end(), d.train_rows.begin(), d.train_rows.end());
  rows.insert(rows.end(), d.val_inputs.begin(), d.val_inputs.end());
  rows.insert(rows.end(), d.test_inputs.begin(), d.test_inputs.end());
  if (countries) {
    countries->clear();
    countries->insert(countries->end(), d.train_country.begin(), d.train_country.end());
    countries->insert(countries->end(), d.val_country.begin(), d.val_country.end());
    countries->insert(countries->end(), d.test_country.begin(), d.test_country.end());
  }
  return rows;
}

recsys::MpScope scope_of(ModelKind k) {
  switch (k) {
    case ModelKind::kMpGlobal: return recsys::MpScope::kGlobal;
    case ModelKind::kMpCountry: return recsys::MpScope::kCountry;
    default: return recsys::MpScope::kCluster;
  }
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

std::string model_name(ModelKind kind) {
  for (const auto& kn : kNames) {
    if (kn.kind == kind) return kn.name;
  }
  return "unknown";
}

std::optional<ModelKind> parse_model_name(std::string_view name) {
  for (const auto& kn : kNames) {
    if (name == kn.name) return kn.kind;
  }
  return std::nullopt;
}

std::optional<context::ContextKind> context_of(ModelKind kind) {
  switch (kind) {
    case ModelKind::kVaeCountryId: return context::ContextKind::kCountryOneHot;
    case ModelKind::kVaeClusterId: return context::ContextKind::kClusterOneHot;
    case ModelKind::kVaeClusterDist: return context::ContextKind::kClusterDist;
    case ModelKind::kVaeCountryDist: return context::ContextKind::kCountryDist;
    default: return std::nullopt;
  }
}

const std::vector<ModelKind>& all_model_kinds() {
  static const std::vector<ModelKind> kinds = [] {
    std::vector<ModelKind> v;
    for (const auto& kn : kNames) v.push_back(kn.kind);
    return v;
  }();
  return kinds;
}

std::string metric_name(Metric m) {
  switch (m) {
    case Metric::kPrecision: return "precision";
    case Metric::kRecall: return "recall";
    case Metric::kNdcg: return "ndcg";
  }
  return "unknown";
}

PreparedData prepare(const ingest::Dataset& ds, const std::vector<int>& country_labels, const Splits& splits) {
  if (static_cast<int>(country_labels.size()) != ds.n_countries()) {
    throw Error("eval", "cluster labels cover " + std::to_string(country_labels.size()) + " countries, dataset has " +
                            std::to_string(ds.n_countries()));
  }
  PreparedData d;
  d.n_tracks = ds.n_tracks();
  d.n_countries = ds.n_countries();
  d.country_labels = country_labels;
  for (int u : splits.train) {
    d.train_rows.push_back(counts_from_events(ds.user_events(u)));
    d.train_country.push_back(ds.user_country(u));
  }
  for (const auto& h : splits.validation) {
    d.val_inputs.push_back(h.input);
    d.val_holdout.push_back(h.scored ? h.holdout : std::vector<int>{});
    d.val_country.push_back(ds.user_country(h.user));
  }
  for (const auto& h : splits.test) {
    d.test_inputs.push_back(h.input);
    d.test_holdout.push_back(h.holdout);
    d.test_country.push_back(ds.user_country(h.user));
    d.test_scored.push_back(h.scored);
  }
  return d;
}

ContextSet make_context(const PreparedData& data, context::ContextKind kind, context::UserNormalization norm,
                        bool standardize_distances) {
  const auto groups = context::groups_for(kind, data.country_labels);
  std::optional<context::Centroids> centroids;
  if (kind == context::ContextKind::kClusterDist || kind == context::ContextKind::kCountryDist) {
    std::vector<int> countries;
    const auto rows = known_rows(data, &countries);
    centroids = context::compute_centroids(rows, countries, groups, data.n_tracks,
                                           kind == context::ContextKind::kClusterDist);
  }
  const auto* c = centroids ? &*centroids : nullptr;
  ContextSet out;
  out.train = context::build_context(kind, data.train_rows, data.train_country, groups, c, data.n_tracks, norm).vectors;
  out.val = context::build_context(kind, data.val_inputs, data.val_country, groups, c, data.n_tracks, norm).vectors;
  out.test = context::build_context(kind, data.test_inputs, data.test_country, groups, c, data.n_tracks, norm).vectors;
  if (standardize_distances && centroids && out.train.rows() > 1) {
    const Eigen::RowVectorXd mean = out.train.colwise().mean();
    Eigen::RowVectorXd sd = ((out.train.rowwise() - mean).array().square().colwise().sum() /
                             static_cast<double>(out.train.rows() - 1))
                                .sqrt()
                                .matrix();
    for (Eigen::Index j = 0; j < sd.size(); ++j) {
      if (!(sd(j) > 0.0)) sd(j) = 1.0;
    }
    for (auto* m : {&out.train, &out.val, &out.test}) {
      *m = ((m->rowwise() - mean).array().rowwise() / sd.array()).matrix();
    }
  }
  return out;
}

TrainedModel train_model(ModelKind kind, const PreparedData& data, const ContextSet* contexts,
                         const ExperimentConfig& cfg) {
  TrainedModel m;
  m.kind = kind;
  switch (kind) {
    case ModelKind::kMpGlobal:
    case ModelKind::kMpCountry:
    case ModelKind::kMpCluster: {
      std::vector<int> countries;
      const auto rows = known_rows(data, &countries);
      m.mp = recsys::mp_fit(rows, countries, data.n_tracks, data.n_countries, scope_of(kind), data.country_labels);
      break;
    }
    case ModelKind::kImf: {
      const auto rows = known_rows(data, nullptr);
      m.imf = recsys::imf_train(rows, data.n_tracks, cfg.imf);
      break;
    }
    default: {
      const bool gated = context_of(kind).has_value();
      if (gated && !contexts) throw Error("recsys", model_name(kind) + " needs context vectors");
      recsys::ValidationSet val;
      val.inputs = data.val_inputs;
      val.holdout = data.val_holdout;
      val.context = gated ? &contexts->val : nullptr;
      auto res = recsys::train_vae(data.train_rows, gated ? &contexts->train : nullptr, data.n_tracks, cfg.vae,
                                   data.val_inputs.empty() ? nullptr : &val);
      m.vae = std::move(res.model);
      m.report = std::move(res.report);
      break;
    }
  }
  return m;
}

std::vector<std::vector<int>> recommend_test_users(const TrainedModel& model, const PreparedData& data,
                                                   const ContextSet* contexts, int k) {
  const std::size_t n = data.test_inputs.size();
  std::vector<std::vector<int>> out(n);
  if (model.mp) {
    parallel_for(n, [&](std::size_t i) {
      out[i] = model.mp->recommend(data.test_country[i], data.test_inputs[i].tracks, k);
    });
  } else if (model.imf) {
    const int offset = static_cast<int>(data.train_rows.size() + data.val_inputs.size());
    parallel_for(n, [&](std::size_t i) {
      out[i] = model.imf->recommend(offset + static_cast<int>(i), data.test_inputs[i].tracks, k);
    });
  } else if (model.vae) {
    const bool gated = model.vae->gated();
    if (gated && !contexts) throw Error("recsys", "gated model needs test context vectors");
    constexpr std::size_t kBatch = 256;
    for (std::size_t b = 0; b < n; b += kBatch) {
      const std::size_t e = std::min(n, b + kBatch);
      std::span<const SparseRow> rows(data.test_inputs.data() + b, e - b);
      Eigen::MatrixXd ctx;
      if (gated) ctx = contexts->test.middleRows(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(e - b)).transpose();
      const Eigen::MatrixXd scores = recsys::score_users(*model.vae, rows, gated ? &ctx : nullptr);
      parallel_for(e - b, [&](std::size_t j) {
        out[b + j] = recsys::top_k(scores.col(static_cast<Eigen::Index>(j)), rows[j].tracks, k);
      });
    }
  } else {
    throw Error("eval", "model has no trained parameters");
  }
  return out;
}

double MetricTable::mean(Metric m, std::size_t k_index) const {
  return mean_of(values[static_cast<int>(m)][k_index]);
}

MetricTable evaluate_lists(const std::string& name, const std::vector<std::vector<int>>& recs,
                           const PreparedData& data, const std::vector<int>& ks) {
  if (recs.size() != data.test_inputs.size()) throw Error("eval", "one recommendation list per test user expected");
  std::vector<std::size_t> scored;
  for (std::size_t i = 0; i < recs.size(); ++i) {
    if (data.test_scored[i]) scored.push_back(i);
  }
  MetricTable t;
  t.model = name;
  t.ks = ks;
  for (auto& per_metric : t.values) per_metric.assign(ks.size(), std::vector<double>(scored.size(), 0.0));
  parallel_for(scored.size(), [&](std::size_t j) {
    const std::size_t u = scored[j];
    for (std::size_t ki = 0; ki < ks.size(); ++ki) {
      t.values[0][ki][j] = precision_at_k(recs[u], data.test_holdout[u], ks[ki]);
      t.values[1][ki][j] = recall_at_k(recs[u], data.test_holdout[u], ks[ki]);
      t.values[2][ki][j] = ndcg_at_k(recs[u], data.test_holdout[u], ks[ki]);
    }
  });
  return t;
}

std::vector<ComparisonRow> compare(const std::vector<MetricTable>& tables, const std::string& baseline,
                                   Alternative alt) {
  const MetricTable* base = nullptr;
  for (const auto& t : tables) {
    if (t.model == baseline) base = &t;
  }
  std::vector<ComparisonRow> rows;
  for (const auto& t : tables) {
    for (int m = 0; m < 3; ++m) {
      for (std::size_t ki = 0; ki < t.ks.size(); ++ki) {
        ComparisonRow r;
        r.model = t.model;
        r.metric = static_cast<Metric>(m);
        r.k = t.ks[ki];
        r.mean = t.mean(r.metric, ki);
        r.p_vs_baseline = std::numeric_limits<double>::quiet_NaN();
        if (base && &t != base) {
          auto bk = std::find(base->ks.begin(), base->ks.end(), r.k);
          if (bk != base->ks.end()) {
            const auto& a = t.values[m][ki];
            const auto& b = base->values[m][static_cast<std::size_t>(bk - base->ks.begin())];
            if (a.size() == b.size()) r.p_vs_baseline = wilcoxon_signed_rank(a, b, alt).p_value;
          }
        }
        rows.push_back(r);
      }
    }
  }
  return rows;
}

std::map<std::string, FriedmanResult> friedman_all(const std::vector<MetricTable>& tables) {
  std::map<std::string, FriedmanResult> out;
  if (tables.size() < 2) return out;
  const auto& ks = tables.front().ks;
  for (int m = 0; m < 3; ++m) {
    for (std::size_t ki = 0; ki < ks.size(); ++ki) {
      const std::size_t n = tables.front().values[m][ki].size();
      if (n == 0) continue;
      Eigen::MatrixXd v(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(tables.size()));
      for (std::size_t j = 0; j < tables.size(); ++j) {
        for (std::size_t i = 0; i < n; ++i) v(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = tables[j].values[m][ki][i];
      }
      out[metric_name(static_cast<Metric>(m)) + "@" + std::to_string(ks[ki])] = friedman_test(v);
    }
  }
  return out;
}

ExperimentResult run_experiment(const PreparedData& data, const ExperimentConfig& cfg) {
  if (cfg.ks.empty()) throw Error("eval", "no cutoffs given");
  const int kmax = *std::max_element(cfg.ks.begin(), cfg.ks.end());
  ExperimentResult res;
  std::map<context::ContextKind, ContextSet> contexts;
  for (auto kind : cfg.models) {
    const ContextSet* ctx = nullptr;
    if (auto ck = context_of(kind)) {
      auto it = contexts.find(*ck);
      if (it == contexts.end()) it = contexts.emplace(*ck, make_context(data, *ck, cfg.context_norm, cfg.standardize_distances)).first;
      ctx = &it->second;
    }
    const auto model = train_model(kind, data, ctx, cfg);
    const auto recs = recommend_test_users(model, data, ctx, kmax);
    res.tables.push_back(evaluate_lists(model_name(kind), recs, data, cfg.ks));
    if (model.vae) res.reports[model_name(kind)] = model.report;
  }
  res.rows = compare(res.tables, cfg.baseline, cfg.alternative);
  res.friedman = friedman_all(res.tables);
  return res;
}

std::string results_csv(const std::vector<ComparisonRow>& rows) {
  std::ostringstream os;
  os << "model,metric,K,mean,p_vs_baseline\n";
  for (const auto& r : rows) {
    os << r.model << ',' << metric_name(r.metric) << ',' << r.k << ',' << io::format_double(r.mean) << ',';
    if (!std::isnan(r.p_vs_baseline)) os << io::format_double(r.p_vs_baseline);
    os << '\n';
  }
  return os.str();
}

ingest::Dataset restrict_tracks(const ingest::Dataset& ds, const std::vector<int>& tracks) {
  std::vector<char> keep(static_cast<std::size_t>(ds.n_tracks()), 0);
  for (int t : tracks) {
    if (t < 0 || t >= ds.n_tracks()) throw Error("eval", "track index out of range: " + std::to_string(t));
    keep[static_cast<std::size_t>(t)] = 1;
  }
  std::vector<ingest::ListeningEvent> events;
  for (const auto& e : ds.events()) {
    if (keep[static_cast<std::size_t>(*ds.track_index(e.track_id))]) events.push_back(e);
  }
  if (events.empty()) throw Error("eval", "track subset keeps no events");
  return ingest::Dataset::build(std::move(events), ds.users());
}

std::vector<int> labels_for(const ingest::Dataset& ds, const std::map<std::string, int>& by_code) {
  std::vector<int> labels(static_cast<std::size_t>(ds.n_countries()), -1);
  for (int c = 0; c < ds.n_countries(); ++c) {
    auto it = by_code.find(ds.country_code(c));
    if (it != by_code.end()) labels[static_cast<std::size_t>(c)] = it->second;
  }
  return labels;
}

SampledSubsetResult sampled_subset_experiment(std::span<const ingest::ListeningEvent> events,
                                              const ingest::UserTable& users,
                                              const std::map<std::string, int>& country_labels,
                                              const SampledSubsetConfig& cfg) {
  if (cfg.n_samples < 1) throw Error("eval", "n_samples must be >= 1");
  const auto universe = ingest::apply_filters(events, users, cfg.lowered_filter);
  SampledSubsetResult out;
  out.universe_size = universe.n_tracks();
  if (cfg.subset_size < 1 || cfg.subset_size > universe.n_tracks()) {
    throw Error("eval", "subset size " + std::to_string(cfg.subset_size) + " outside the track universe of " +
                            std::to_string(universe.n_tracks()));
  }
  for (int r = 0; r < cfg.n_samples; ++r) {
    std::vector<int> tracks(static_cast<std::size_t>(universe.n_tracks()));
    std::iota(tracks.begin(), tracks.end(), 0);
    if (cfg.subset_size < universe.n_tracks()) {
      std::mt19937_64 rng(derive_seed(cfg.seed, "subset-" + std::to_string(r)));
      std::shuffle(tracks.begin(), tracks.end(), rng);
      tracks.resize(static_cast<std::size_t>(cfg.subset_size));
      std::sort(tracks.begin(), tracks.end());
    }
    const auto sub = restrict_tracks(universe, tracks);
    const auto splits = make_splits(sub, cfg.split);
    const auto data = prepare(sub, labels_for(sub, country_labels), splits);
    out.runs.push_back(run_experiment(data, cfg.experiment));
  }
  out.averaged = out.runs.front().rows;
  for (std::size_t i = 0; i < out.averaged.size(); ++i) {
    double s = 0.0;
    for (const auto& run : out.runs) s += run.rows[i].mean;
    out.averaged[i].mean = s / static_cast<double>(out.runs.size());
    out.averaged[i].p_vs_baseline = std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

}  // namespace archrec::eval
