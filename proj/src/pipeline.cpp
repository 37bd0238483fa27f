#include "archrec/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

#include "archrec/archetypes.hpp"
#include "archrec/baselines.hpp"
#include "archrec/common.hpp"
#include "archrec/countrymap.hpp"
#include "archrec/ranking.hpp"
#include "archrec/svg.hpp"
#include "archrec/vae.hpp"

namespace archrec::pipeline {

namespace {

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

long long to_ll(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const long long x = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw Error("config", "key " + key + ": expected an integer, got '" + v + "'");
  }
}

double to_d(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw Error("config", "key " + key + ": expected a number, got '" + v + "'");
  }
}

bool to_b(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw Error("config", "key " + key + ": expected true/false, got '" + v + "'");
}

std::vector<int> parse_int_list(const std::string& key, const std::string& v) {
  std::vector<int> out;
  for (const auto& part : io::split(v, ',')) {
    const auto t = io::trim(part);
    if (!t.empty()) out.push_back(static_cast<int>(to_ll(key, t)));
  }
  return out;
}

std::string join_ints(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

std::string alt_name(eval::Alternative a) {
  switch (a) {
    case eval::Alternative::kGreater: return "greater";
    case eval::Alternative::kLess: return "less";
    default: return "two-sided";
  }
}

eval::Alternative parse_alt(const std::string& key, const std::string& v) {
  if (v == "two-sided") return eval::Alternative::kTwoSided;
  if (v == "greater") return eval::Alternative::kGreater;
  if (v == "less") return eval::Alternative::kLess;
  throw Error("config", "key " + key + ": unknown alternative '" + v + "'");
}

struct Binding {
  std::string key;
  std::function<void(const std::string&)> set;
  std::function<std::string()> get;
};

std::vector<Binding> bindings(PipelineConfig& c) {
  std::vector<Binding> b;
  auto add_int = [&](const std::string& k, auto& field) {
    using T = std::remove_reference_t<decltype(field)>;
    b.push_back({k, [&field, k](const std::string& v) { field = static_cast<T>(to_ll(k, v)); },
                 [&field] { return std::to_string(field); }});
  };
  auto add_dbl = [&](const std::string& k, double& field) {
    b.push_back({k, [&field, k](const std::string& v) { field = to_d(k, v); },
                 [&field] { return io::format_double(field); }});
  };
  auto add_bool = [&](const std::string& k, bool& field) {
    b.push_back({k, [&field, k](const std::string& v) { field = to_b(k, v); },
                 [&field] { return std::string(field ? "true" : "false"); }});
  };
  auto add_path = [&](const std::string& k, fs::path& field) {
    b.push_back({k, [&field](const std::string& v) { field = v; }, [&field] { return field.string(); }});
  };

  add_path("root", c.root);
  add_int("seed", c.seed);
  add_int("threads", c.threads);
  add_bool("synthetic", c.synthetic);

  add_int("synth.countries", c.synth.n_countries);
  add_int("synth.users_per_country", c.synth.users_per_country);
  add_int("synth.tracks", c.synth.n_tracks);
  add_int("synth.archetypes", c.synth.archetype_count);
  add_dbl("synth.skew", c.synth.skew);
  add_int("synth.min_events", c.synth.min_events);
  add_int("synth.max_events", c.synth.max_events);
  add_dbl("synth.zipf_exponent", c.synth.zipf_exponent);
  add_dbl("synth.country_specificity", c.synth.country_specificity);
  add_dbl("synth.mainstream_share", c.synth.mainstream_share);
  add_bool("synth.log_uniform_events", c.synth.log_uniform_events);
  add_int("synth.global_hits", c.synth.global_hits);
  add_dbl("synth.personal_taste", c.synth.personal_taste);
  add_int("synth.subgenres", c.synth.subgenres);
  add_dbl("synth.taste_concentration", c.synth.taste_concentration);

  add_path("ingest.events", c.events_path);
  add_path("ingest.users", c.users_path);
  add_int("ingest.min_track_plays", c.filter.min_track_playcount);
  add_int("ingest.min_country_les", c.filter.min_country_les);
  add_int("ingest.min_country_users", c.filter.min_country_users);
  add_bool("ingest.fixpoint", c.filter.iterate_to_fixpoint);

  add_int("features.pca_dims", c.pca_dims);

  add_dbl("embed.perplexity", c.tsne.perplexity);
  add_int("embed.iters", c.tsne.iterations);
  add_dbl("embed.learning_rate", c.tsne.learning_rate);
  add_dbl("embed.early_exaggeration", c.tsne.early_exaggeration);
  add_int("embed.exaggeration_iters", c.tsne.exaggeration_iterations);

  add_int("cluster.min_size", c.optics.min_cluster_size);
  add_dbl("cluster.xi", c.optics.xi);
  b.push_back({"cluster.input",
               [&c](const std::string& v) {
                 if (v == "embedding") c.cluster_source = ClusterSource::kEmbedding;
                 else if (v == "pca") c.cluster_source = ClusterSource::kPca;
                 else throw Error("config", "cluster.input must be embedding or pca");
               },
               [&c] { return to_string(c.cluster_source); }});

  add_dbl("archetypes.idf_threshold", c.idf_threshold);
  add_int("archetypes.top_k", c.top_k);
  add_path("archetypes.tags", c.tags_path);

  add_int("split.n_val", c.split.n_val_users);
  add_int("split.n_test", c.split.n_test_users);
  add_dbl("split.holdout_fraction", c.split.holdout_fraction);
  add_int("split.min_events", c.split.min_events);

  b.push_back({"context.norm",
               [&c](const std::string& v) {
                 if (v == "sum") c.context_norm = context::UserNormalization::kSum;
                 else if (v == "l2") c.context_norm = context::UserNormalization::kL2;
                 else throw Error("config", "context.norm must be sum or l2");
               },
               [&c] { return std::string(c.context_norm == context::UserNormalization::kSum ? "sum" : "l2"); }});
  add_bool("context.standardize", c.standardize_distances);

  b.push_back({"train.models",
               [&c](const std::string& v) {
                 c.models.clear();
                 for (const auto& part : io::split(v, ',')) {
                   const auto name = io::trim(part);
                   if (name.empty()) continue;
                   auto k = eval::parse_model_name(name);
                   if (!k) throw Error("config", "unknown model '" + name + "'");
                   c.models.push_back(*k);
                 }
               },
               [&c] {
                 std::string s;
                 for (std::size_t i = 0; i < c.models.size(); ++i) s += (i ? "," : "") + eval::model_name(c.models[i]);
                 return s;
               }});
  add_int("train.hidden", c.vae.hidden);
  add_int("train.latent", c.vae.latent);
  add_int("train.epochs", c.vae.epochs);
  add_int("train.batch_size", c.vae.batch_size);
  add_dbl("train.learning_rate", c.vae.learning_rate);
  add_dbl("train.beta", c.vae.beta_max);
  add_dbl("train.anneal_fraction", c.vae.anneal_fraction);
  add_dbl("train.dropout", c.vae.dropout);
  b.push_back({"train.input",
               [&c](const std::string& v) {
                 auto m = recsys::parse_input_mode(v);
                 if (!m) throw Error("config", "unknown train.input '" + v + "'");
                 c.vae.input_mode = *m;
               },
               [&c] { return recsys::to_string(c.vae.input_mode); }});
  add_bool("train.l2_normalize", c.vae.l2_normalize_input);
  add_int("train.validation_k", c.vae.validation_k);

  add_int("imf.factors", c.imf.factors);
  add_int("imf.epochs", c.imf.epochs);
  add_dbl("imf.learning_rate", c.imf.learning_rate);
  add_dbl("imf.l2", c.imf.l2);
  b.push_back({"imf.loss",
               [&c](const std::string& v) {
                 if (v == "squared") c.imf.loss = recsys::ImfLoss::kSquared;
                 else if (v == "logistic") c.imf.loss = recsys::ImfLoss::kLogistic;
                 else throw Error("config", "imf.loss must be squared or logistic");
               },
               [&c] { return std::string(c.imf.loss == recsys::ImfLoss::kSquared ? "squared" : "logistic"); }});

  b.push_back({"evaluate.ks", [&c](const std::string& v) { c.ks = parse_int_list("evaluate.ks", v); },
               [&c] { return join_ints(c.ks); }});
  b.push_back({"evaluate.baseline", [&c](const std::string& v) { c.baseline = v; }, [&c] { return c.baseline; }});
  b.push_back({"evaluate.alternative", [&c](const std::string& v) { c.alternative = parse_alt("evaluate.alternative", v); },
               [&c] { return alt_name(c.alternative); }});
  return b;
}

fs::path manifest_path(const fs::path& dir) { return dir / "manifest.txt"; }

std::uint64_t input_hash(const fs::path& p) {
  if (fs::is_directory(p)) return io::hash_file(manifest_path(p));
  return io::hash_file(p);
}

io::KeyValues planned_keys(const Manifest& m) {
  io::KeyValues kv;
  kv["stage"] = m.stage;
  for (const auto& [k, v] : m.params) kv["param." + k] = v;
  for (const auto& [name, path] : m.inputs) {
    kv["input." + name] = path.string();
    kv["input." + name + ".hash"] = hex(input_hash(path));
  }
  return kv;
}

// Wraps a stage body: skip when current, tag foreign exceptions with the
// stage name, write the manifest on success.
bool run_stage(const fs::path& dir, const Manifest& planned, const StageOptions& opt,
               const std::function<void()>& body) {
  if (!opt.force && up_to_date(dir, planned)) return false;
  try {
    fs::create_directories(dir);
    body();
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(planned.stage, e.what());
  }
  write_manifest(dir, planned);
  return true;
}

void require_dir(const std::string& stage, const fs::path& dir, const std::string& what) {
  if (!fs::exists(manifest_path(dir))) {
    throw Error(stage, what + " directory " + dir.string() + " has no manifest (run the producing stage first)");
  }
}

fs::path dataset_of(const std::string& stage, const fs::path& dir) {
  if (fs::exists(dir / "events.tsv") && fs::exists(dir / "users.tsv")) return dir;
  auto p = resolve_input(dir, "dataset");
  if (!p) throw Error(stage, "cannot locate the dataset behind " + dir.string());
  return *p;
}

std::vector<std::string> read_codes(const fs::path& path) {
  std::vector<std::string> codes;
  for (const auto& l : io::read_lines(path)) {
    const auto t = io::trim(l);
    if (!t.empty()) codes.push_back(t);
  }
  return codes;
}

std::map<std::string, int> read_cluster_labels(const fs::path& cluster_dir) {
  std::map<std::string, int> out;
  for (const auto& l : io::read_lines(cluster_dir / "clusters.tsv")) {
    if (l.empty() || l[0] == '#') continue;
    const auto f = io::split(l, '\t');
    if (f.size() != 2) throw Error("cluster", "malformed clusters.tsv line: " + l);
    out[f[0]] = static_cast<int>(to_ll("clusters.tsv", f[1]));
  }
  return out;
}

void write_report(const fs::path& path, const recsys::TrainReport& r) {
  std::ostringstream os;
  os << "epoch\tloss\treconstruction\tkl\tvalidation_ndcg\n";
  for (std::size_t e = 0; e < r.epoch_loss.size(); ++e) {
    os << e << '\t' << io::format_double(r.epoch_loss[e]) << '\t' << io::format_double(r.epoch_reconstruction[e])
       << '\t' << io::format_double(r.epoch_kl[e]) << '\t'
       << (e < r.validation_ndcg.size() ? io::format_double(r.validation_ndcg[e]) : std::string("")) << '\n';
  }
  os << "# best_epoch " << r.best_epoch << '\n';
  io::write_text(path, os.str());
}

eval::ContextSet load_context(const fs::path& dir) {
  eval::ContextSet c;
  int found = 0;
  for (auto& nm : io::read_matrices_binary(dir / "context.bin")) {
    if (nm.name == "train") c.train = std::move(nm.value), ++found;
    else if (nm.name == "val") c.val = std::move(nm.value), ++found;
    else if (nm.name == "test") c.test = std::move(nm.value), ++found;
  }
  if (found != 3) throw Error("context", "context.bin in " + dir.string() + " lacks train/val/test blocks");
  return c;
}

struct LoadedModel {
  eval::TrainedModel model;
  std::optional<eval::ContextSet> context;
  fs::path splits_dir;
};

LoadedModel load_model(const fs::path& dir) {
  const auto kv = io::read_key_values(dir / "model.txt");
  auto it = kv.find("model");
  if (it == kv.end()) throw Error("recsys", dir.string() + "/model.txt names no model");
  auto kind = eval::parse_model_name(it->second);
  if (!kind) throw Error("recsys", "unknown model '" + it->second + "' in " + dir.string());
  LoadedModel lm;
  lm.model.kind = *kind;
  const auto man = read_manifest(dir);
  auto sp = man.find("input.splits");
  if (sp == man.end()) throw Error("recsys", "model manifest in " + dir.string() + " records no splits");
  lm.splits_dir = sp->second;
  switch (*kind) {
    case eval::ModelKind::kMpGlobal:
    case eval::ModelKind::kMpCountry:
    case eval::ModelKind::kMpCluster: lm.model.mp = recsys::load_mp(dir); break;
    case eval::ModelKind::kImf: lm.model.imf = recsys::load_imf(dir); break;
    default: {
      lm.model.vae = recsys::load_vae(dir);
      if (eval::context_of(*kind)) {
        auto cd = man.find("input.context");
        if (cd == man.end()) throw Error("recsys", "context model in " + dir.string() + " records no context input");
        lm.context = load_context(cd->second);
      }
    }
  }
  return lm;
}

}  // namespace

void PipelineConfig::apply(const io::KeyValues& kv) {
  auto b = bindings(*this);
  for (const auto& [k, v] : kv) {
    auto it = std::find_if(b.begin(), b.end(), [&](const Binding& x) { return x.key == k; });
    if (it == b.end()) throw Error("config", "unknown key '" + k + "'");
    it->set(v);
  }
}

io::KeyValues PipelineConfig::to_key_values() const {
  auto copy = *this;
  io::KeyValues kv;
  for (const auto& b : bindings(copy)) kv[b.key] = b.get();
  return kv;
}

void PipelineConfig::validate() const {
  if (threads < 1) throw Error("config", "threads must be >= 1");
  if (!synthetic && (events_path.empty() || users_path.empty())) {
    throw Error("config", "ingest.events and ingest.users are required unless synthetic = true");
  }
  if (synthetic) synth.validate();
  filter.validate();
  if (pca_dims < 1) throw Error("config", "features.pca_dims must be >= 1");
  optics.validate();
  vae.validate();
  if (ks.empty()) throw Error("config", "evaluate.ks is empty");
  if (models.empty()) throw Error("config", "train.models is empty");
}

PipelineConfig load_config(const fs::path& path) {
  if (!fs::exists(path)) throw Error("config", "config file not found: " + path.string());
  PipelineConfig c;
  c.apply(io::read_key_values(path));
  return c;
}

PipelineConfig synthetic_config(std::uint64_t seed, const fs::path& root) {
  PipelineConfig c;
  c.root = root;
  c.seed = seed;
  c.synthetic = true;
  c.synth.n_countries = 45;
  c.synth.users_per_country = 45;
  c.synth.n_tracks = 3000;
  c.synth.archetype_count = 9;
  c.synth.skew = 0.9;
  c.filter.min_track_playcount = 2;
  c.filter.min_country_les = 500;
  c.filter.min_country_users = 10;
  c.split.n_val_users = 200;
  c.split.n_test_users = 400;
  c.vae.hidden = 64;
  c.vae.latent = 32;
  c.vae.epochs = 20;
  c.vae.batch_size = 32;
  c.vae.learning_rate = 1e-3;
  c.imf.factors = 32;
  c.imf.epochs = 10;
  return c;
}

void write_manifest(const fs::path& dir, const Manifest& m) {
  auto kv = planned_keys(m);
  for (const auto& out : m.outputs) kv["output." + out] = hex(io::hash_file(dir / out));
  io::write_key_values(manifest_path(dir), kv);
}

io::KeyValues read_manifest(const fs::path& dir) {
  if (!fs::exists(manifest_path(dir))) return {};
  return io::read_key_values(manifest_path(dir));
}

bool up_to_date(const fs::path& dir, const Manifest& planned) {
  const auto have = read_manifest(dir);
  if (have.empty()) return false;
  const auto want = planned_keys(planned);
  for (const auto& [k, v] : have) {
    if (k.rfind("output.", 0) == 0) continue;
    auto it = want.find(k);
    if (it == want.end() || it->second != v) return false;
  }
  for (const auto& [k, v] : want) {
    if (!have.count(k)) return false;
  }
  std::set<std::string> outs;
  for (const auto& [k, v] : have) {
    if (k.rfind("output.", 0) != 0) continue;
    const auto name = k.substr(7);
    outs.insert(name);
    if (!fs::exists(dir / name) || hex(io::hash_file(dir / name)) != v) return false;
  }
  for (const auto& o : planned.outputs) {
    if (!outs.count(o)) return false;
  }
  return true;
}

std::optional<fs::path> resolve_input(const fs::path& dir, const std::string& name) {
  std::vector<fs::path> queue{dir};
  std::set<std::string> seen;
  for (std::size_t i = 0; i < queue.size(); ++i) {
    if (!seen.insert(fs::weakly_canonical(queue[i]).string()).second) continue;
    const auto kv = read_manifest(queue[i]);
    auto it = kv.find("input." + name);
    if (it != kv.end()) return fs::path(it->second);
    for (const auto& [k, v] : kv) {
      if (k.rfind("input.", 0) == 0 && k.find(".hash") == std::string::npos && fs::is_directory(v)) {
        queue.emplace_back(v);
      }
    }
  }
  return std::nullopt;
}

bool stage_synth(const ingest::SynthSpec& spec, const fs::path& out, const StageOptions& opt) {
  Manifest m{"synth", {}, {}, {"events.tsv", "users.tsv", "planted.tsv"}};
  m.params = {{"countries", std::to_string(spec.n_countries)},
              {"users_per_country", std::to_string(spec.users_per_country)},
              {"tracks", std::to_string(spec.n_tracks)},
              {"archetypes", std::to_string(spec.archetype_count)},
              {"skew", io::format_double(spec.skew)},
              {"seed", std::to_string(spec.seed)},
              {"min_events", std::to_string(spec.min_events)},
              {"max_events", std::to_string(spec.max_events)},
              {"zipf_exponent", io::format_double(spec.zipf_exponent)},
              {"country_specificity", io::format_double(spec.country_specificity)},
              {"mainstream_share", io::format_double(spec.mainstream_share)},
              {"log_uniform_events", spec.log_uniform_events ? "true" : "false"},
              {"global_hits", std::to_string(spec.global_hits)},
              {"personal_taste", io::format_double(spec.personal_taste)},
              {"subgenres", std::to_string(spec.subgenres)},
              {"taste_concentration", io::format_double(spec.taste_concentration)}};
  return run_stage(out, m, opt, [&] {
    const auto data = ingest::generate_synthetic(spec);
    ingest::write_events(out / "events.tsv", data.events);
    ingest::write_users(out / "users.tsv", data.users);
    std::ostringstream os;
    for (const auto& code : data.country_codes) os << code << '\t' << data.archetype_of.at(code) << '\n';
    io::write_text(out / "planted.tsv", os.str());
  });
}

bool stage_ingest(const fs::path& events, const fs::path& users, const ingest::FilterConfig& cfg, const fs::path& out,
                  const StageOptions& opt) {
  if (!fs::exists(events)) throw Error("ingest", "events file not found: " + events.string());
  if (!fs::exists(users)) throw Error("ingest", "users file not found: " + users.string());
  Manifest m{"ingest", {}, {{"events", events}, {"users", users}}, {"events.tsv", "users.tsv", "report.txt"}};
  m.params = {{"min_track_plays", std::to_string(cfg.min_track_playcount)},
              {"min_country_les", std::to_string(cfg.min_country_les)},
              {"min_country_users", std::to_string(cfg.min_country_users)},
              {"fixpoint", cfg.iterate_to_fixpoint ? "true" : "false"}};
  return run_stage(out, m, opt, [&] {
    const auto ev = ingest::parse_events(events);
    const auto us = ingest::parse_users(users);
    ingest::UserTable table;
    for (const auto& u : us.rows) table[u.user_id] = u;
    ingest::FilterReport rep;
    const auto ds = ingest::apply_filters(ev.rows, table, cfg, &rep);
    ingest::save_dataset(out, ds);
    io::write_key_values(out / "report.txt",
                         {{"malformed_event_rows", std::to_string(ev.skipped)},
                          {"malformed_user_rows", std::to_string(us.skipped)},
                          {"users_without_country", std::to_string(rep.users_without_country)},
                          {"tracks_dropped", std::to_string(rep.tracks_dropped)},
                          {"countries_dropped", std::to_string(rep.countries_dropped)},
                          {"events_kept", std::to_string(rep.events_kept)},
                          {"filter_passes", std::to_string(rep.passes)},
                          {"users", std::to_string(ds.n_users())},
                          {"tracks", std::to_string(ds.n_tracks())},
                          {"countries", std::to_string(ds.n_countries())}});
    if (ev.skipped || us.skipped) {
      std::cerr << "ingest: skipped " << ev.skipped << " malformed event rows and " << us.skipped
                << " malformed user rows\n";
    }
  });
}

bool stage_features(const fs::path& dataset_dir, int pca_dims, const fs::path& out, const StageOptions& opt) {
  if (!fs::exists(dataset_dir / "events.tsv")) {
    throw Error("features", "no dataset (events.tsv) in " + dataset_dir.string());
  }
  Manifest m{"features", {{"pca_dims", std::to_string(pca_dims)}}, {{"dataset", dataset_dir}},
             {"countries.txt", "pca.txt", "explained_variance.txt"}};
  return run_stage(out, m, opt, [&] {
    const auto ds = ingest::load_dataset(dataset_dir);
    const auto mat = countrymap::build_matrix(ds);
    const auto pca = countrymap::pca_reduce(mat.values, pca_dims);
    std::string codes;
    for (const auto& c : mat.row_countries) codes += c + "\n";
    io::write_text(out / "countries.txt", codes);
    io::write_matrix_text(out / "pca.txt", pca.projected);
    io::write_matrix_text(out / "explained_variance.txt", pca.explained_variance_ratio);
  });
}

bool stage_embed(const fs::path& features_dir, const embed::TsneConfig& cfg, const fs::path& out,
                 const StageOptions& opt) {
  require_dir("embed", features_dir, "features");
  Manifest m{"embed", {}, {{"features", features_dir}}, {"coords.txt", "countries.txt", "kl_trace.txt"}};
  m.params = {{"perplexity", io::format_double(cfg.perplexity)},
              {"iters", std::to_string(cfg.iterations)},
              {"learning_rate", io::format_double(cfg.learning_rate)},
              {"early_exaggeration", io::format_double(cfg.early_exaggeration)},
              {"exaggeration_iters", std::to_string(cfg.exaggeration_iterations)},
              {"seed", std::to_string(cfg.seed)}};
  if (opt.write_svg) m.outputs.push_back("coords.svg");
  return run_stage(out, m, opt, [&] {
    const auto pts = io::read_matrix_text(features_dir / "pca.txt");
    const auto codes = read_codes(features_dir / "countries.txt");
    const auto res = embed::tsne_run(pts, cfg);
    io::write_matrix_text(out / "coords.txt", res.coords);
    io::write_text(out / "countries.txt", io::read_text(features_dir / "countries.txt"));
    Eigen::VectorXd trace = Eigen::Map<const Eigen::VectorXd>(res.kl_trace.data(), static_cast<Eigen::Index>(res.kl_trace.size()));
    io::write_matrix_text(out / "kl_trace.txt", trace);
    if (opt.write_svg) io::write_text(out / "coords.svg", svg::scatter(res.coords, codes));
  });
}

std::string to_string(ClusterSource s) { return s == ClusterSource::kPca ? "pca" : "embedding"; }

bool stage_cluster(const fs::path& embed_dir, const cluster::OpticsConfig& cfg, const fs::path& out,
                   const StageOptions& opt, ClusterSource source) {
  require_dir("cluster", embed_dir, "embedding");
  Manifest m{"cluster",
             {{"min_size", std::to_string(cfg.min_cluster_size)},
              {"xi", io::format_double(cfg.xi)},
              {"input", to_string(source)}},
             {{"embedding", embed_dir}},
             {"clusters.tsv", "ordering.tsv"}};
  if (opt.write_svg) m.outputs.push_back("reachability.svg");
  return run_stage(out, m, opt, [&] {
    Eigen::MatrixXd coords;
    if (source == ClusterSource::kPca) {
      auto features = resolve_input(embed_dir, "features");
      if (!features) throw Error("cluster", "cannot locate the features behind " + embed_dir.string());
      coords = io::read_matrix_text(*features / "pca.txt");
    } else {
      coords = io::read_matrix_text(embed_dir / "coords.txt");
    }
    const auto codes = read_codes(embed_dir / "countries.txt");
    if (static_cast<Eigen::Index>(codes.size()) != coords.rows()) {
      throw Error("cluster", "coordinate rows do not match the country list");
    }
    const auto ord = cluster::optics_order(coords, cfg);
    const auto asg = cluster::extract_xi_clusters(ord, cfg);
    std::ostringstream cl, od;
    for (std::size_t i = 0; i < codes.size(); ++i) cl << codes[i] << '\t' << asg.labels[i] << '\n';
    od << "position\tcountry\treachability\tcore_distance\tlabel\n";
    std::vector<double> reach;
    std::vector<int> lab;
    for (std::size_t p = 0; p < ord.order.size(); ++p) {
      const int i = ord.order[p];
      od << p << '\t' << codes[i] << '\t' << io::format_double(ord.reachability[i]) << '\t'
         << io::format_double(ord.core_distance[i]) << '\t' << asg.labels[i] << '\n';
      reach.push_back(ord.reachability[i]);
      lab.push_back(asg.labels[i]);
    }
    io::write_text(out / "clusters.tsv", cl.str());
    io::write_text(out / "ordering.tsv", od.str());
    if (opt.write_svg) io::write_text(out / "reachability.svg", svg::reachability_plot(reach, lab));
  });
}

bool stage_archetypes(const fs::path& cluster_dir, double idf_threshold, int top_k, const fs::path& tags,
                      const fs::path& out_csv, const StageOptions& opt) {
  require_dir("archetypes", cluster_dir, "cluster");
  const auto dataset_dir = dataset_of("archetypes", cluster_dir);
  const fs::path dir = out_csv.parent_path().empty() ? fs::path(".") : out_csv.parent_path();
  Manifest m{"archetypes",
             {{"idf_threshold", io::format_double(idf_threshold)}, {"top_k", std::to_string(top_k)}},
             {{"clusters", cluster_dir}, {"dataset", dataset_dir}},
             {out_csv.filename().string(), "demographics.csv"}};
  if (!tags.empty()) m.inputs.emplace_back("tags", tags);
  return run_stage(dir, m, opt, [&] {
    const auto ds = ingest::load_dataset(dataset_dir);
    const auto labels = eval::labels_for(ds, read_cluster_labels(cluster_dir));
    std::optional<archetypes::TrackTags> tt;
    if (!tags.empty()) tt = archetypes::read_track_tags(tags);
    const auto stats = archetypes::compute_idf(ds);
    const auto removed = archetypes::filter_dominating(stats, idf_threshold);
    const auto profiles = archetypes::cluster_top_tracks(ds, labels, removed, top_k, tt ? &*tt : nullptr);
    io::write_text(out_csv, archetypes::report_csv(ds, profiles, stats, tt ? &*tt : nullptr));
    std::ostringstream os;
    os << "cluster_id,n_users,n_with_age,age_min,age_q1,age_median,age_q3,age_max,n_female,n_male,"
          "female_male_ratio,mean_playcount\n";
    for (const auto& d : archetypes::cluster_demographics(ds, labels)) {
      os << d.cluster_id << ',' << d.n_users << ',' << d.n_with_age << ',' << io::format_double(d.age.min) << ','
         << io::format_double(d.age.q1) << ',' << io::format_double(d.age.median) << ','
         << io::format_double(d.age.q3) << ',' << io::format_double(d.age.max) << ',' << d.n_female << ','
         << d.n_male << ',' << (d.ratio_undefined ? std::string("inf") : io::format_double(d.female_male_ratio))
         << ',' << io::format_double(d.mean_playcount_per_user) << '\n';
    }
    io::write_text(dir / "demographics.csv", os.str());
  });
}

bool stage_splits(const fs::path& dataset_dir, const eval::SplitSpec& spec, const fs::path& out,
                  const StageOptions& opt) {
  if (!fs::exists(dataset_dir / "events.tsv")) throw Error("eval", "no dataset in " + dataset_dir.string());
  Manifest m{"splits", {}, {{"dataset", dataset_dir}}, {"splits.tsv"}};
  m.params = {{"n_val", std::to_string(spec.n_val_users)},
              {"n_test", std::to_string(spec.n_test_users)},
              {"holdout_fraction", io::format_double(spec.holdout_fraction)},
              {"min_events", std::to_string(spec.min_events)},
              {"seed", std::to_string(spec.seed)}};
  return run_stage(out, m, opt, [&] {
    const auto ds = ingest::load_dataset(dataset_dir);
    eval::save_splits(out, ds, eval::make_splits(ds, spec));
  });
}

bool stage_context(const fs::path& cluster_dir, const fs::path& splits_dir, context::ContextKind kind,
                   context::UserNormalization norm, bool standardize, const fs::path& out, const StageOptions& opt) {
  require_dir("context", cluster_dir, "cluster");
  require_dir("context", splits_dir, "splits");
  Manifest m{"context",
             {{"kind", context::to_string(kind)},
              {"norm", norm == context::UserNormalization::kSum ? "sum" : "l2"},
              {"standardize", standardize ? "true" : "false"}},
             {{"clusters", cluster_dir}, {"splits", splits_dir}},
             {"context.bin"}};
  return run_stage(out, m, opt, [&] {
    const auto ds = ingest::load_dataset(dataset_of("context", splits_dir));
    const auto labels = eval::labels_for(ds, read_cluster_labels(cluster_dir));
    const auto splits = eval::load_splits(splits_dir, ds);
    const auto data = eval::prepare(ds, labels, splits);
    const auto ctx = eval::make_context(data, kind, norm, standardize);
    io::write_matrices_binary(out / "context.bin", {{"train", ctx.train}, {"val", ctx.val}, {"test", ctx.test}});
  });
}

bool stage_train(eval::ModelKind kind, const TrainInputs& in, const eval::ExperimentConfig& cfg, const fs::path& out,
                 const StageOptions& opt) {
  require_dir("train", in.splits_dir, "splits");
  const auto ctx_kind = eval::context_of(kind);
  const bool needs_clusters = kind == eval::ModelKind::kMpCluster;
  if (needs_clusters && in.cluster_dir.empty()) throw Error("train", "mp-cluster needs a cluster directory");
  if (ctx_kind && in.context_dir.empty()) throw Error("train", eval::model_name(kind) + " needs a context directory");
  Manifest m{"train", {{"model", eval::model_name(kind)}}, {{"splits", in.splits_dir}}, {"model.txt"}};
  if (needs_clusters) m.inputs.emplace_back("clusters", in.cluster_dir);
  if (ctx_kind) {
    require_dir("train", in.context_dir, "context");
    const auto ckv = read_manifest(in.context_dir);
    auto it = ckv.find("param.kind");
    if (it == ckv.end() || it->second != context::to_string(*ctx_kind)) {
      throw Error("train", "context directory " + in.context_dir.string() + " does not hold " +
                               context::to_string(*ctx_kind) + " vectors");
    }
    m.inputs.emplace_back("context", in.context_dir);
  }
  const bool is_vae = kind == eval::ModelKind::kVae || ctx_kind.has_value();
  if (is_vae) {
    const auto& v = cfg.vae;
    m.params.insert({{"hidden", std::to_string(v.hidden)},
                     {"latent", std::to_string(v.latent)},
                     {"epochs", std::to_string(v.epochs)},
                     {"batch_size", std::to_string(v.batch_size)},
                     {"learning_rate", io::format_double(v.learning_rate)},
                     {"beta", io::format_double(v.beta_max)},
                     {"anneal_fraction", io::format_double(v.anneal_fraction)},
                     {"dropout", io::format_double(v.dropout)},
                     {"input", recsys::to_string(v.input_mode)},
                     {"l2_normalize", v.l2_normalize_input ? "true" : "false"},
                     {"validation_k", std::to_string(v.validation_k)},
                     {"seed", std::to_string(v.seed)}});
    m.outputs.insert(m.outputs.end(), {"model.bin", "vae.cfg", "train_report.tsv"});
  } else if (kind == eval::ModelKind::kImf) {
    const auto& c = cfg.imf;
    m.params.insert({{"factors", std::to_string(c.factors)},
                     {"epochs", std::to_string(c.epochs)},
                     {"learning_rate", io::format_double(c.learning_rate)},
                     {"l2", io::format_double(c.l2)},
                     {"loss", c.loss == recsys::ImfLoss::kSquared ? "squared" : "logistic"},
                     {"seed", std::to_string(c.seed)}});
    m.outputs.push_back("model.bin");
  } else {
    m.outputs.push_back("mp.txt");
  }
  return run_stage(out, m, opt, [&] {
    const auto ds = ingest::load_dataset(dataset_of("train", in.splits_dir));
    std::vector<int> labels(static_cast<std::size_t>(ds.n_countries()), -1);
    if (needs_clusters) labels = eval::labels_for(ds, read_cluster_labels(in.cluster_dir));
    const auto splits = eval::load_splits(in.splits_dir, ds);
    const auto data = eval::prepare(ds, labels, splits);
    std::optional<eval::ContextSet> ctx;
    if (ctx_kind) ctx = load_context(in.context_dir);
    const auto model = eval::train_model(kind, data, ctx ? &*ctx : nullptr, cfg);
    if (model.vae) {
      recsys::save_vae(out, *model.vae);
      write_report(out / "train_report.tsv", model.report);
    } else if (model.imf) {
      recsys::save_imf(out, *model.imf);
    } else {
      recsys::save_mp(out, *model.mp);
    }
    io::write_key_values(out / "model.txt", {{"model", eval::model_name(kind)}});
  });
}

bool stage_evaluate(const std::vector<fs::path>& model_dirs, const fs::path& splits_dir, const fs::path& out_csv,
                    const EvaluateOptions& eo, const StageOptions& opt) {
  if (model_dirs.empty()) throw Error("eval", "no model directories given");
  require_dir("eval", splits_dir, "splits");
  const fs::path dir = out_csv.parent_path().empty() ? fs::path(".") : out_csv.parent_path();
  Manifest m{"evaluate",
             {{"ks", join_ints(eo.ks)}, {"baseline", eo.baseline}, {"alternative", alt_name(eo.alternative)}},
             {{"splits", splits_dir}},
             {out_csv.filename().string(), "friedman.txt"}};
  for (std::size_t i = 0; i < model_dirs.size(); ++i) {
    require_dir("eval", model_dirs[i], "model");
    m.inputs.emplace_back("model" + std::to_string(i), model_dirs[i]);
  }
  if (!eo.svg.empty()) m.outputs.push_back(eo.svg.filename().string());
  return run_stage(dir, m, opt, [&] {
    const auto ds = ingest::load_dataset(dataset_of("eval", splits_dir));
    const auto splits = eval::load_splits(splits_dir, ds);
    const std::vector<int> no_labels(static_cast<std::size_t>(ds.n_countries()), -1);
    const auto data = eval::prepare(ds, no_labels, splits);
    const int kmax = *std::max_element(eo.ks.begin(), eo.ks.end());
    std::vector<eval::MetricTable> tables;
    for (const auto& md : model_dirs) {
      const auto lm = load_model(md);
      if (fs::weakly_canonical(lm.splits_dir) != fs::weakly_canonical(splits_dir)) {
        throw Error("eval", "model " + md.string() + " was trained on splits " + lm.splits_dir.string());
      }
      const auto recs = eval::recommend_test_users(lm.model, data, lm.context ? &*lm.context : nullptr, kmax);
      tables.push_back(eval::evaluate_lists(eval::model_name(lm.model.kind), recs, data, eo.ks));
    }
    const auto rows = eval::compare(tables, eo.baseline, eo.alternative);
    io::write_text(out_csv, eval::results_csv(rows));
    std::ostringstream fr;
    fr << "metric\tstatistic\tp_value\tn_blocks\tn_models\n";
    for (const auto& [name, r] : eval::friedman_all(tables)) {
      fr << name << '\t' << io::format_double(r.statistic) << '\t' << io::format_double(r.p_value) << '\t'
         << r.n_blocks << '\t' << r.n_treatments << '\n';
    }
    io::write_text(dir / "friedman.txt", fr.str());
    if (!eo.svg.empty()) {
      std::vector<svg::Bar> bars;
      for (const auto& r : rows) {
        if (r.metric == eval::Metric::kNdcg && r.k == eo.ks.front()) bars.push_back({r.model, r.mean});
      }
      io::write_text(dir / eo.svg.filename(), svg::bar_chart("NDCG@" + std::to_string(eo.ks.front()), bars));
    }
  });
}

std::vector<Recommendation> recommend_for_user(const fs::path& model_dir, std::int64_t user_id, int k) {
  if (k < 1) throw Error("recsys", "k must be >= 1");
  const auto lm = load_model(model_dir);
  const auto ds = ingest::load_dataset(dataset_of("recsys", lm.splits_dir));
  const auto splits = eval::load_splits(lm.splits_dir, ds);
  auto dense = ds.user_index(user_id);
  if (!dense) throw Error("recsys", "user " + std::to_string(user_id) + " is not in the dataset");

  // Locate the user's role, known history and row in the model's user order.
  SparseRow known;
  int row = -1;
  const eval::ContextSet* ctx = lm.context ? &*lm.context : nullptr;
  const Eigen::MatrixXd* ctx_block = nullptr;
  auto t = std::lower_bound(splits.train.begin(), splits.train.end(), *dense);
  const int n_train = static_cast<int>(splits.train.size());
  const int n_val = static_cast<int>(splits.validation.size());
  int imf_row = -1;
  if (t != splits.train.end() && *t == *dense) {
    row = static_cast<int>(t - splits.train.begin());
    known = counts_from_events(ds.user_events(*dense));
    imf_row = row;
    if (ctx) ctx_block = &ctx->train;
  } else {
    for (int i = 0; i < n_val && row < 0; ++i) {
      if (splits.validation[i].user == *dense) {
        row = i;
        known = splits.validation[i].input;
        imf_row = n_train + i;
        if (ctx) ctx_block = &ctx->val;
      }
    }
    for (int i = 0; i < static_cast<int>(splits.test.size()) && row < 0; ++i) {
      if (splits.test[i].user == *dense) {
        row = i;
        known = splits.test[i].input;
        imf_row = n_train + n_val + i;
        if (ctx) ctx_block = &ctx->test;
      }
    }
  }
  if (row < 0) throw Error("recsys", "user " + std::to_string(user_id) + " is in no split");

  std::vector<Recommendation> out;
  if (lm.model.vae) {
    const std::span<const SparseRow> rows(&known, 1);
    Eigen::MatrixXd cm;
    if (ctx_block) cm = ctx_block->row(row).transpose();
    const Eigen::MatrixXd scores = recsys::score_users(*lm.model.vae, rows, ctx_block ? &cm : nullptr);
    for (int tr : recsys::top_k(scores.col(0), known.tracks, k)) out.push_back({ds.track_id(tr), scores(tr, 0)});
  } else if (lm.model.imf) {
    const Eigen::VectorXd s = lm.model.imf->scores(imf_row);
    for (int tr : recsys::top_k(s, known.tracks, k)) out.push_back({ds.track_id(tr), s(tr)});
  } else {
    const auto recs = lm.model.mp->recommend(ds.user_country(*dense), known.tracks, k);
    // Most-popular lists carry no score; report the reciprocal rank.
    for (std::size_t r = 0; r < recs.size(); ++r) out.push_back({ds.track_id(recs[r]), 1.0 / static_cast<double>(r + 1)});
  }
  return out;
}

fs::path stage_dir(const PipelineConfig& cfg, const std::string& stage) { return cfg.root / stage; }

fs::path run_pipeline(const PipelineConfig& cfg_in, const StageOptions& opt) {
  PipelineConfig cfg = cfg_in;
  cfg.validate();
  set_thread_count(cfg.threads);
  fs::create_directories(cfg.root);
  io::write_key_values(cfg.root / "config.txt", cfg.to_key_values());

  auto log = [](const std::string& stage, bool ran) {
    std::cerr << (ran ? "[run]  " : "[skip] ") << stage << '\n';
  };

  fs::path events = cfg.events_path, users = cfg.users_path;
  if (cfg.synthetic) {
    auto spec = cfg.synth;
    spec.seed = derive_seed(cfg.seed, "synth");
    const auto dir = stage_dir(cfg, "synth");
    log("synth", stage_synth(spec, dir, opt));
    events = dir / "events.tsv";
    users = dir / "users.tsv";
  }
  const auto ingest_dir = stage_dir(cfg, "ingest");
  log("ingest", stage_ingest(events, users, cfg.filter, ingest_dir, opt));

  const auto features_dir = stage_dir(cfg, "features");
  log("features", stage_features(ingest_dir, cfg.pca_dims, features_dir, opt));

  auto tsne = cfg.tsne;
  tsne.seed = derive_seed(cfg.seed, "embed");
  const auto embed_dir = stage_dir(cfg, "embed");
  log("embed", stage_embed(features_dir, tsne, embed_dir, opt));

  const auto cluster_dir = stage_dir(cfg, "cluster");
  log("cluster", stage_cluster(embed_dir, cfg.optics, cluster_dir, opt, cfg.cluster_source));

  log("archetypes", stage_archetypes(cluster_dir, cfg.idf_threshold, cfg.top_k, cfg.tags_path,
                                     stage_dir(cfg, "archetypes") / "report.csv", opt));

  auto split = cfg.split;
  split.seed = derive_seed(cfg.seed, "splits");
  const auto splits_dir = stage_dir(cfg, "splits");
  log("splits", stage_splits(ingest_dir, split, splits_dir, opt));

  std::map<context::ContextKind, fs::path> ctx_dirs;
  for (auto kind : cfg.models) {
    auto ck = eval::context_of(kind);
    if (!ck || ctx_dirs.count(*ck)) continue;
    const auto dir = stage_dir(cfg, "context") / context::to_string(*ck);
    log("context/" + context::to_string(*ck),
        stage_context(cluster_dir, splits_dir, *ck, cfg.context_norm, cfg.standardize_distances, dir, opt));
    ctx_dirs[*ck] = dir;
  }

  eval::ExperimentConfig ec;
  ec.vae = cfg.vae;
  // Every autoencoder variant shares one seed so paired comparisons start
  // from the same non-context weights.
  ec.vae.seed = derive_seed(cfg.seed, "train-vae");
  ec.imf = cfg.imf;
  ec.imf.seed = derive_seed(cfg.seed, "train-imf");
  std::vector<fs::path> model_dirs;
  for (auto kind : cfg.models) {
    TrainInputs in;
    in.splits_dir = splits_dir;
    if (kind == eval::ModelKind::kMpCluster) in.cluster_dir = cluster_dir;
    if (auto ck = eval::context_of(kind)) in.context_dir = ctx_dirs.at(*ck);
    const auto dir = stage_dir(cfg, "train") / eval::model_name(kind);
    log("train/" + eval::model_name(kind), stage_train(kind, in, ec, dir, opt));
    model_dirs.push_back(dir);
  }

  EvaluateOptions eo;
  eo.ks = cfg.ks;
  eo.baseline = cfg.baseline;
  eo.alternative = cfg.alternative;
  if (opt.write_svg) eo.svg = "metrics.svg";
  const auto results = stage_dir(cfg, "evaluate") / "results.csv";
  log("evaluate", stage_evaluate(model_dirs, splits_dir, results, eo, opt));
  return results;
}

}  // namespace archrec::pipeline
