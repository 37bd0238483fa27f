#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "archrec/common.hpp"
#include "archrec/pipeline.hpp"

namespace fs = std::filesystem;
using namespace archrec;

namespace {

// --config and --synthetic decide the defaults every other flag overrides,
// so they are looked up before the parser is built.
std::string find_value(int argc, char** argv, const std::string& flag) {
  for (int i = 1; i + 1 < argc; ++i) {
    if (argv[i] == flag) return argv[i + 1];
  }
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a.rfind(flag + "=", 0) == 0) return a.substr(flag.size() + 1);
  }
  return {};
}

bool has_flag(int argc, char** argv, const std::string& flag) {
  for (int i = 1; i < argc; ++i) {
    if (argv[i] == flag) return true;
  }
  return false;
}

fs::path default_root() {
  if (const char* env = std::getenv("ARCHREC_ARTIFACT_ROOT"); env && *env) return env;
  return "artifacts";
}

void copy_svg(const fs::path& from, const std::string& to) {
  if (to.empty() || fs::weakly_canonical(from) == fs::weakly_canonical(to)) return;
  if (fs::path(to).has_parent_path()) fs::create_directories(fs::path(to).parent_path());
  fs::copy_file(from, to, fs::copy_options::overwrite_existing);
}

void report(const std::string& stage, bool ran) {
  std::cerr << (ran ? "[run]  " : "[skip] ") << stage << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  pipeline::PipelineConfig cfg;
  const std::string config_path = find_value(argc, argv, "--config");
  try {
    if (!config_path.empty()) {
      cfg = pipeline::load_config(config_path);
    } else if (has_flag(argc, argv, "--synthetic")) {
      cfg = pipeline::synthetic_config(1, default_root());
    } else {
      cfg.root = default_root();
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }

  CLI::App app{"Country archetypes and context-gated autoencoder recommendations"};
  app.require_subcommand(1);
  pipeline::StageOptions sopt;
  std::string config_unused;
  app.add_option("--config", config_unused, "key = value config file; flags override it");
  app.add_option("--threads", cfg.threads, "worker threads")->check(CLI::PositiveNumber);
  app.add_flag("--force", sopt.force, "rerun stages whose manifest is current");

  // synth
  auto* synth = app.add_subcommand("synth", "generate a planted-archetype dataset");
  fs::path synth_out;
  synth->add_option("--countries", cfg.synth.n_countries);
  synth->add_option("--users-per-country", cfg.synth.users_per_country);
  synth->add_option("--tracks", cfg.synth.n_tracks);
  synth->add_option("--archetypes", cfg.synth.archetype_count);
  synth->add_option("--skew", cfg.synth.skew);
  synth->add_option("--min-events", cfg.synth.min_events);
  synth->add_option("--max-events", cfg.synth.max_events);
  synth->add_option("--global-hits", cfg.synth.global_hits);
  synth->add_option("--seed", cfg.synth.seed);
  synth->add_option("--out", synth_out)->required();

  // ingest
  auto* ingest = app.add_subcommand("ingest", "parse and filter listening events");
  fs::path ingest_out;
  bool no_fixpoint = false;
  ingest->add_option("--events", cfg.events_path)->required();
  ingest->add_option("--users", cfg.users_path)->required();
  ingest->add_option("--min-track-plays", cfg.filter.min_track_playcount);
  ingest->add_option("--min-country-les", cfg.filter.min_country_les);
  ingest->add_option("--min-country-users", cfg.filter.min_country_users);
  ingest->add_flag("--single-pass", no_fixpoint, "apply the filters once instead of to a fixpoint");
  ingest->add_option("--out", ingest_out)->required();

  // features
  auto* features = app.add_subcommand("features", "country-track matrix and PCA");
  fs::path features_in, features_out;
  features->add_option("--in", features_in, "ingest directory")->required();
  features->add_option("--pca-dims", cfg.pca_dims);
  features->add_option("--out", features_out)->required();

  // embed
  auto* embed = app.add_subcommand("embed", "t-SNE of the PCA vectors");
  fs::path embed_in, embed_out;
  std::string embed_svg;
  embed->add_option("--in", embed_in, "features directory")->required();
  embed->add_option("--perplexity", cfg.tsne.perplexity);
  embed->add_option("--iters", cfg.tsne.iterations);
  embed->add_option("--learning-rate", cfg.tsne.learning_rate);
  embed->add_option("--seed", cfg.tsne.seed);
  embed->add_option("--svg", embed_svg, "copy of the scatter plot");
  embed->add_option("--out", embed_out)->required();

  // cluster
  auto* clus = app.add_subcommand("cluster", "OPTICS with xi extraction");
  fs::path cluster_in, cluster_out;
  std::string cluster_svg, cluster_input = pipeline::to_string(cfg.cluster_source);
  clus->add_option("--in", cluster_in, "embedding directory")->required();
  clus->add_option("--min-size", cfg.optics.min_cluster_size);
  clus->add_option("--xi", cfg.optics.xi);
  clus->add_option("--input", cluster_input, "embedding or pca")->check(CLI::IsMember({"embedding", "pca"}));
  clus->add_option("--svg", cluster_svg, "copy of the reachability plot");
  clus->add_option("--out", cluster_out)->required();

  // archetypes
  auto* arch = app.add_subcommand("archetypes", "top tracks and demographics per cluster");
  fs::path arch_in, arch_out;
  arch->add_option("--in", arch_in, "cluster directory")->required();
  arch->add_option("--idf-threshold", cfg.idf_threshold);
  arch->add_option("--top-k", cfg.top_k);
  arch->add_option("--tags", cfg.tags_path);
  arch->add_option("--out", arch_out, "report CSV")->required();

  // splits
  auto* splits = app.add_subcommand("splits", "train / validation / test users");
  fs::path splits_in, splits_out;
  splits->add_option("--in", splits_in, "ingest directory")->required();
  splits->add_option("--n-val", cfg.split.n_val_users);
  splits->add_option("--n-test", cfg.split.n_test_users);
  splits->add_option("--holdout-fraction", cfg.split.holdout_fraction);
  splits->add_option("--seed", cfg.split.seed);
  splits->add_option("--out", splits_out)->required();

  // context
  auto* ctx = app.add_subcommand("context", "per-user context vectors");
  fs::path ctx_in, ctx_splits, ctx_out;
  std::string ctx_model, ctx_norm = "sum";
  ctx->add_option("--in", ctx_in, "cluster directory")->required();
  ctx->add_option("--splits", ctx_splits)->required();
  ctx->add_option("--model", ctx_model)
      ->required()
      ->check(CLI::IsMember({"country-id", "cluster-id", "cluster-dist", "country-dist"}));
  ctx->add_option("--norm", ctx_norm)->check(CLI::IsMember({"sum", "l2"}));
  ctx->add_option("--standardize", cfg.standardize_distances, "z-score distance columns");
  ctx->add_option("--out", ctx_out)->required();

  // train
  auto* train = app.add_subcommand("train", "fit one recommender");
  fs::path train_out;
  pipeline::TrainInputs tin;
  std::string model = "vae", context_name = "none", scope = "global";
  std::uint64_t train_seed = cfg.seed;
  train->add_option("--model", model)->check(CLI::IsMember({"vae", "vae-ctx", "mp", "imf"}));
  train->add_option("--context", context_name)
      ->check(CLI::IsMember({"none", "country-id", "cluster-id", "cluster-dist", "country-dist"}));
  train->add_option("--scope", scope, "most-popular scope")->check(CLI::IsMember({"global", "country", "cluster"}));
  train->add_option("--splits", tin.splits_dir)->required();
  train->add_option("--clusters", tin.cluster_dir, "cluster directory (mp cluster scope)");
  train->add_option("--context-dir", tin.context_dir, "context directory (vae-ctx)");
  train->add_option("--hidden", cfg.vae.hidden);
  train->add_option("--latent", cfg.vae.latent);
  train->add_option("--epochs", cfg.vae.epochs);
  train->add_option("--batch-size", cfg.vae.batch_size);
  train->add_option("--learning-rate", cfg.vae.learning_rate);
  train->add_option("--beta", cfg.vae.beta_max);
  train->add_option("--dropout", cfg.vae.dropout);
  train->add_option("--factors", cfg.imf.factors);
  train->add_option("--seed", train_seed);
  train->add_option("--out", train_out)->required();

  // recommend
  auto* rec = app.add_subcommand("recommend", "top-k tracks for one user");
  fs::path rec_dir;
  std::int64_t rec_user = 0;
  int rec_k = 100;
  rec->add_option("--model-dir", rec_dir)->required();
  rec->add_option("--user", rec_user)->required();
  rec->add_option("--k", rec_k)->check(CLI::PositiveNumber);

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "metrics and significance tests");
  std::vector<fs::path> ev_models;
  fs::path ev_splits, ev_out;
  std::string ev_ks, ev_svg, ev_alt = "two-sided";
  ev->add_option("--models", ev_models)->required();
  ev->add_option("--splits", ev_splits)->required();
  ev->add_option("--ks", ev_ks, "comma-separated cutoffs");
  ev->add_option("--baseline", cfg.baseline);
  ev->add_option("--alternative", ev_alt)->check(CLI::IsMember({"two-sided", "greater", "less"}));
  ev->add_option("--svg", ev_svg, "bar chart written next to the CSV");
  ev->add_option("--out", ev_out)->required();

  // reproduce
  auto* repro = app.add_subcommand("reproduce", "run every stage end to end");
  bool synthetic_flag = false;
  repro->add_flag("--synthetic", synthetic_flag, "generate the input data");
  repro->add_option("--seed", cfg.seed);
  repro->add_option("--root", cfg.root, "artifact root (default $ARCHREC_ARTIFACT_ROOT or ./artifacts)");
  repro->add_flag("--no-svg", [&](std::int64_t) { sopt.write_svg = false; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  const std::string stage = app.get_subcommands().front()->get_name();
  try {
    set_thread_count(cfg.threads);
    if (stage == "synth") {
      report("synth", pipeline::stage_synth(cfg.synth, synth_out, sopt));
    } else if (stage == "ingest") {
      if (no_fixpoint) cfg.filter.iterate_to_fixpoint = false;
      cfg.filter.validate();
      report("ingest", pipeline::stage_ingest(cfg.events_path, cfg.users_path, cfg.filter, ingest_out, sopt));
    } else if (stage == "features") {
      report("features", pipeline::stage_features(features_in, cfg.pca_dims, features_out, sopt));
    } else if (stage == "embed") {
      report("embed", pipeline::stage_embed(embed_in, cfg.tsne, embed_out, sopt));
      if (sopt.write_svg) copy_svg(embed_out / "coords.svg", embed_svg);
    } else if (stage == "cluster") {
      io::KeyValues kv{{"cluster.input", cluster_input}};
      cfg.apply(kv);
      report("cluster", pipeline::stage_cluster(cluster_in, cfg.optics, cluster_out, sopt, cfg.cluster_source));
      if (sopt.write_svg) copy_svg(cluster_out / "reachability.svg", cluster_svg);
    } else if (stage == "archetypes") {
      report("archetypes", pipeline::stage_archetypes(arch_in, cfg.idf_threshold, cfg.top_k, cfg.tags_path, arch_out, sopt));
    } else if (stage == "splits") {
      report("splits", pipeline::stage_splits(splits_in, cfg.split, splits_out, sopt));
    } else if (stage == "context") {
      const auto kind = *context::parse_context_kind(ctx_model);
      const auto norm = ctx_norm == "l2" ? context::UserNormalization::kL2 : context::UserNormalization::kSum;
      report("context", pipeline::stage_context(ctx_in, ctx_splits, kind, norm, cfg.standardize_distances, ctx_out, sopt));
    } else if (stage == "train") {
      eval::ModelKind kind = eval::ModelKind::kVae;
      if (model == "vae-ctx") {
        if (context_name == "none") throw Error("train", "--model vae-ctx needs --context");
        kind = *eval::parse_model_name("vae-" + context_name);
      } else if (model == "vae") {
        if (context_name != "none") throw Error("train", "--model vae takes no context; use vae-ctx");
      } else if (model == "mp") {
        kind = *eval::parse_model_name("mp-" + scope);
      } else {
        kind = eval::ModelKind::kImf;
      }
      cfg.vae.validate();
      eval::ExperimentConfig ec;
      ec.vae = cfg.vae;
      ec.imf = cfg.imf;
      ec.vae.seed = derive_seed(train_seed, "train-vae");
      ec.imf.seed = derive_seed(train_seed, "train-imf");
      report("train/" + eval::model_name(kind), pipeline::stage_train(kind, tin, ec, train_out, sopt));
    } else if (stage == "recommend") {
      std::cout << "rank\ttrack_id\tscore\n";
      int r = 1;
      for (const auto& x : pipeline::recommend_for_user(rec_dir, rec_user, rec_k)) {
        std::cout << r++ << '\t' << x.track_id << '\t' << io::format_double(x.score) << '\n';
      }
    } else if (stage == "evaluate") {
      io::KeyValues kv{{"evaluate.alternative", ev_alt}};
      if (!ev_ks.empty()) kv["evaluate.ks"] = ev_ks;
      cfg.apply(kv);
      pipeline::EvaluateOptions eo;
      eo.ks = cfg.ks;
      if (eo.ks.empty()) throw Error("eval", "--ks lists no cutoffs");
      eo.baseline = cfg.baseline;
      eo.alternative = cfg.alternative;
      eo.svg = ev_svg;
      report("evaluate", pipeline::stage_evaluate(ev_models, ev_splits, ev_out, eo, sopt));
    } else if (stage == "reproduce") {
      if (synthetic_flag) cfg.synthetic = true;
      const auto csv = pipeline::run_pipeline(cfg, sopt);
      std::cout << csv.string() << '\n';
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error [" << stage << "]: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
