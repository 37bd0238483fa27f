#include <fstream>
#include <set>

#include <gtest/gtest.h>

#include "archrec/common.hpp"
#include "archrec/io.hpp"
#include "archrec/pipeline.hpp"
#include "test_util.hpp"

using namespace archrec;
using namespace archrec::pipeline;

namespace {

PipelineConfig small_config(const fs::path& root) {
  PipelineConfig c;
  c.root = root;
  c.seed = 3;
  c.synthetic = true;
  c.synth.n_countries = 20;
  c.synth.users_per_country = 15;
  c.synth.n_tracks = 300;
  c.synth.archetype_count = 4;
  c.synth.min_events = 10;
  c.synth.max_events = 30;
  c.filter = testutil::no_filter();
  c.pca_dims = 10;
  c.tsne.iterations = 300;
  c.split.n_val_users = 20;
  c.split.n_test_users = 40;
  c.vae.hidden = 8;
  c.vae.latent = 4;
  c.vae.epochs = 2;
  c.vae.batch_size = 16;
  c.vae.validation_k = 10;
  c.models = {eval::ModelKind::kMpGlobal, eval::ModelKind::kMpCluster, eval::ModelKind::kVae,
              eval::ModelKind::kVaeClusterDist};
  c.ks = {5, 10};
  return c;
}

StageOptions quiet() {
  StageOptions o;
  o.write_svg = false;
  return o;
}

}  // namespace

TEST(Config, UnknownKeyThrows) {
  PipelineConfig c;
  EXPECT_THROW(c.apply({{"train.hiden", "5"}}), Error);
  try {
    c.apply({{"nope", "1"}});
  } catch (const Error& e) {
    EXPECT_EQ(e.stage(), "config");
  }
}

TEST(Config, KeyValuesRoundTrip) {
  auto c = small_config("/tmp/x");
  c.cluster_source = ClusterSource::kPca;
  c.alternative = eval::Alternative::kGreater;
  const auto kv = c.to_key_values();
  PipelineConfig d;
  d.apply(kv);
  EXPECT_EQ(d.to_key_values(), kv);
  EXPECT_EQ(d.cluster_source, ClusterSource::kPca);
  EXPECT_EQ(d.vae.hidden, 8);
  EXPECT_EQ(d.models.size(), 4u);
}

TEST(Config, LoadFromFile) {
  const auto dir = testutil::temp_dir("cfg");
  io::write_text(dir / "c.txt", "# comment\nseed = 11\ntrain.epochs = 3\nevaluate.ks = 1,2\n");
  const auto c = load_config(dir / "c.txt");
  EXPECT_EQ(c.seed, 11u);
  EXPECT_EQ(c.vae.epochs, 3);
  EXPECT_EQ(c.ks, (std::vector<int>{1, 2}));
  EXPECT_THROW(load_config(dir / "missing.txt"), Error);
}

TEST(Config, ValidationRequiresInputs) {
  PipelineConfig c;
  EXPECT_THROW(c.validate(), Error);
  c.events_path = "e";
  c.users_path = "u";
  EXPECT_NO_THROW(c.validate());
  c.ks.clear();
  EXPECT_THROW(c.validate(), Error);
}

TEST(Pipeline, MissingEventsFailsInIngest) {
  const auto dir = testutil::temp_dir("r");
  PipelineConfig c = small_config(dir);
  c.synthetic = false;
  c.events_path = dir / "none.tsv";
  c.users_path = dir / "none_users.tsv";
  try {
    run_pipeline(c, quiet());
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.stage(), "ingest");
  }
}

TEST(Pipeline, ResumeAndReproducibility) {
  const auto a = testutil::temp_dir("a"), b = testutil::temp_dir("b");
  const auto ra = run_pipeline(small_config(a), quiet());
  const auto first = io::read_text(ra);
  EXPECT_EQ(first.rfind("model,metric,K,mean,p_vs_baseline\n", 0), 0u);

  // Same seed under another root: identical bytes.
  EXPECT_EQ(io::read_text(run_pipeline(small_config(b), quiet())), first);

  // Every stage is current now.
  const auto cfg = small_config(a);
  auto split = cfg.split;
  split.seed = derive_seed(cfg.seed, "splits");
  EXPECT_FALSE(stage_splits(a / "ingest", split, a / "splits", quiet()));
  const auto stamp = fs::last_write_time(ra);
  run_pipeline(cfg, quiet());
  EXPECT_EQ(fs::last_write_time(ra), stamp);

  // Losing a model directory reruns it and reproduces the results.
  fs::remove_all(a / "train" / "vae");
  EXPECT_EQ(io::read_text(run_pipeline(cfg, quiet())), first);

  // A tampered output invalidates its stage.
  {
    std::ofstream f(a / "splits" / "splits.tsv", std::ios::app);
    f << "\n";
  }
  EXPECT_TRUE(stage_splits(a / "ingest", split, a / "splits", quiet()));
  EXPECT_FALSE(stage_splits(a / "ingest", split, a / "splits", quiet()));
  EXPECT_EQ(io::read_text(run_pipeline(cfg, quiet())), first);

  // A changed parameter reruns the stage.
  auto other = split;
  other.n_test_users = 30;
  EXPECT_TRUE(stage_splits(a / "ingest", other, a / "splits", quiet()));
  EXPECT_FALSE(stage_splits(a / "ingest", other, a / "splits", quiet()));
  StageOptions force = quiet();
  force.force = true;
  EXPECT_TRUE(stage_splits(a / "ingest", other, a / "splits", force));
}

TEST(Pipeline, ArtifactsAndRecommendations) {
  const auto a = testutil::temp_dir("a");
  const auto cfg = small_config(a);
  run_pipeline(cfg, quiet());
  for (const char* f : {"synth/events.tsv", "ingest/events.tsv", "features/pca.txt", "embed/coords.txt",
                        "embed/kl_trace.txt", "cluster/clusters.tsv", "archetypes/report.csv", "splits/splits.tsv",
                        "context/cluster-dist/context.bin", "evaluate/friedman.txt", "config.txt"}) {
    EXPECT_TRUE(fs::exists(a / f)) << f;
  }
  EXPECT_EQ(resolve_input(a / "embed", "dataset"), a / "ingest");
  EXPECT_FALSE(resolve_input(a / "embed", "nothing").has_value());

  const auto ds = ingest::load_dataset(a / "ingest");
  const auto splits = eval::load_splits(a / "splits", ds);
  const int dense = splits.train.front();
  const auto uid = ds.user_id(dense);
  std::set<std::int64_t> heard;
  for (int t : ds.user_events(dense)) heard.insert(ds.track_id(t));
  for (const char* m : {"vae", "vae-cluster-dist", "mp-global"}) {
    const auto recs = recommend_for_user(a / "train" / m, uid, 5);
    ASSERT_EQ(recs.size(), 5u) << m;
    for (std::size_t i = 1; i < recs.size(); ++i) EXPECT_GE(recs[i - 1].score, recs[i].score);
    for (const auto& r : recs) EXPECT_FALSE(heard.count(r.track_id)) << m;
  }
  EXPECT_THROW(recommend_for_user(a / "train" / "vae", -42, 5), Error);
}

TEST(Pipeline, PcaClusterSource) {
  const auto a = testutil::temp_dir("a");
  auto cfg = small_config(a);
  cfg.cluster_source = ClusterSource::kPca;
  cfg.models = {eval::ModelKind::kMpCluster};
  cfg.baseline = "mp-cluster";
  run_pipeline(cfg, quiet());
  EXPECT_EQ(read_manifest(a / "cluster").at("param.input"), "pca");
}
