#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include <gtest/gtest.h>

#include "archrec/common.hpp"
#include "archrec/archetypes.hpp"
#include "archrec/ingest.hpp"
#include "archrec/synth.hpp"
#include "test_util.hpp"

using namespace archrec;
using namespace archrec::archetypes;
using testutil::ev;
using testutil::user;

namespace {

ingest::Dataset two_track_dataset(int n_a, int n_b) {
  std::vector<ingest::ListeningEvent> events;
  for (int i = 0; i < n_a; ++i) events.push_back(ev(1, 100));
  for (int i = 0; i < n_b; ++i) events.push_back(ev(1, 200));
  return ingest::Dataset::build(events, {{1, user(1, "AT")}});
}

ingest::SynthData small_synth(double skew, int hits = 0) {
  ingest::SynthSpec s;
  s.n_countries = 6;
  s.archetype_count = 2;
  s.n_tracks = 200;
  s.users_per_country = 10;
  s.skew = skew;
  s.global_hits = hits;
  s.seed = 3;
  return ingest::generate_synthetic(s);
}

}  // namespace

TEST(Idf, FormulaExamples) {
  const auto st = compute_idf(two_track_dataset(10, 990));
  EXPECT_EQ(st.n_total_les, 1000);
  EXPECT_NEAR(st.idf[0], 2.0, 1e-15);
  EXPECT_NEAR(st.idf[1], std::log10(1000.0 / 990.0), 1e-15);
  EXPECT_EQ(compute_idf(two_track_dataset(5, 0)).idf[0], 0.0);
}

TEST(Idf, MatchesRecount) {
  const auto d = small_synth(0.9);
  const auto ds = ingest::Dataset::build(d.events, d.users);
  const auto st = compute_idf(ds);
  std::map<std::int64_t, double> n;
  for (const auto& e : d.events) n[e.track_id] += 1.0;
  const double total = static_cast<double>(d.events.size());
  for (int t = 0; t < ds.n_tracks(); ++t) {
    EXPECT_EQ(st.per_track_les[t], static_cast<std::int64_t>(n[ds.track_id(t)]));
    EXPECT_NEAR(st.idf[t], std::log10(total / n[ds.track_id(t)]), 1e-12);
    EXPECT_GE(st.idf[t], 0.0);
  }
}

TEST(Dominating, ThresholdBoundary) {
  TrackStats st;
  st.idf = {4.19, 4.2, 5.0, 1.0};
  EXPECT_EQ(filter_dominating(st, 4.2), (std::vector<int>{0, 3}));
  EXPECT_EQ(filter_dominating(st, 4.2, DominatingRule::kAboveThreshold), (std::vector<int>{2}));
}

TEST(Dominating, GlobalHitRemoved) {
  const auto d = small_synth(0.9, 1);
  const auto ds = ingest::Dataset::build(d.events, d.users);
  const auto st = compute_idf(ds);
  const int hit = *ds.track_index(d.global_hit_track_ids[0]);
  const auto removed = filter_dominating(st, 4.2);
  EXPECT_TRUE(std::find(removed.begin(), removed.end(), hit) != removed.end());
  // Every user hears it at least once.
  EXPECT_GE(st.per_track_les[hit], ds.n_users());
  EXPECT_LE(st.idf[hit], std::log10(static_cast<double>(ds.n_events()) / ds.n_users()));
}

TEST(TopTracks, SingleClusterMatchesGlobalOrder) {
  const auto d = small_synth(0.9, 1);
  const auto ds = ingest::Dataset::build(d.events, d.users);
  const auto st = compute_idf(ds);
  const std::vector<int> removed = {*ds.track_index(d.global_hit_track_ids[0])};
  const std::vector<int> labels(ds.n_countries(), 0);
  const auto prof = cluster_top_tracks(ds, labels, removed, 10);
  ASSERT_EQ(prof.size(), 1u);
  std::vector<std::pair<std::int64_t, int>> order;
  for (int t = 0; t < ds.n_tracks(); ++t) {
    if (t != removed[0]) order.push_back({-ds.track_playcounts()[t], t});
  }
  std::sort(order.begin(), order.end());
  ASSERT_EQ(prof[0].top_tracks.size(), 10u);
  for (int r = 0; r < 10; ++r) {
    EXPECT_EQ(prof[0].top_tracks[r].track, order[r].second);
    EXPECT_EQ(prof[0].top_tracks[r].playcount, -order[r].first);
  }
}

TEST(TopTracks, DisjointBlocksStayInOwnBlock) {
  const auto d = small_synth(1.0);
  const auto ds = ingest::Dataset::build(d.events, d.users);
  std::vector<int> labels(ds.n_countries());
  for (int c = 0; c < ds.n_countries(); ++c) labels[c] = d.archetype_of.at(ds.country_code(c));
  const auto prof = cluster_top_tracks(ds, labels, {}, 10);
  ASSERT_EQ(prof.size(), 2u);
  for (const auto& p : prof) {
    const auto& block = d.archetype_block_track_ids[p.cluster_id];
    const std::set<std::int64_t> own(block.begin(), block.end());
    for (const auto& t : p.top_tracks) EXPECT_TRUE(own.count(ds.track_id(t.track)));
  }
}

TEST(TopTracks, KBeyondTrackCountAndTieOrder) {
  std::vector<ingest::ListeningEvent> events{ev(1, 5), ev(1, 7), ev(1, 9), ev(1, 9)};
  const auto ds = ingest::Dataset::build(events, {{1, user(1, "AT")}});
  const auto prof = cluster_top_tracks(ds, {0}, {}, 10);
  ASSERT_EQ(prof[0].top_tracks.size(), 3u);
  EXPECT_EQ(prof[0].top_tracks[0].track, 2);
  EXPECT_EQ(prof[0].top_tracks[1].track, 0);
  EXPECT_EQ(prof[0].top_tracks[2].track, 1);
}

TEST(TopTracks, PlaycountsBoundedByGlobalAndNoiseExcluded) {
  const auto d = small_synth(0.8);
  const auto ds = ingest::Dataset::build(d.events, d.users);
  std::vector<int> labels(ds.n_countries());
  for (int c = 0; c < ds.n_countries(); ++c) labels[c] = c == 0 ? -1 : d.archetype_of.at(ds.country_code(c));
  const auto prof = cluster_top_tracks(ds, labels, {}, ds.n_tracks());
  std::vector<std::int64_t> summed(ds.n_tracks(), 0);
  for (const auto& p : prof) {
    for (const auto& t : p.top_tracks) summed[t.track] += t.playcount;
  }
  for (int t = 0; t < ds.n_tracks(); ++t) EXPECT_LE(summed[t], ds.track_playcounts()[t]);
  const auto again = cluster_top_tracks(ds, labels, {}, ds.n_tracks());
  ASSERT_EQ(again.size(), prof.size());
  for (std::size_t c = 0; c < prof.size(); ++c) {
    ASSERT_EQ(again[c].top_tracks.size(), prof[c].top_tracks.size());
    for (std::size_t r = 0; r < prof[c].top_tracks.size(); ++r) {
      EXPECT_EQ(again[c].top_tracks[r].track, prof[c].top_tracks[r].track);
    }
  }
  EXPECT_THROW(cluster_top_tracks(ds, {0}, {}, 5), Error);
}

TEST(TopTracks, GenreCounts) {
  std::vector<ingest::ListeningEvent> events{ev(1, 5), ev(1, 7), ev(1, 7)};
  const auto ds = ingest::Dataset::build(events, {{1, user(1, "AT")}});
  TrackTags tags{{5, {"rock"}}, {7, {"rock", "pop"}}};
  const auto prof = cluster_top_tracks(ds, {0}, {}, 10, &tags);
  EXPECT_EQ(prof[0].genre_counts.at("rock"), 2);
  EXPECT_EQ(prof[0].genre_counts.at("pop"), 1);
}

TEST(Quantiles, LinearInterpolation) {
  EXPECT_DOUBLE_EQ(quantile_sorted({20, 30}, 0.5), 25.0);
  EXPECT_DOUBLE_EQ(quantile_sorted({1, 2, 3, 4}, 0.25), 1.75);
  EXPECT_DOUBLE_EQ(quantile_sorted({1, 2, 3, 4}, 0.75), 3.25);
  EXPECT_DOUBLE_EQ(quantile_sorted({7}, 0.3), 7.0);
}

TEST(Demographics, RatioAndAges) {
  std::vector<ingest::ListeningEvent> events;
  ingest::UserTable users;
  for (int u = 0; u < 9; ++u) {
    users[u] = user(u, "AT");
    users[u].gender = u < 3 ? ingest::Gender::kFemale : ingest::Gender::kMale;
    users[u].playcount = 10 * u;
    if (u < 2) users[u].age = 20 + 10 * u;
    events.push_back(ev(u, 1));
  }
  users[9] = user(9, "DE");
  users[9].gender = ingest::Gender::kFemale;
  events.push_back(ev(9, 1));
  const auto ds = ingest::Dataset::build(events, users);
  const auto d = cluster_demographics(ds, {0, 1});
  ASSERT_EQ(d.size(), 2u);
  EXPECT_DOUBLE_EQ(d[0].female_male_ratio, 0.5);
  EXPECT_EQ(d[0].n_with_age, 2);
  EXPECT_DOUBLE_EQ(d[0].age.median, 25.0);
  EXPECT_DOUBLE_EQ(d[0].mean_playcount_per_user, 40.0);
  EXPECT_TRUE(d[1].ratio_undefined);
  EXPECT_TRUE(std::isinf(d[1].female_male_ratio));
}

TEST(Demographics, MatchesRecountOnSyntheticCluster) {
  const auto d = small_synth(0.9);
  const auto ds = ingest::Dataset::build(d.events, d.users);
  std::vector<int> labels(ds.n_countries());
  for (int c = 0; c < ds.n_countries(); ++c) labels[c] = d.archetype_of.at(ds.country_code(c));
  const auto dem = cluster_demographics(ds, labels);
  for (const auto& g : dem) {
    std::vector<double> ages;
    int f = 0, m = 0;
    double pc = 0;
    int n = 0;
    for (int u = 0; u < ds.n_users(); ++u) {
      if (labels[ds.user_country(u)] != g.cluster_id) continue;
      const auto& r = ds.user_record(u);
      ++n;
      pc += static_cast<double>(r.playcount);
      if (r.age) ages.push_back(*r.age);
      f += r.gender == ingest::Gender::kFemale;
      m += r.gender == ingest::Gender::kMale;
    }
    std::sort(ages.begin(), ages.end());
    EXPECT_EQ(g.n_users, n);
    EXPECT_DOUBLE_EQ(g.female_male_ratio, static_cast<double>(f) / m);
    EXPECT_DOUBLE_EQ(g.age.q1, quantile_sorted(ages, 0.25));
    EXPECT_DOUBLE_EQ(g.age.median, quantile_sorted(ages, 0.5));
    EXPECT_DOUBLE_EQ(g.age.max, ages.back());
    EXPECT_NEAR(g.mean_playcount_per_user, pc / n, 1e-12);
  }
}

TEST(Report, CsvHeaderAndRows) {
  std::vector<ingest::ListeningEvent> events{ev(1, 5), ev(1, 7), ev(1, 7)};
  const auto ds = ingest::Dataset::build(events, {{1, user(1, "AT")}});
  const auto st = compute_idf(ds);
  TrackTags tags{{7, {"rock", "pop"}}};
  const auto csv = report_csv(ds, cluster_top_tracks(ds, {0}, {}, 10, &tags), st, &tags);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "cluster_id,rank,track_id,playcount,idf,tags");
  EXPECT_NE(csv.find("0,1,7,2,"), std::string::npos);
  EXPECT_NE(csv.find("0,2,5,1,"), std::string::npos);
}
