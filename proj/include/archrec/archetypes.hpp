#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "archrec/ingest.hpp"

namespace archrec::archetypes {

struct TrackStats {
  std::int64_t n_total_les = 0;                 // N
  std::vector<std::int64_t> per_track_les;      // n_i per dense track
  std::vector<double> idf;                      // log10(N / n_i); NaN when n_i == 0
};

enum class DominatingRule {
  kBelowThreshold,  // remove IDF < threshold (frequent tracks)
  kAboveThreshold,  // remove IDF > threshold
};

struct TopTrack {
  int track = 0;  // dense index
  std::int64_t playcount = 0;
};

struct Quartiles {
  double min = 0, q1 = 0, median = 0, q3 = 0, max = 0;
};

struct Demographics {
  int cluster_id = 0;
  int n_users = 0;
  int n_with_age = 0;
  Quartiles age;  // zeros when no user reports an age
  int n_female = 0;
  int n_male = 0;
  double female_male_ratio = 0.0;  // +inf when no males
  bool ratio_undefined = false;    // set together with the +inf sentinel
  double mean_playcount_per_user = 0.0;
};

struct ClusterProfile {
  int cluster_id = 0;
  std::vector<TopTrack> top_tracks;  // playcount desc, track asc
  std::map<std::string, int> genre_counts;
  Demographics demographics;
};

// Tag file: track_id <TAB> comma-separated tags.
using TrackTags = std::map<std::int64_t, std::vector<std::string>>;
TrackTags read_track_tags(const std::filesystem::path& path);

TrackStats compute_idf(const ingest::Dataset& ds);

// Dense indices of tracks excluded from archetype reporting.
std::vector<int> filter_dominating(const TrackStats& stats, double threshold = 4.2,
                                   DominatingRule rule = DominatingRule::kBelowThreshold);

// country_labels: per dense country, -1 for noise. Returns one profile per
// cluster id in [0, n_clusters). Removed tracks never appear in top lists.
std::vector<ClusterProfile> cluster_top_tracks(const ingest::Dataset& ds, const std::vector<int>& country_labels,
                                               const std::vector<int>& removed_tracks, int k = 10,
                                               const TrackTags* tags = nullptr);

// Linear-interpolation quantile (numpy's default) of a sorted sample.
double quantile_sorted(const std::vector<double>& sorted, double q);

std::vector<Demographics> cluster_demographics(const ingest::Dataset& ds, const std::vector<int>& country_labels);

// CSV: cluster_id,rank,track_id,playcount,idf,tags
std::string report_csv(const ingest::Dataset& ds, const std::vector<ClusterProfile>& profiles,
                       const TrackStats& stats, const TrackTags* tags);

}  // namespace archrec::archetypes
