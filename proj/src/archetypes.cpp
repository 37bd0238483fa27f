#include "archrec/archetypes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "archrec/common.hpp"
#include "archrec/io.hpp"

namespace archrec::archetypes {

TrackTags read_track_tags(const std::filesystem::path& path) {
  TrackTags tags;
  for (const auto& line : io::read_lines(path)) {
    if (io::trim(line).empty()) continue;
    const auto f = io::split(line, '\t');
    if (f.size() < 2) continue;
    std::vector<std::string> list;
    for (const auto& t : io::split(f[1], ',')) {
      auto tt = io::trim(t);
      if (!tt.empty()) list.push_back(std::move(tt));
    }
    tags[std::stoll(f[0])] = std::move(list);
  }
  return tags;
}

TrackStats compute_idf(const ingest::Dataset& ds) {
  TrackStats s;
  s.per_track_les = ds.track_playcounts();
  for (auto n : s.per_track_les) s.n_total_les += n;
  if (s.n_total_les < 1) throw Error("archetypes", "no listening events");
  s.idf.resize(s.per_track_les.size());
  const auto total = static_cast<double>(s.n_total_les);
  for (std::size_t t = 0; t < s.per_track_les.size(); ++t) {
    const auto n = s.per_track_les[t];
    s.idf[t] = n > 0 ? std::log10(total / static_cast<double>(n)) : std::numeric_limits<double>::quiet_NaN();
  }
  return s;
}

std::vector<int> filter_dominating(const TrackStats& stats, double threshold, DominatingRule rule) {
  std::vector<int> removed;
  for (std::size_t t = 0; t < stats.idf.size(); ++t) {
    const double v = stats.idf[t];
    if (std::isnan(v)) continue;
    const bool drop = rule == DominatingRule::kBelowThreshold ? v < threshold : v > threshold;
    if (drop) removed.push_back(static_cast<int>(t));
  }
  return removed;
}

std::vector<ClusterProfile> cluster_top_tracks(const ingest::Dataset& ds, const std::vector<int>& country_labels,
                                               const std::vector<int>& removed_tracks, int k,
                                               const TrackTags* tags) {
  if (static_cast<int>(country_labels.size()) != ds.n_countries()) {
    throw Error("archetypes", "assignment does not cover all countries");
  }
  const int n_clusters = country_labels.empty() ? 0 : *std::max_element(country_labels.begin(), country_labels.end()) + 1;
  std::vector<std::vector<std::int64_t>> counts(n_clusters, std::vector<std::int64_t>(ds.n_tracks(), 0));
  for (int u = 0; u < ds.n_users(); ++u) {
    const int c = country_labels[ds.user_country(u)];
    if (c < 0) continue;
    for (int t : ds.user_events(u)) ++counts[c][t];
  }
  std::vector<bool> removed(ds.n_tracks(), false);
  for (int t : removed_tracks) removed[t] = true;

  const auto demo = cluster_demographics(ds, country_labels);
  std::vector<ClusterProfile> out(n_clusters);
  for (int c = 0; c < n_clusters; ++c) {
    auto& prof = out[c];
    prof.cluster_id = c;
    prof.demographics = demo[c];
    std::vector<TopTrack> all;
    for (int t = 0; t < ds.n_tracks(); ++t) {
      if (!removed[t] && counts[c][t] > 0) all.push_back({t, counts[c][t]});
    }
    const auto kk = std::min<std::size_t>(static_cast<std::size_t>(std::max(k, 0)), all.size());
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(kk), all.end(),
                      [](const TopTrack& a, const TopTrack& b) {
                        return a.playcount != b.playcount ? a.playcount > b.playcount : a.track < b.track;
                      });
    all.resize(kk);
    prof.top_tracks = std::move(all);
    if (tags) {
      for (const auto& tt : prof.top_tracks) {
        auto it = tags->find(ds.track_id(tt.track));
        if (it == tags->end()) continue;
        for (const auto& g : it->second) ++prof.genre_counts[g];
      }
    }
  }
  return out;
}

double quantile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return 0.0;
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

std::vector<Demographics> cluster_demographics(const ingest::Dataset& ds, const std::vector<int>& country_labels) {
  const int n_clusters = country_labels.empty() ? 0 : *std::max_element(country_labels.begin(), country_labels.end()) + 1;
  std::vector<Demographics> out(n_clusters);
  std::vector<std::vector<double>> ages(n_clusters);
  std::vector<double> playcount_sum(n_clusters, 0.0);
  for (int u = 0; u < ds.n_users(); ++u) {
    const int c = country_labels[ds.user_country(u)];
    if (c < 0) continue;
    const auto& rec = ds.user_record(u);
    auto& d = out[c];
    ++d.n_users;
    if (rec.age) ages[c].push_back(*rec.age);
    if (rec.gender == ingest::Gender::kFemale) ++d.n_female;
    if (rec.gender == ingest::Gender::kMale) ++d.n_male;
    playcount_sum[c] += static_cast<double>(rec.playcount);
  }
  for (int c = 0; c < n_clusters; ++c) {
    auto& d = out[c];
    d.cluster_id = c;
    auto& a = ages[c];
    std::sort(a.begin(), a.end());
    d.n_with_age = static_cast<int>(a.size());
    if (!a.empty()) {
      d.age = {a.front(), quantile_sorted(a, 0.25), quantile_sorted(a, 0.5), quantile_sorted(a, 0.75), a.back()};
    }
    if (d.n_male > 0) {
      d.female_male_ratio = static_cast<double>(d.n_female) / d.n_male;
    } else {
      d.female_male_ratio = std::numeric_limits<double>::infinity();
      d.ratio_undefined = true;
    }
    d.mean_playcount_per_user = d.n_users > 0 ? playcount_sum[c] / d.n_users : 0.0;
  }
  return out;
}

std::string report_csv(const ingest::Dataset& ds, const std::vector<ClusterProfile>& profiles,
                       const TrackStats& stats, const TrackTags* tags) {
  std::ostringstream out;
  out << "cluster_id,rank,track_id,playcount,idf,tags\n";
  for (const auto& p : profiles) {
    for (std::size_t r = 0; r < p.top_tracks.size(); ++r) {
      const auto& t = p.top_tracks[r];
      std::string tag_field;
      if (tags) {
        auto it = tags->find(ds.track_id(t.track));
        if (it != tags->end()) {
          for (std::size_t i = 0; i < it->second.size(); ++i) {
            if (i) tag_field += ';';
            tag_field += it->second[i];
          }
        }
      }
      out << p.cluster_id << ',' << r + 1 << ',' << ds.track_id(t.track) << ',' << t.playcount << ','
          << io::format_double(stats.idf[t.track]) << ',' << tag_field << '\n';
    }
  }
  return out.str();
}

}  // namespace archrec::archetypes
