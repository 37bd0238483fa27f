#pragma once

// Independent reference implementations shared by the unit tests and the
// acceptance binary.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "archrec/cluster.hpp"
#include "archrec/ingest.hpp"

namespace oracle {

using archrec::ingest::FilterConfig;
using archrec::ingest::ListeningEvent;
using archrec::ingest::UserTable;

// Independent recount: (a) country-known users, then (b) track and (c)
// country thresholds alternated until stable (or once).
struct Survivors {
  std::set<std::int64_t> tracks;
  std::set<std::string> countries;
  std::size_t events = 0;
};

inline Survivors recount(const std::vector<ListeningEvent>& events, const UserTable& users, const FilterConfig& cfg) {
  std::vector<ListeningEvent> live;
  for (const auto& e : events) {
    auto it = users.find(e.user_id);
    if (it != users.end() && it->second.country) live.push_back(e);
  }
  for (int pass = 0;; ++pass) {
    std::map<std::int64_t, std::int64_t> plays;
    for (const auto& e : live) ++plays[e.track_id];
    std::vector<ListeningEvent> after_tracks;
    for (const auto& e : live) {
      if (plays[e.track_id] >= cfg.min_track_playcount) after_tracks.push_back(e);
    }
    std::map<std::string, std::int64_t> les;
    std::map<std::string, std::set<std::int64_t>> members;
    for (const auto& e : after_tracks) {
      const auto& c = *users.at(e.user_id).country;
      ++les[c];
      members[c].insert(e.user_id);
    }
    std::vector<ListeningEvent> after_countries;
    for (const auto& e : after_tracks) {
      const auto& c = *users.at(e.user_id).country;
      if (les[c] >= cfg.min_country_les && static_cast<std::int64_t>(members[c].size()) >= cfg.min_country_users) {
        after_countries.push_back(e);
      }
    }
    const bool stable = after_countries.size() == live.size();
    live = std::move(after_countries);
    if (stable || !cfg.iterate_to_fixpoint) break;
  }
  Survivors s;
  for (const auto& e : live) {
    s.tracks.insert(e.track_id);
    s.countries.insert(*users.at(e.user_id).country);
  }
  s.events = live.size();
  return s;
}

// Quadratic OPTICS: repeatedly process the unprocessed point with the
// smallest reachability (lowest index on ties) and relax every other point.
inline archrec::cluster::OpticsOrdering reference_optics(const Eigen::MatrixXd& pts, int min_size) {
  const int n = static_cast<int>(pts.rows());
  archrec::cluster::OpticsOrdering o;
  o.reachability.assign(n, std::numeric_limits<double>::infinity());
  o.core_distance.assign(n, std::numeric_limits<double>::infinity());
  o.predecessor.assign(n, -1);
  for (int i = 0; i < n; ++i) {
    std::vector<double> d;
    for (int j = 0; j < n; ++j) d.push_back((pts.row(i) - pts.row(j)).norm());
    std::sort(d.begin(), d.end());
    o.core_distance[i] = d[min_size - 1];
  }
  std::vector<bool> done(n, false);
  for (int step = 0; step < n; ++step) {
    int p = -1;
    for (int i = 0; i < n; ++i) {
      if (!done[i] && (p < 0 || o.reachability[i] < o.reachability[p])) p = i;
    }
    done[p] = true;
    o.order.push_back(p);
    for (int q = 0; q < n; ++q) {
      if (done[q]) continue;
      const double r = std::max(o.core_distance[p], (pts.row(p) - pts.row(q)).norm());
      if (r < o.reachability[q]) o.reachability[q] = r, o.predecessor[q] = p;
    }
  }
  return o;
}

struct RankScores {
  double precision, recall, ndcg;
};

// Straight from the definitions; recall divides by min(K, |holdout|).
inline RankScores brute_metrics(const std::vector<int>& recs, const std::vector<int>& holdout, int k) {
  const std::set<int> h(holdout.begin(), holdout.end());
  double hits = 0, dcg = 0, idcg = 0;
  for (int i = 0; i < k && i < static_cast<int>(recs.size()); ++i) {
    if (h.count(recs[i])) hits += 1, dcg += 1.0 / std::log2(i + 2.0);
  }
  const int m = std::min<int>(k, static_cast<int>(h.size()));
  for (int i = 0; i < m; ++i) idcg += 1.0 / std::log2(i + 2.0);
  return {hits / k, m ? hits / m : 0.0, idcg > 0 ? dcg / idcg : 0.0};
}

}  // namespace oracle
