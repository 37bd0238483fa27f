#include "archrec/user_matrix.hpp"

#include <algorithm>
#include <map>

namespace archrec {

double SparseRow::sum() const {
  double s = 0.0;
  for (double v : values) s += v;
  return s;
}

bool SparseRow::contains(int track) const { return std::binary_search(tracks.begin(), tracks.end(), track); }

SparseRow counts_from_events(std::span<const int> event_tracks) {
  std::map<int, double> counts;
  for (int t : event_tracks) counts[t] += 1.0;
  SparseRow row;
  row.tracks.reserve(counts.size());
  row.values.reserve(counts.size());
  for (const auto& [t, c] : counts) {
    row.tracks.push_back(t);
    row.values.push_back(c);
  }
  return row;
}

UserMatrix user_counts(const ingest::Dataset& ds) {
  UserMatrix m(ds.n_users());
  for (int u = 0; u < ds.n_users(); ++u) m[u] = counts_from_events(ds.user_events(u));
  return m;
}

}  // namespace archrec
