#pragma once

#include <span>
#include <vector>

#include "archrec/ingest.hpp"

namespace archrec {

// Sparse nonnegative vector over dense track indices, sorted by track.
struct SparseRow {
  std::vector<int> tracks;
  std::vector<double> values;

  std::size_t nnz() const { return tracks.size(); }
  double sum() const;
  bool contains(int track) const;
};

using UserMatrix = std::vector<SparseRow>;

// Playcount row from a list of per-event track indices.
SparseRow counts_from_events(std::span<const int> event_tracks);

// One row per dense user with full listening counts.
UserMatrix user_counts(const ingest::Dataset& ds);

}  // namespace archrec
