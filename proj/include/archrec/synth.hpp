#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "archrec/ingest.hpp"

namespace archrec::ingest {

// Planted-archetype generator. Countries are split among archetypes; each
// archetype owns a disjoint block of "signature" tracks. A user draws a
// fraction `skew` of their events from their country's distribution over the
// archetype block and the rest uniformly over all tracks.
struct SynthSpec {
  int n_countries = 45;
  int users_per_country = 45;
  int n_tracks = 3000;
  int archetype_count = 9;
  double skew = 0.9;
  std::uint64_t seed = 1;

  int min_events = 40;  // per user, inclusive
  int max_events = 120;
  double zipf_exponent = 1.0;
  // Weight of the country-specific permutation mixed into the archetype's
  // popularity profile; 0 makes all countries of an archetype identical.
  double country_specificity = 0.3;
  // Share of events drawn from one Zipf profile over all non-hit tracks,
  // shared by every country (before the block/uniform choice).
  double mainstream_share = 0.0;
  // Draw event counts log-uniformly in [min_events, max_events] instead of
  // uniformly, giving many light users and a few heavy ones.
  bool log_uniform_events = false;
  // Personal taste: block position r belongs to subgenre r % subgenres (so
  // every subgenre mixes popular and rare tracks) and every user draws Dirichlet(taste_concentration) weights over
  // them. Block draws use country weight * (1 - t + t * subgenres * w_user).
  double personal_taste = 0.0;
  int subgenres = 8;
  double taste_concentration = 0.3;
  // Tracks every user plays once in addition to their regular events.
  int global_hits = 0;
  // Optional per-country user counts (size n_countries) overriding
  // users_per_country.
  std::vector<int> users_per_country_override;

  void validate() const;
};

struct SynthData {
  std::vector<ListeningEvent> events;
  UserTable users;
  std::vector<std::string> country_codes;       // generator order
  std::map<std::string, int> archetype_of;      // country code -> planted label
  std::vector<std::int64_t> global_hit_track_ids;
  std::vector<std::vector<std::int64_t>> archetype_block_track_ids;
};

// Two-letter code for generator country i: AA, AB, ..., AZ, BA, ...
std::string synthetic_country_code(int i);

std::int64_t synthetic_track_id(int i);

SynthData generate_synthetic(const SynthSpec& spec);

}  // namespace archrec::ingest
