#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace archrec::ingest {

struct ListeningEvent {
  std::int64_t user_id = 0;
  std::int64_t artist_id = 0;
  std::int64_t album_id = 0;
  std::int64_t track_id = 0;
  std::int64_t timestamp = 0;

  bool operator==(const ListeningEvent&) const = default;
};

enum class Gender { kAbsent, kMale, kFemale };

struct UserRecord {
  std::int64_t user_id = 0;
  std::optional<std::string> country;  // [A-Z]{2} after normalization
  std::optional<int> age;              // [0, 150]
  Gender gender = Gender::kAbsent;
  std::int64_t playcount = 0;

  bool operator==(const UserRecord&) const = default;
};

using UserTable = std::map<std::int64_t, UserRecord>;

struct FilterConfig {
  std::int64_t min_track_playcount = 1000;
  std::int64_t min_country_les = 80000;
  std::int64_t min_country_users = 25;
  // Repeat the track and country filters until nothing changes, so the
  // result is a fixpoint (dropping a country can push a track below the
  // threshold).
  bool iterate_to_fixpoint = true;

  void validate() const;
};

template <class Row>
struct Parsed {
  std::vector<Row> rows;
  std::size_t skipped = 0;  // malformed rows
};

// Tab-separated: user_id, artist_id, album_id, track_id, timestamp.
std::optional<ListeningEvent> parse_event_line(std::string_view line);
Parsed<ListeningEvent> parse_events(const std::filesystem::path& path);

// Tab-separated: user_id, country, age, gender (m/f/empty), playcount.
std::optional<UserRecord> parse_user_line(std::string_view line);
Parsed<UserRecord> parse_users(const std::filesystem::path& path);

void write_events(const std::filesystem::path& path, std::span<const ListeningEvent> events);
void write_users(const std::filesystem::path& path, const UserTable& users);

// Filtered, densely indexed dataset. Immutable after construction.
//  - tracks are indexed by ascending track_id, countries by ascending code,
//    users by ascending user_id;
//  - every user has a country and at least one event.
class Dataset {
 public:
  static Dataset build(std::vector<ListeningEvent> events, const UserTable& users);

  const std::vector<ListeningEvent>& events() const { return events_; }
  const UserTable& users() const { return users_; }

  int n_users() const { return static_cast<int>(user_ids_.size()); }
  int n_tracks() const { return static_cast<int>(track_ids_.size()); }
  int n_countries() const { return static_cast<int>(countries_.size()); }
  std::size_t n_events() const { return events_.size(); }

  std::int64_t track_id(int dense) const { return track_ids_[dense]; }
  std::optional<int> track_index(std::int64_t track_id) const;
  const std::string& country_code(int dense) const { return countries_[dense]; }
  const std::vector<std::string>& country_codes() const { return countries_; }
  std::optional<int> country_index(std::string_view code) const;
  std::int64_t user_id(int dense) const { return user_ids_[dense]; }
  std::optional<int> user_index(std::int64_t user_id) const;
  const UserRecord& user_record(int dense) const { return users_.at(user_ids_[dense]); }

  int user_country(int dense_user) const { return user_country_[dense_user]; }
  const std::vector<int>& user_countries() const { return user_country_; }

  // Dense track index of every event of a user, in file order.
  std::span<const int> user_events(int dense_user) const;

  // Total LEs per dense track.
  const std::vector<std::int64_t>& track_playcounts() const { return track_playcount_; }

 private:
  std::vector<ListeningEvent> events_;
  UserTable users_;
  std::vector<std::int64_t> track_ids_;
  std::unordered_map<std::int64_t, int> track_lookup_;
  std::vector<std::string> countries_;
  std::vector<std::int64_t> user_ids_;
  std::unordered_map<std::int64_t, int> user_lookup_;
  std::vector<int> user_country_;
  std::vector<std::size_t> event_offsets_;  // CSR over users
  std::vector<int> event_tracks_;
  std::vector<std::int64_t> track_playcount_;
};

struct FilterReport {
  std::size_t users_without_country = 0;
  std::size_t tracks_dropped = 0;
  std::size_t countries_dropped = 0;
  std::size_t events_kept = 0;
  int passes = 0;
};

// (a) drop users without a country, (b) drop tracks with fewer than
// min_track_playcount LEs, (c) drop countries with fewer than
// min_country_les LEs or fewer than min_country_users users (users with a
// surviving LE). Throws Error("ingest") when nothing survives.
Dataset apply_filters(std::span<const ListeningEvent> events, const UserTable& users,
                      const FilterConfig& cfg, FilterReport* report = nullptr);

// Uppercases a code; returns nullopt for empty input.
std::optional<std::string> normalize_country(std::string_view raw);

// Reads "<dir>/events.tsv" and "<dir>/users.tsv" and builds a Dataset
// without filtering. Used for artifact directories written by ingest/synth.
Dataset load_dataset(const std::filesystem::path& dir);
void save_dataset(const std::filesystem::path& dir, const Dataset& ds);

}  // namespace archrec::ingest
