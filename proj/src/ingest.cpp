#include "archrec/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "archrec/common.hpp"
#include "archrec/io.hpp"

namespace archrec::ingest {

namespace {

std::optional<std::int64_t> parse_int(std::string_view s) {
  std::int64_t v = 0;
  const auto* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || p != end) return std::nullopt;
  return v;
}

std::vector<std::string_view> split_tabs(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find('\t', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

template <class Row, class F>
Parsed<Row> parse_file(const std::filesystem::path& path, F&& parse_line) {
  std::ifstream in(path);
  if (!in) throw Error("ingest", "cannot read " + path.string());
  Parsed<Row> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    if (auto row = parse_line(line)) {
      out.rows.push_back(std::move(*row));
    } else {
      ++out.skipped;
    }
  }
  return out;
}

}  // namespace

void FilterConfig::validate() const {
  if (min_track_playcount < 1 || min_country_les < 1 || min_country_users < 1) {
    throw Error("ingest", "filter thresholds must all be >= 1");
  }
}

std::optional<std::string> normalize_country(std::string_view raw) {
  if (raw.empty()) return std::nullopt;
  std::string code(raw);
  for (auto& c : code) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return code;
}

std::optional<ListeningEvent> parse_event_line(std::string_view line) {
  const auto f = split_tabs(line);
  if (f.size() != 5) return std::nullopt;
  std::int64_t v[5];
  for (int i = 0; i < 5; ++i) {
    auto p = parse_int(f[i]);
    if (!p || *p < 0) return std::nullopt;
    v[i] = *p;
  }
  return ListeningEvent{v[0], v[1], v[2], v[3], v[4]};
}

std::optional<UserRecord> parse_user_line(std::string_view line) {
  const auto f = split_tabs(line);
  if (f.size() != 5) return std::nullopt;
  UserRecord u;
  auto id = parse_int(f[0]);
  if (!id || *id < 0) return std::nullopt;
  u.user_id = *id;
  u.country = normalize_country(f[1]);
  if (u.country && (u.country->size() != 2 || !std::isupper(static_cast<unsigned char>((*u.country)[0])) ||
                    !std::isupper(static_cast<unsigned char>((*u.country)[1])))) {
    return std::nullopt;
  }
  if (!f[2].empty()) {
    auto age = parse_int(f[2]);
    if (!age) return std::nullopt;
    // Out-of-range self-reported ages are treated as undisclosed.
    if (*age >= 0 && *age <= 150) u.age = static_cast<int>(*age);
  }
  if (f[3] == "m") {
    u.gender = Gender::kMale;
  } else if (f[3] == "f") {
    u.gender = Gender::kFemale;
  } else if (!f[3].empty()) {
    return std::nullopt;
  }
  auto pc = parse_int(f[4]);
  if (!pc || *pc < 0) return std::nullopt;
  u.playcount = *pc;
  return u;
}

Parsed<ListeningEvent> parse_events(const std::filesystem::path& path) {
  return parse_file<ListeningEvent>(path, parse_event_line);
}

Parsed<UserRecord> parse_users(const std::filesystem::path& path) {
  return parse_file<UserRecord>(path, parse_user_line);
}

void write_events(const std::filesystem::path& path, std::span<const ListeningEvent> events) {
  std::ostringstream out;
  for (const auto& e : events) {
    out << e.user_id << '\t' << e.artist_id << '\t' << e.album_id << '\t' << e.track_id << '\t'
        << e.timestamp << '\n';
  }
  io::write_text(path, out.str());
}

void write_users(const std::filesystem::path& path, const UserTable& users) {
  std::ostringstream out;
  for (const auto& [id, u] : users) {
    out << id << '\t' << u.country.value_or("") << '\t';
    if (u.age) out << *u.age;
    out << '\t';
    if (u.gender == Gender::kMale) out << 'm';
    if (u.gender == Gender::kFemale) out << 'f';
    out << '\t' << u.playcount << '\n';
  }
  io::write_text(path, out.str());
}

Dataset Dataset::build(std::vector<ListeningEvent> events, const UserTable& users) {
  Dataset ds;
  std::set<std::int64_t> track_set, user_set;
  std::set<std::string> country_set;
  for (const auto& e : events) {
    auto it = users.find(e.user_id);
    if (it == users.end()) {
      throw Error("ingest", "event references unknown user " + std::to_string(e.user_id));
    }
    if (!it->second.country) {
      throw Error("ingest", "event user " + std::to_string(e.user_id) + " has no country");
    }
    track_set.insert(e.track_id);
    user_set.insert(e.user_id);
    country_set.insert(*it->second.country);
  }
  ds.track_ids_.assign(track_set.begin(), track_set.end());
  ds.countries_.assign(country_set.begin(), country_set.end());
  ds.user_ids_.assign(user_set.begin(), user_set.end());
  for (int i = 0; i < ds.n_tracks(); ++i) ds.track_lookup_[ds.track_ids_[i]] = i;
  for (int i = 0; i < ds.n_users(); ++i) ds.user_lookup_[ds.user_ids_[i]] = i;
  for (auto id : ds.user_ids_) ds.users_.emplace(id, users.at(id));

  ds.user_country_.resize(ds.user_ids_.size());
  for (int u = 0; u < ds.n_users(); ++u) {
    ds.user_country_[u] = *ds.country_index(*ds.users_.at(ds.user_ids_[u]).country);
  }

  std::vector<std::size_t> per_user(ds.user_ids_.size(), 0);
  for (const auto& e : events) ++per_user[ds.user_lookup_.at(e.user_id)];
  ds.event_offsets_.assign(ds.user_ids_.size() + 1, 0);
  for (std::size_t u = 0; u < per_user.size(); ++u) ds.event_offsets_[u + 1] = ds.event_offsets_[u] + per_user[u];
  ds.event_tracks_.resize(events.size());
  std::vector<std::size_t> cursor(ds.event_offsets_.begin(), ds.event_offsets_.end() - 1);
  ds.track_playcount_.assign(ds.track_ids_.size(), 0);
  for (const auto& e : events) {
    const int t = ds.track_lookup_.at(e.track_id);
    ds.event_tracks_[cursor[ds.user_lookup_.at(e.user_id)]++] = t;
    ++ds.track_playcount_[t];
  }
  ds.events_ = std::move(events);
  return ds;
}

std::optional<int> Dataset::track_index(std::int64_t track_id) const {
  auto it = track_lookup_.find(track_id);
  if (it == track_lookup_.end()) return std::nullopt;
  return it->second;
}

std::optional<int> Dataset::country_index(std::string_view code) const {
  auto it = std::lower_bound(countries_.begin(), countries_.end(), code);
  if (it == countries_.end() || *it != code) return std::nullopt;
  return static_cast<int>(it - countries_.begin());
}

std::optional<int> Dataset::user_index(std::int64_t user_id) const {
  auto it = user_lookup_.find(user_id);
  if (it == user_lookup_.end()) return std::nullopt;
  return it->second;
}

std::span<const int> Dataset::user_events(int dense_user) const {
  const auto b = event_offsets_[dense_user];
  const auto e = event_offsets_[dense_user + 1];
  return {event_tracks_.data() + b, e - b};
}

Dataset apply_filters(std::span<const ListeningEvent> events, const UserTable& users,
                      const FilterConfig& cfg, FilterReport* report) {
  cfg.validate();
  FilterReport rep;

  // (a) country-known users only.
  std::vector<const ListeningEvent*> kept;
  kept.reserve(events.size());
  for (const auto& e : events) {
    auto it = users.find(e.user_id);
    if (it == users.end() || !it->second.country) continue;
    kept.push_back(&e);
  }
  for (const auto& [id, u] : users) {
    if (!u.country) ++rep.users_without_country;
  }

  bool changed = true;
  while (changed) {
    changed = false;
    ++rep.passes;

    // (b) global track playcount over the remaining events.
    std::unordered_map<std::int64_t, std::int64_t> track_counts;
    for (const auto* e : kept) ++track_counts[e->track_id];
    std::size_t before = kept.size();
    std::erase_if(kept, [&](const ListeningEvent* e) {
      return track_counts[e->track_id] < cfg.min_track_playcount;
    });
    for (const auto& [t, n] : track_counts) {
      if (n < cfg.min_track_playcount) ++rep.tracks_dropped;
    }
    if (kept.size() != before) changed = true;

    // (c) country LE and user thresholds on what is left.
    std::map<std::string, std::int64_t> country_les;
    std::map<std::string, std::set<std::int64_t>> country_users;
    for (const auto* e : kept) {
      const auto& c = *users.at(e->user_id).country;
      ++country_les[c];
      country_users[c].insert(e->user_id);
    }
    std::set<std::string> bad;
    for (const auto& [c, n] : country_les) {
      if (n < cfg.min_country_les ||
          static_cast<std::int64_t>(country_users[c].size()) < cfg.min_country_users) {
        bad.insert(c);
      }
    }
    rep.countries_dropped += bad.size();
    if (!bad.empty()) {
      std::erase_if(kept, [&](const ListeningEvent* e) { return bad.count(*users.at(e->user_id).country) > 0; });
      changed = true;
    }
    if (!cfg.iterate_to_fixpoint) break;
  }

  rep.events_kept = kept.size();
  if (report) *report = rep;
  if (kept.empty()) {
    std::ostringstream msg;
    msg << "no data survives filtering (input events " << events.size() << ", users without country "
        << rep.users_without_country << ", tracks dropped " << rep.tracks_dropped << ", countries dropped "
        << rep.countries_dropped << ")";
    throw Error("ingest", msg.str());
  }
  std::vector<ListeningEvent> out;
  out.reserve(kept.size());
  for (const auto* e : kept) out.push_back(*e);
  return Dataset::build(std::move(out), users);
}

Dataset load_dataset(const std::filesystem::path& dir) {
  auto events = parse_events(dir / "events.tsv");
  auto users = parse_users(dir / "users.tsv");
  UserTable table;
  for (auto& u : users.rows) table.emplace(u.user_id, std::move(u));
  return Dataset::build(std::move(events.rows), table);
}

void save_dataset(const std::filesystem::path& dir, const Dataset& ds) {
  write_events(dir / "events.tsv", ds.events());
  write_users(dir / "users.tsv", ds.users());
}

}  // namespace archrec::ingest
