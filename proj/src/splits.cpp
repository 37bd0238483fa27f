#include "archrec/splits.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "archrec/common.hpp"
#include "archrec/io.hpp"

namespace archrec::eval {

void SplitSpec::validate(int n_users) const {
  if (n_val_users < 0 || n_test_users < 0) throw Error("eval", "split sizes must be >= 0");
  if (n_val_users + n_test_users >= n_users) {
    throw Error("eval", "validation + test users (" + std::to_string(n_val_users + n_test_users) +
                            ") must be fewer than all users (" + std::to_string(n_users) + ")");
  }
  if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0)) throw Error("eval", "holdout_fraction must be in (0, 1)");
}

HeldOutUser materialize(const ingest::Dataset& ds, int user, std::vector<int> holdout_positions, int min_events) {
  HeldOutUser h;
  h.user = user;
  const auto events = ds.user_events(user);
  std::sort(holdout_positions.begin(), holdout_positions.end());
  h.holdout_positions = std::move(holdout_positions);
  h.scored = static_cast<int>(events.size()) >= min_events && !h.holdout_positions.empty();
  std::vector<int> input_tracks;
  std::set<int> held;
  for (std::size_t i = 0, k = 0; i < events.size(); ++i) {
    if (k < h.holdout_positions.size() && h.holdout_positions[k] == static_cast<int>(i)) {
      held.insert(events[i]);
      ++k;
    } else {
      input_tracks.push_back(events[i]);
    }
  }
  h.input = counts_from_events(input_tracks);
  for (int t : held) {
    if (!h.input.contains(t)) h.holdout.push_back(t);
  }
  if (h.holdout.empty()) h.scored = false;
  return h;
}

Splits make_splits(const ingest::Dataset& ds, const SplitSpec& spec) {
  spec.validate(ds.n_users());
  std::mt19937_64 rng(spec.seed);
  std::vector<int> users(ds.n_users());
  std::iota(users.begin(), users.end(), 0);
  std::shuffle(users.begin(), users.end(), rng);

  auto hold = [&](int u) {
    const auto n = static_cast<int>(ds.user_events(u).size());
    std::vector<int> positions;
    if (n >= spec.min_events) {
      const int h = std::clamp(static_cast<int>(std::lround(spec.holdout_fraction * n)), 1, n - 1);
      std::vector<int> all(n);
      std::iota(all.begin(), all.end(), 0);
      std::shuffle(all.begin(), all.end(), rng);
      positions.assign(all.begin(), all.begin() + h);
    }
    return materialize(ds, u, std::move(positions), spec.min_events);
  };

  Splits s;
  std::vector<int> val(users.begin(), users.begin() + spec.n_val_users);
  std::vector<int> test(users.begin() + spec.n_val_users, users.begin() + spec.n_val_users + spec.n_test_users);
  s.train.assign(users.begin() + spec.n_val_users + spec.n_test_users, users.end());
  std::sort(val.begin(), val.end());
  std::sort(test.begin(), test.end());
  std::sort(s.train.begin(), s.train.end());
  for (int u : val) s.validation.push_back(hold(u));
  for (int u : test) s.test.push_back(hold(u));
  return s;
}

void save_splits(const std::filesystem::path& dir, const ingest::Dataset& ds, const Splits& splits) {
  std::ostringstream out;
  auto put = [&](int u, const char* role, const std::vector<int>& pos) {
    out << ds.user_id(u) << '\t' << role << '\t';
    for (std::size_t i = 0; i < pos.size(); ++i) out << (i ? "," : "") << pos[i];
    out << '\n';
  };
  for (int u : splits.train) put(u, "train", {});
  for (const auto& h : splits.validation) put(h.user, "val", h.holdout_positions);
  for (const auto& h : splits.test) put(h.user, "test", h.holdout_positions);
  io::write_text(dir / "splits.tsv", out.str());
}

Splits load_splits(const std::filesystem::path& dir, const ingest::Dataset& ds, int min_events) {
  Splits s;
  for (const auto& line : io::read_lines(dir / "splits.tsv")) {
    if (line.empty()) continue;
    const auto f = io::split(line, '\t');
    if (f.size() != 3) throw Error("eval", "malformed splits line: " + line);
    const auto u = ds.user_index(std::stoll(f[0]));
    if (!u) throw Error("eval", "splits reference unknown user " + f[0]);
    std::vector<int> pos;
    if (!f[2].empty()) {
      for (const auto& p : io::split(f[2], ',')) pos.push_back(std::stoi(p));
    }
    if (f[1] == "train") {
      s.train.push_back(*u);
    } else if (f[1] == "val") {
      s.validation.push_back(materialize(ds, *u, std::move(pos), min_events));
    } else if (f[1] == "test") {
      s.test.push_back(materialize(ds, *u, std::move(pos), min_events));
    } else {
      throw Error("eval", "unknown split role " + f[1]);
    }
  }
  return s;
}

}  // namespace archrec::eval
