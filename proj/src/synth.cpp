#include "archrec/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "archrec/common.hpp"

namespace archrec::ingest {

namespace {

int sample_cdf(const std::vector<double>& cdf, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(0.0, cdf.back());
  const double u = unif(rng);
  auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  if (it == cdf.end()) --it;
  return static_cast<int>(it - cdf.begin());
}

}  // namespace

void SynthSpec::validate() const {
  auto fail = [](const std::string& m) { throw Error("synth", m); };
  if (n_countries < 1 || n_countries > 26 * 26) fail("n_countries must be in [1, 676]");
  if (archetype_count < 1 || archetype_count > n_countries) fail("archetype_count must be in [1, n_countries]");
  if (!(skew > 0.0 && skew <= 1.0)) fail("skew must be in (0, 1]");
  if (users_per_country < 1 && users_per_country_override.empty()) fail("users_per_country must be >= 1");
  if (!users_per_country_override.empty() &&
      static_cast<int>(users_per_country_override.size()) != n_countries) {
    fail("users_per_country_override must have n_countries entries");
  }
  if (global_hits < 0) fail("global_hits must be >= 0");
  if (n_tracks - global_hits < archetype_count) fail("need at least one signature track per archetype");
  if (min_events < 1 || max_events < min_events) fail("event range must satisfy 1 <= min <= max");
  if (mainstream_share < 0.0 || mainstream_share >= 1.0) fail("mainstream_share must be in [0, 1)");
  if (personal_taste < 0.0 || personal_taste > 1.0) fail("personal_taste must be in [0, 1]");
  if (personal_taste > 0.0 && (subgenres < 1 || !(taste_concentration > 0.0))) {
    fail("subgenres must be >= 1 and taste_concentration > 0");
  }
  if (country_specificity < 0.0 || country_specificity > 1.0) fail("country_specificity must be in [0, 1]");
}

std::string synthetic_country_code(int i) {
  return {static_cast<char>('A' + i / 26), static_cast<char>('A' + i % 26)};
}

std::int64_t synthetic_track_id(int i) { return 100000 + 7 * static_cast<std::int64_t>(i); }

SynthData generate_synthetic(const SynthSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  SynthData out;

  std::vector<int> archetype(spec.n_countries);
  for (int c = 0; c < spec.n_countries; ++c) archetype[c] = c % spec.archetype_count;
  std::shuffle(archetype.begin(), archetype.end(), rng);
  for (int c = 0; c < spec.n_countries; ++c) {
    out.country_codes.push_back(synthetic_country_code(c));
    out.archetype_of[out.country_codes.back()] = archetype[c];
  }

  for (int h = 0; h < spec.global_hits; ++h) out.global_hit_track_ids.push_back(synthetic_track_id(h));
  const int block_tracks = spec.n_tracks - spec.global_hits;
  std::vector<int> block_begin(spec.archetype_count + 1);
  for (int a = 0; a <= spec.archetype_count; ++a) {
    block_begin[a] = spec.global_hits + static_cast<int>(static_cast<long long>(block_tracks) * a / spec.archetype_count);
  }
  out.archetype_block_track_ids.resize(spec.archetype_count);
  for (int a = 0; a < spec.archetype_count; ++a) {
    for (int t = block_begin[a]; t < block_begin[a + 1]; ++t) {
      out.archetype_block_track_ids[a].push_back(synthetic_track_id(t));
    }
  }

  // Per-country cumulative distribution over its archetype block.
  std::vector<std::vector<double>> country_cdf(spec.n_countries), country_w(spec.n_countries);
  for (int c = 0; c < spec.n_countries; ++c) {
    const int a = archetype[c];
    const int len = block_begin[a + 1] - block_begin[a];
    std::vector<double> base(len);
    for (int r = 0; r < len; ++r) base[r] = 1.0 / std::pow(r + 1.0, spec.zipf_exponent);
    std::vector<int> perm(len);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<double> w(len);
    for (int r = 0; r < len; ++r) {
      w[r] = (1.0 - spec.country_specificity) * base[r] + spec.country_specificity * base[perm[r]];
    }
    country_w[c] = w;
    std::partial_sum(w.begin(), w.end(), w.begin());
    country_cdf[c] = std::move(w);
  }

  std::vector<double> mainstream_cdf;
  std::vector<int> mainstream_track;
  if (spec.mainstream_share > 0.0) {
    mainstream_track.resize(block_tracks);
    std::iota(mainstream_track.begin(), mainstream_track.end(), spec.global_hits);
    std::shuffle(mainstream_track.begin(), mainstream_track.end(), rng);
    mainstream_cdf.resize(block_tracks);
    for (int r = 0; r < block_tracks; ++r) mainstream_cdf[r] = 1.0 / std::pow(r + 1.0, spec.zipf_exponent);
    std::partial_sum(mainstream_cdf.begin(), mainstream_cdf.end(), mainstream_cdf.begin());
  }

  std::uniform_int_distribution<int> any_track(0, spec.n_tracks - 1);
  std::uniform_int_distribution<int> n_events(spec.min_events, spec.max_events);
  std::uniform_int_distribution<int> age_dist(15, 60);
  std::uniform_real_distribution<double> log_events(std::log(spec.min_events), std::log(spec.max_events + 1.0));
  std::bernoulli_distribution female(0.35), age_known(0.8), from_block(spec.skew);
  std::bernoulli_distribution from_mainstream(spec.mainstream_share);

  std::int64_t user_id = 1;
  std::int64_t clock = 1300000000;
  for (int c = 0; c < spec.n_countries; ++c) {
    const int n_users =
        spec.users_per_country_override.empty() ? spec.users_per_country : spec.users_per_country_override[c];
    const int a = archetype[c];
    for (int k = 0; k < n_users; ++k, ++user_id) {
      UserRecord u;
      u.user_id = user_id;
      u.country = out.country_codes[c];
      const bool has_age = age_known(rng);
      const int age = age_dist(rng);
      if (has_age) u.age = age;
      u.gender = female(rng) ? Gender::kFemale : Gender::kMale;
      const int n = spec.log_uniform_events
                        ? std::min(spec.max_events, static_cast<int>(std::floor(std::exp(log_events(rng)))))
                        : n_events(rng);
      auto emit = [&](int track) {
        const auto tid = synthetic_track_id(track);
        out.events.push_back({user_id, tid / 70, tid / 35, tid, clock++});
      };
      const std::vector<double>* block_cdf = &country_cdf[c];
      std::vector<double> user_cdf;
      if (spec.personal_taste > 0.0) {
        std::gamma_distribution<double> gamma(spec.taste_concentration, 1.0);
        std::vector<double> taste(spec.subgenres);
        double total = 0.0;
        for (auto& g : taste) total += (g = gamma(rng));
        const auto& w = country_w[c];
        const int len = static_cast<int>(w.size());
        user_cdf.resize(len);
        for (int r = 0; r < len; ++r) {
          const int g = r % spec.subgenres;
          const double share = total > 0.0 ? taste[g] / total : 1.0 / spec.subgenres;
          user_cdf[r] = w[r] * (1.0 - spec.personal_taste + spec.personal_taste * spec.subgenres * share);
        }
        std::partial_sum(user_cdf.begin(), user_cdf.end(), user_cdf.begin());
        block_cdf = &user_cdf;
      }
      for (int h = 0; h < spec.global_hits; ++h) emit(h);
      for (int e = 0; e < n; ++e) {
        if (spec.mainstream_share > 0.0 && from_mainstream(rng)) {
          emit(mainstream_track[sample_cdf(mainstream_cdf, rng)]);
        } else if (from_block(rng)) {
          emit(block_begin[a] + sample_cdf(*block_cdf, rng));
        } else {
          emit(any_track(rng));
        }
      }
      u.playcount = n + spec.global_hits;
      out.users.emplace(user_id, std::move(u));
    }
  }
  return out;
}

}  // namespace archrec::ingest
