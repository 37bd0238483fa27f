#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "archrec/ingest.hpp"

namespace testutil {

namespace fs = std::filesystem;

inline archrec::ingest::ListeningEvent ev(std::int64_t user, std::int64_t track, std::int64_t ts = 0) {
  return {user, track / 10, track / 5, track, ts};
}

inline archrec::ingest::UserRecord user(std::int64_t id, std::string country) {
  archrec::ingest::UserRecord u;
  u.user_id = id;
  if (!country.empty()) u.country = std::move(country);
  return u;
}

// Fresh directory per test under the system temp dir.
inline fs::path temp_dir(const std::string& tag) {
  const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
  fs::path p = fs::temp_directory_path() / "archrec_tests" /
               (std::string(info->test_suite_name()) + "_" + info->name() + "_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

inline archrec::ingest::FilterConfig no_filter() {
  archrec::ingest::FilterConfig f;
  f.min_track_playcount = 1;
  f.min_country_les = 1;
  f.min_country_users = 1;
  return f;
}

}  // namespace testutil
