#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "archrec/ingest.hpp"
#include "archrec/user_matrix.hpp"

namespace archrec::eval {

struct SplitSpec {
  int n_val_users = 5000;
  int n_test_users = 5000;
  double holdout_fraction = 0.2;
  int min_events = 5;  // fewer events: everything is input, user not scored
  std::uint64_t seed = 0;

  void validate(int n_users) const;
};

struct HeldOutUser {
  int user = 0;                           // dense user index
  std::vector<int> holdout_positions;     // positions into Dataset::user_events
  SparseRow input;                        // counts of the input events
  std::vector<int> holdout;               // sorted tracks heard only in holdout
  bool scored = false;
};

struct Splits {
  std::vector<int> train;  // dense user indices, ascending
  std::vector<HeldOutUser> validation;
  std::vector<HeldOutUser> test;
};

Splits make_splits(const ingest::Dataset& ds, const SplitSpec& spec);

// Rebuild input/holdout vectors from stored holdout positions.
HeldOutUser materialize(const ingest::Dataset& ds, int user, std::vector<int> holdout_positions, int min_events);

// splits.tsv: user_id <TAB> train|val|test <TAB> comma-separated holdout
// event positions (empty for train users and unscored users).
void save_splits(const std::filesystem::path& dir, const ingest::Dataset& ds, const Splits& splits);
Splits load_splits(const std::filesystem::path& dir, const ingest::Dataset& ds, int min_events = 5);

}  // namespace archrec::eval
