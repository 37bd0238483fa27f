#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace archrec {

// Fatal error raised by any pipeline stage. The stage tag names the module
// that failed so CLI diagnostics can report it.
class Error : public std::runtime_error {
 public:
  Error(std::string stage, const std::string& message)
      : std::runtime_error(stage + ": " + message), stage_(std::move(stage)) {}

  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

// 64-bit FNV-1a over raw bytes.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis = 0xcbf29ce484222325ULL);

std::uint64_t splitmix64(std::uint64_t x);

// Child seed for a named stage: splitmix64(root ^ fnv1a64(name)).
std::uint64_t derive_seed(std::uint64_t root, std::string_view name);

// Worker count for parallel_for; 1 means inline execution.
void set_thread_count(int n);
int thread_count();

// Runs body(i) for i in [0, n). Each index must write only its own output
// slot, which keeps results independent of the thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace archrec
