#pragma once

#include "ascpg/solver.hpp"

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

namespace ascpg {

/// Outcome of one seeded run: a full trace, or the divergence it hit.
struct SeedResult {
  std::uint64_t seed = 0;
  RunTrace trace;
  std::optional<std::string> divergence;  // message when the run diverged
};

/// Runs `cfg` once per seed, each on its own oracle from `make_oracle(seed)`.
/// Runs are distributed over `workers` threads; results come back in seed
/// order and do not depend on the worker count. Exceptions other than
/// divergence are rethrown after all workers finish.
template <class Factory>
std::vector<SeedResult> run_seeds(Factory make_oracle, const SolverConfig& cfg,
                                  const std::vector<std::uint64_t>& seeds,
                                  unsigned workers = 1) {
  cfg.validate();
  std::vector<SeedResult> results(seeds.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto work = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= seeds.size()) return;
      SeedResult& res = results[i];
      res.seed = seeds[i];
      try {
        auto oracle = make_oracle(seeds[i]);
        SolverConfig local = cfg;
        local.seed = seeds[i];
        res.trace = run(oracle, local);
      } catch (const divergence_error& e) {
        res.trace = e.partial_trace();
        res.divergence = e.what();
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };

  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(seeds.size())));
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  return results;
}

inline std::vector<std::uint64_t> seed_range(std::uint64_t first, std::size_t count) {
  std::vector<std::uint64_t> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = first + i;
  return out;
}

inline std::vector<RunTrace> completed_traces(const std::vector<SeedResult>& results) {
  std::vector<RunTrace> out;
  for (const auto& r : results) {
    if (!r.divergence) out.push_back(r.trace);
  }
  return out;
}

}  // namespace ascpg
