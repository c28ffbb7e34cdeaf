#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "covsem/types.hpp"

namespace covsem {

/// Derives a child seed from a master seed and a path of task identifiers.
/// Streams keyed on distinct paths are independent for practical purposes,
/// so parallel tasks produce identical results regardless of scheduling.
std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path);

std::mt19937_64 make_stream(std::uint64_t master, std::initializer_list<std::uint64_t> path);

/// n indices drawn uniformly with replacement from {0, ..., n-1}.
std::vector<Index> bootstrap_indices(std::mt19937_64& rng, Index n);

/// Runs body(0..count-1) on a small worker pool. Tasks must be independent;
/// outputs should be written to per-index slots so results do not depend on
/// scheduling. Worker count comes from COVSEM_THREADS or the hardware.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

std::size_t worker_count();

}  // namespace covsem
