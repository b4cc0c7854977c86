#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace enhance::rank {

// Sorting permutation: v[order[k]] <= v[order[k+1]], ties broken by ascending
// original index. O(n log n). Throws InvalidValue on non-finite entries.
std::vector<std::uint32_t> argsort(std::span<const double> v);

// Index variant: sorts the given index subset by the values it points into.
// Same ordering contract as argsort.
std::vector<std::uint32_t> argsort_indices(std::span<const double> values,
                                           std::span<const std::uint32_t> indices);

// 1-based tied ranks: runs of equal values receive the mean of the integer
// ranks they would occupy. Exact half-integers; sums to n(n+1)/2.
std::vector<double> tied_ranks(std::span<const double> v);

// Tied ranks written through a precomputed sorting permutation (the caller
// guarantees `order` sorts `v` with the argsort contract).
void tied_ranks_from_order(std::span<const double> v, std::span<const std::uint32_t> order,
                           std::span<double> out);

// Tie-corrected Kendall tau-b via merge counting, O(n log n):
//   (C - D) / sqrt((n0 - n1) (n0 - n2))
// Throws ShapeMismatch on length mismatch, DegenerateInput when n < 2 or
// either vector is all-tied, InvalidValue on non-finite entries.
double kendall_tau(std::span<const double> a, std::span<const double> b);

struct SampledTau {
  double estimate = 0.0;
  double standard_error = 0.0;
};

// Monte-Carlo tau-a: num_pairs index pairs (i != j) drawn uniformly with
// replacement; tied pairs contribute 0. Deterministic given seed.
SampledTau kendall_tau_sampled(std::span<const double> a, std::span<const double> b,
                               std::uint64_t num_pairs, std::uint64_t seed);

}  // namespace enhance::rank
