#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "enhance/core/canvas.hpp"

namespace enhance::consensus {

// Multiset of output pixel values used by render(); kept sorted.
struct HistogramSource {
  std::vector<double> sorted_values;

  static HistogramSource from_values(std::vector<double> values);
};

// Consensus rank permutation plus accumulated per-pixel vote weights.
// ranks is a permutation of {1,...,P} at all times; votes start at zero.
// Single-writer: updates and merges are order-dependent and must be applied
// sequentially; reads between updates are safe.
struct ConsensusState {
  Canvas canvas;
  std::vector<double> ranks;
  std::vector<double> votes;

  std::size_t pixel_count() const { return ranks.size(); }
  bool operator==(const ConsensusState& o) const {
    return canvas == o.canvas && ranks == o.ranks && votes == o.votes;
  }
};

// Uniformly random seeded rank permutation, votes all zero.
ConsensusState init_random(const Canvas& canvas, std::uint64_t seed);

// Ranks follow the image's value order; ties broken by the seeded generator.
// The image mask must be all-true (MaskNotFull otherwise).
ConsensusState init_from_image(const ObservedImage& image, std::uint64_t seed);

// One voting step: re-rank the data and the current consensus inside the
// image footprint, average them with weights (votes vs. per-pixel image
// weight), and reassign the footprint's existing consensus rank values in
// the order of the averaged score. O(n log n) in the masked pixel count.
void update(ConsensusState& state, const ObservedImage& image);

// Combine two consensus states by vote-weighted rank averaging. Commutative;
// pixels where both vote totals are zero fall back to the plain rank mean.
ConsensusState merge(const ConsensusState& a, const ConsensusState& b);

// True once every pixel has accumulated at least P votes; from then on a
// unit-weight image can no longer change the ranking.
bool is_frozen(const ConsensusState& state);

// Histogram matching: the pixel holding consensus rank k receives
// source.sorted_values[k-1]. Output value multiset equals the source exactly.
std::vector<double> render(const ConsensusState& state, const HistogramSource& source);

// Experimental reliability weights from the value histogram inside the mask:
// raw weight 1/h(d_p)^2 with h the normalized exact-value histogram, rescaled
// to mean 1 over the mask. Returned dense on the canvas (0 outside the mask).
std::vector<double> histogram_weights(const ObservedImage& image);

// Binary state file, little-endian: "ENHC", u32 version=1, u32 width,
// u32 height, P u64 rank values (row-major), P f64 vote values.
void save_state(const ConsensusState& state, const std::string& path);
ConsensusState load_state(const std::string& path);

}  // namespace enhance::consensus
