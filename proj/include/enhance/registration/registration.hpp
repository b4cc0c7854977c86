#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "enhance/core/canvas.hpp"

namespace enhance::registration {

struct Star {
  double x = 0.0;
  double y = 0.0;
  double flux = 0.0;
};

// Detected or catalog stars, sorted by decreasing flux.
struct StarList {
  std::vector<Star> stars;

  // Sorts by decreasing flux (position as tiebreak) and validates entries.
  static StarList from_stars(std::vector<Star> stars);
};

struct DetectParams {
  double threshold_sigmas = 8.0;  // peaks must exceed background + k*sigma
  double min_separation = 3.0;    // fainter peaks this close to a kept one are dropped
};

// Star-measuring phase: noise from the median absolute horizontal-neighbor
// difference, local maxima above threshold, centroids refined by a quadratic
// fit to the 3x3 patch around each peak. At most max_stars brightest kept.
StarList detect_stars(const Grid& image, std::size_t max_stars,
                      const DetectParams& params = {});

// Similarity-invariant hash of a four-star asterism. The two most separated
// stars map to (0,0) and (1,1); the code is the mapped coordinates of the
// other two, canonicalized so code[0] <= code[2] and code[0]+code[2] <= 1.
struct QuadHash {
  std::array<double, 4> code{};
  std::array<std::uint32_t, 4> star_ids{};  // A, B, C, D in canonical roles
};

struct Point {
  double x = 0.0;
  double y = 0.0;
};

// Throws DegenerateQuad when the baseline has zero length or the inner two
// stars fall outside the acceptance circle of the given radius around
// (0.5, 0.5) in code space.
QuadHash quad_hash(Point a, Point b, Point c, Point d, double accept_radius = 0.70710678118654757);

// Canonical-code lookup structure over catalog asterisms. Immutable after
// build; lookups may run concurrently.
class QuadIndex {
 public:
  struct Entry {
    std::array<double, 4> code{};
    std::array<std::uint32_t, 4> star_ids{};
  };

  // Enumerates quads of brightest catalog stars outward, capped at max_quads
  // stored entries. Throws TooFewStars for catalogs with fewer than 4 stars.
  static QuadIndex build(const StarList& catalog, std::size_t max_quads,
                         double accept_radius = 0.70710678118654757);

  // All stored entries with Euclidean code distance <= radius.
  std::vector<const Entry*> lookup(const std::array<double, 4>& code, double radius) const;

  std::size_t size() const { return entries_.size(); }

 private:
  std::vector<Entry> entries_;  // sorted by code[0] for windowed scans
};

// Maps image coordinates to canvas coordinates:
//   (x, y) -> scale * R(rotation) * (x, y) + (dx, dy)
struct SimilarityTransform {
  double scale = 1.0;
  double rotation = 0.0;  // radians
  double dx = 0.0;
  double dy = 0.0;

  Point apply(Point p) const;
  SimilarityTransform inverse() const;
};

struct SolveParams {
  double code_tolerance = 0.01;   // hash-space match radius
  double match_radius = 2.0;      // pixels, verification distance
  double accept_fraction = 0.5;   // matched fraction of predicted stars
  std::size_t min_matches = 10;   // capped at the number of predicted stars
  std::size_t min_predicted = 5;  // proposals with fewer verifiable stars are rejected
  // accidental alignments spread residuals across the whole match radius;
  // genuine ones cluster at the measurement jitter
  double max_median_residual_fraction = 0.4;  // of match_radius
  std::size_t max_quads_tried = 2000;
  std::uint32_t image_width = 0;   // detected-image bounds used for verification
  std::uint32_t image_height = 0;
  double accept_radius = 0.70710678118654757;
};

struct Solution {
  SimilarityTransform transform;
  std::size_t matches = 0;
  std::size_t predicted = 0;
  std::size_t quads_tried = 0;
};

// Decision phase: hash detected quads against the index, turn each hit into
// a proposal transform, and verify it by predicting the positions of catalog
// stars other than the four in the quad. First accepted proposal wins;
// nullopt after the quad budget.
std::optional<Solution> solve(const StarList& detected, const QuadIndex& index,
                              const StarList& catalog, const SolveParams& params);

// Nearest-neighbor resampling of an image onto the canvas through the
// transform; mask marks canvas pixels whose preimage lands inside the image.
ObservedImage resample(const Grid& image, const SimilarityTransform& transform,
                       const Canvas& canvas);

// Sidecar files: scale=, rotation_deg=, dx=, dy= (one key=value per line).
void write_transform_sidecar(const SimilarityTransform& t, const std::string& path);
SimilarityTransform read_transform_sidecar(const std::string& path);

}  // namespace enhance::registration
