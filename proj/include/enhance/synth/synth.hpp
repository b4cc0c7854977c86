#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "enhance/core/canvas.hpp"
#include "enhance/registration/registration.hpp"

namespace enhance::synth {

// Low-surface-brightness blob: constant amplitude inside a disk of the given
// radius, exactly zero outside. The flat top keeps the truth's tie structure
// simple, which the rank metrics rely on.
struct FaintFeature {
  double center_x = 0.0;
  double center_y = 0.0;
  double extent = 10.0;     // disk radius, pixels
  double amplitude = 0.01;  // may sit below single-image noise; that is the point
};

struct SceneSpec {
  Canvas canvas;
  std::uint32_t num_stars = 0;
  double flux_slope = 1.8;  // power-law exponent of the flux distribution
  double flux_min = 0.05;
  double flux_max = 1.0;
  double background = 0.25;
  // smooth sky gradient: raster-ordered ramp of this total amplitude added to
  // the background, making every background pixel value distinct (0 = flat)
  double background_ramp = 0.0;
  std::vector<FaintFeature> features;
  double psf_sigma = 1.5;  // 0 collapses stars to single pixels
  std::uint64_t seed = 0;
};

// Monotone display transform: value -> quantize(clip(gain * value^gamma + offset)).
// Negative inputs clamp to 0 before the power. levels unset = no quantization.
struct ToneMap {
  double gamma = 1.0;
  double gain = 1.0;
  double offset = 0.0;
  double clip_lo = 0.0;
  double clip_hi = 1.0;
  std::optional<int> levels;

  void apply(std::vector<double>& values) const;
};

struct ObservationSpec {
  registration::SimilarityTransform transform;  // camera frame -> canvas
  ToneMap tone_map;
  double noise_sigma = 0.0;
  // crop: the camera frame, in its own pixel grid
  std::uint32_t crop_x = 0;
  std::uint32_t crop_y = 0;
  std::uint32_t crop_width = 0;
  std::uint32_t crop_height = 0;
  bool noise_after_tonemap = false;  // literal additive-after-display reading
  std::uint64_t seed = 0;
};

// Ground-truth intensity field plus the exact star catalog used to render it.
struct Scene {
  Grid truth;
  registration::StarList catalog;
};

// Background + Gaussian-PSF stars (truncated at 4 sigma) + faint features.
// Deterministic per seed.
Scene make_sky(const SceneSpec& spec);

// The camera frame an observer would record: sample the truth through the
// transform over the crop, add seeded noise, tone map.
Grid make_frame(const Grid& truth, const ObservationSpec& spec);

// Full synthetic observation registered back onto the truth canvas with the
// crop footprint as mask. DegenerateMask when the footprint misses the canvas.
ObservedImage observe(const Grid& truth, const ObservationSpec& spec);

// gamma in [0.4, 2.5], log-uniform gain in [10^-1.5, 10^1.5], offset in
// [-0.2, 0.2], clip_lo in [-0.02, 0.06], clip_hi in [0.85, 1.25];
// quantization left unset. Deterministic per seed.
ToneMap random_tonemap(std::uint64_t seed);

}  // namespace enhance::synth
