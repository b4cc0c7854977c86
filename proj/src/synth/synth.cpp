#include "enhance/synth/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "enhance/core/error.hpp"
#include "enhance/core/rng.hpp"
#include "enhance/kernels/kernels.hpp"

namespace enhance::synth {

namespace {

using registration::SimilarityTransform;
using registration::Star;
using registration::StarList;

double sample_power_law(Rng& rng, double slope, double lo, double hi) {
  const double u = rng.next_double();
  if (slope == 1.0) return lo * std::pow(hi / lo, u);
  const double e = 1.0 - slope;
  return std::pow(u * (std::pow(hi, e) - std::pow(lo, e)) + std::pow(lo, e), 1.0 / e);
}

void add_gaussian_spot(Grid& img, double cx, double cy, double amplitude, double sigma) {
  if (sigma <= 0.0) {
    const long ix = std::lround(cx);
    const long iy = std::lround(cy);
    if (ix >= 0 && iy >= 0 && ix < long(img.width) && iy < long(img.height)) {
      img.at(std::uint32_t(ix), std::uint32_t(iy)) += amplitude;
    }
    return;
  }
  // truncated at 4 sigma
  const double radius = 4.0 * sigma;
  const long x0 = std::max(0L, long(std::floor(cx - radius)));
  const long x1 = std::min(long(img.width) - 1, long(std::ceil(cx + radius)));
  const long y0 = std::max(0L, long(std::floor(cy - radius)));
  const long y1 = std::min(long(img.height) - 1, long(std::ceil(cy + radius)));
  const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
  const double r2max = radius * radius;
  for (long y = y0; y <= y1; ++y) {
    for (long x = x0; x <= x1; ++x) {
      const double ddx = double(x) - cx;
      const double ddy = double(y) - cy;
      const double r2 = ddx * ddx + ddy * ddy;
      if (r2 > r2max) continue;
      img.at(std::uint32_t(x), std::uint32_t(y)) += amplitude * std::exp(-r2 * inv2s2);
    }
  }
}

}  // namespace

Scene make_sky(const SceneSpec& spec) {
  if (spec.psf_sigma < 0.0) raise(ErrorCode::InvalidValue, "psf_sigma must be >= 0");
  if (spec.num_stars > 0 && (!(spec.flux_min > 0.0) || spec.flux_max < spec.flux_min)) {
    raise(ErrorCode::InvalidValue, "flux range must satisfy 0 < flux_min <= flux_max");
  }
  Grid truth(spec.canvas.width, spec.canvas.height, spec.background);
  if (spec.background_ramp != 0.0) {
    const std::size_t total = truth.values.size();
    const double denom = total > 1 ? double(total - 1) : 1.0;
    for (std::size_t p = 0; p < total; ++p) {
      truth.values[p] += spec.background_ramp * double(p) / denom;
    }
  }
  Rng rng(spec.seed);

  std::vector<Star> stars;
  stars.reserve(spec.num_stars);
  const double margin = std::min(2.0 + 3.0 * spec.psf_sigma,
                                 0.25 * std::min(spec.canvas.width, spec.canvas.height));
  for (std::uint32_t i = 0; i < spec.num_stars; ++i) {
    Star s;
    s.x = rng.uniform(margin, double(spec.canvas.width - 1) - margin);
    s.y = rng.uniform(margin, double(spec.canvas.height - 1) - margin);
    s.flux = sample_power_law(rng, spec.flux_slope, spec.flux_min, spec.flux_max);
    stars.push_back(s);
    add_gaussian_spot(truth, s.x, s.y, s.flux, spec.psf_sigma);
  }

  for (const FaintFeature& f : spec.features) {
    if (!(f.amplitude > 0.0) || !(f.extent > 0.0)) {
      raise(ErrorCode::InvalidValue, "feature amplitude and extent must be positive");
    }
    const double r2 = f.extent * f.extent;
    const long x0 = std::max(0L, long(std::floor(f.center_x - f.extent)));
    const long x1 = std::min(long(truth.width) - 1, long(std::ceil(f.center_x + f.extent)));
    const long y0 = std::max(0L, long(std::floor(f.center_y - f.extent)));
    const long y1 = std::min(long(truth.height) - 1, long(std::ceil(f.center_y + f.extent)));
    for (long y = y0; y <= y1; ++y) {
      for (long x = x0; x <= x1; ++x) {
        const double ddx = double(x) - f.center_x;
        const double ddy = double(y) - f.center_y;
        if (ddx * ddx + ddy * ddy <= r2) {
          truth.at(std::uint32_t(x), std::uint32_t(y)) += f.amplitude;
        }
      }
    }
  }

  return Scene{std::move(truth), StarList::from_stars(std::move(stars))};
}

void ToneMap::apply(std::vector<double>& values) const {
  if (!(gamma > 0.0) || !(gain > 0.0)) {
    raise(ErrorCode::InvalidValue, "tone map gamma and gain must be positive");
  }
  if (clip_hi < clip_lo) raise(ErrorCode::InvalidValue, "tone map clip range inverted");
  const auto& kern = kernels::active();
  const std::size_t n = values.size();
  if (n == 0) return;

  // scene intensities are non-negative; clamp before the power
  kern.affine_clip(values.data(), 1.0, 0.0, 0.0, std::numeric_limits<double>::infinity(),
                   values.data(), n);
  if (gamma != 1.0) {
    for (double& v : values) v = std::pow(v, gamma);
  }
  kern.affine_clip(values.data(), gain, offset, clip_lo, clip_hi, values.data(), n);
  if (levels && clip_hi > clip_lo) {
    if (*levels < 2) raise(ErrorCode::InvalidValue, "quantization needs at least 2 levels");
    kern.quantize_levels(values.data(), clip_lo, clip_hi, *levels, n);
  }
}

Grid make_frame(const Grid& truth, const ObservationSpec& spec) {
  const std::uint32_t cw = spec.crop_width ? spec.crop_width : truth.width;
  const std::uint32_t ch = spec.crop_height ? spec.crop_height : truth.height;
  if (cw < 1 || ch < 1) raise(ErrorCode::InvalidValue, "empty crop");
  if (!(spec.noise_sigma >= 0.0)) raise(ErrorCode::InvalidValue, "noise_sigma must be >= 0");

  Grid frame(cw, ch, 0.0);
  for (std::uint32_t v = 0; v < ch; ++v) {
    for (std::uint32_t u = 0; u < cw; ++u) {
      const registration::Point pc =
          spec.transform.apply({double(spec.crop_x + u), double(spec.crop_y + v)});
      const long ix = std::lround(pc.x);
      const long iy = std::lround(pc.y);
      if (ix >= 0 && iy >= 0 && ix < long(truth.width) && iy < long(truth.height)) {
        frame.at(u, v) = truth.at(std::uint32_t(ix), std::uint32_t(iy));
      }
    }
  }

  // the noise stream covers every frame pixel, in scan order, so the frame is
  // reproducible independent of how much of it lands on the truth
  if (spec.noise_sigma > 0.0 && !spec.noise_after_tonemap) {
    Rng rng(spec.seed);
    for (double& v : frame.values) v += spec.noise_sigma * rng.normal();
  }
  spec.tone_map.apply(frame.values);
  if (spec.noise_sigma > 0.0 && spec.noise_after_tonemap) {
    Rng rng(spec.seed);
    for (double& v : frame.values) v += spec.noise_sigma * rng.normal();
  }
  return frame;
}

ObservedImage observe(const Grid& truth, const ObservationSpec& spec) {
  const Grid frame = make_frame(truth, spec);

  // frame pixel grid -> canvas: the stored transform acts on image
  // coordinates, the frame origin sits at the crop corner
  SimilarityTransform frame_to_canvas = spec.transform;
  const registration::Point origin =
      spec.transform.apply({double(spec.crop_x), double(spec.crop_y)});
  frame_to_canvas.dx = origin.x;
  frame_to_canvas.dy = origin.y;

  ObservedImage out = registration::resample(frame, frame_to_canvas, truth.canvas());

  // drop canvas pixels whose frame sample fell outside the truth
  Grid validity(frame.width, frame.height, 0.0);
  for (std::uint32_t v = 0; v < frame.height; ++v) {
    for (std::uint32_t u = 0; u < frame.width; ++u) {
      const registration::Point pc =
          spec.transform.apply({double(spec.crop_x + u), double(spec.crop_y + v)});
      const long ix = std::lround(pc.x);
      const long iy = std::lround(pc.y);
      if (ix >= 0 && iy >= 0 && ix < long(truth.width) && iy < long(truth.height)) {
        validity.at(u, v) = 1.0;
      }
    }
  }
  const ObservedImage valid = registration::resample(validity, frame_to_canvas, truth.canvas());
  std::size_t masked = 0;
  for (std::size_t p = 0; p < out.mask.size(); ++p) {
    out.mask[p] = out.mask[p] && valid.mask[p] && valid.values[p] == 1.0;
    masked += out.mask[p];
  }
  if (masked == 0) raise(ErrorCode::DegenerateMask, "observation footprint misses the canvas");
  return out;
}

ToneMap random_tonemap(std::uint64_t seed) {
  Rng rng(seed);
  ToneMap t;
  t.gamma = rng.uniform(0.4, 2.5);
  t.gain = std::pow(10.0, rng.uniform(-1.5, 1.5));
  t.offset = rng.uniform(-0.2, 0.2);
  t.clip_lo = rng.uniform(-0.02, 0.06);
  t.clip_hi = rng.uniform(0.85, 1.25);
  return t;
}

}  // namespace enhance::synth
