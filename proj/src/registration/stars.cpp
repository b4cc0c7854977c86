#include <algorithm>
#include <cmath>

#include "enhance/core/error.hpp"
#include "enhance/registration/registration.hpp"

namespace enhance::registration {

namespace {

double median_of(std::vector<double> v) {
  const std::size_t n = v.size();
  const std::size_t mid = n / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  double hi = v[mid];
  if (n % 2 == 1) return hi;
  std::nth_element(v.begin(), v.begin() + (mid - 1), v.begin() + mid);
  return 0.5 * (v[mid - 1] + hi);
}

// Noise estimate: 1.4826 * median(|horizontal neighbor difference|) / sqrt(2).
// Quantized data can drive the median to exactly zero; fall back to half the
// smallest nonzero difference (sub-quantization noise floor).
double estimate_noise_sigma(const Grid& image) {
  std::vector<double> diffs;
  diffs.reserve(std::size_t(image.width - 1) * image.height);
  for (std::uint32_t y = 0; y < image.height; ++y) {
    for (std::uint32_t x = 0; x + 1 < image.width; ++x) {
      diffs.push_back(std::fabs(image.at(x + 1, y) - image.at(x, y)));
    }
  }
  double med = median_of(diffs);
  if (med == 0.0) {
    double smallest = 0.0;
    for (double d : diffs) {
      if (d > 0.0 && (smallest == 0.0 || d < smallest)) smallest = d;
    }
    med = 0.5 * smallest;
  }
  return 1.4826 * med / std::sqrt(2.0);
}

// Background under a candidate peak: median of the 9x9 window border, so
// smooth sky gradients do not masquerade as flux. Candidates without the
// full margin are rejected; edge rows have no trustworthy background.
constexpr int kBackgroundRing = 4;

double local_background(const Grid& image, std::uint32_t px, std::uint32_t py) {
  double ring[8 * kBackgroundRing];
  std::size_t n = 0;
  for (int i = -kBackgroundRing; i < kBackgroundRing; ++i) {
    ring[n++] = image.at(px + i, py - kBackgroundRing);
    ring[n++] = image.at(px + kBackgroundRing, py + i);
    ring[n++] = image.at(px - i, py + kBackgroundRing);
    ring[n++] = image.at(px - kBackgroundRing, py - i);
  }
  std::vector<double> values(ring, ring + n);
  return median_of(std::move(values));
}

// Least-squares quadratic c0 + c1 x + c2 y + c3 x^2 + c4 y^2 + c5 xy over the
// 3x3 patch; returns the extremum offset from the center, or (0,0) when the
// surface is degenerate or the extremum is not a maximum.
struct PatchFit {
  double dx = 0.0, dy = 0.0;
  double value = 0.0;  // fitted value at the extremum
  bool usable = false;
};

PatchFit fit_quadratic_3x3(const Grid& image, std::uint32_t px, std::uint32_t py) {
  double s = 0, sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (int oy = -1; oy <= 1; ++oy) {
    for (int ox = -1; ox <= 1; ++ox) {
      const double f = image.at(px + ox, py + oy);
      s += f;
      sx += f * ox;
      sy += f * oy;
      sxx += f * ox * ox;
      syy += f * oy * oy;
      sxy += f * ox * oy;
    }
  }
  // normal equations decouple except for (c0, c3, c4):
  //   [9 6 6][c0]   [s  ]
  //   [6 6 4][c3] = [sxx]
  //   [6 4 6][c4]   [syy]
  const double c1 = sx / 6.0;
  const double c2 = sy / 6.0;
  const double c5 = sxy / 4.0;
  // explicit inverse of the coupled block (det = 36)
  const double c0 = (20.0 * s - 12.0 * sxx - 12.0 * syy) / 36.0;
  const double c3v = (-12.0 * s + 18.0 * sxx) / 36.0;
  const double c4v = (-12.0 * s + 18.0 * syy) / 36.0;

  PatchFit fit;
  const double det = 4.0 * c3v * c4v - c5 * c5;
  if (det <= 0.0 || c3v >= 0.0) return fit;  // not an elliptic maximum
  fit.dx = (c5 * c2 - 2.0 * c4v * c1) / det;
  fit.dy = (c5 * c1 - 2.0 * c3v * c2) / det;
  fit.value = c0 + c1 * fit.dx + c2 * fit.dy + c3v * fit.dx * fit.dx + c4v * fit.dy * fit.dy +
              c5 * fit.dx * fit.dy;
  fit.usable = true;
  return fit;
}

}  // namespace

StarList StarList::from_stars(std::vector<Star> stars) {
  for (const Star& s : stars) {
    if (!std::isfinite(s.x) || !std::isfinite(s.y)) {
      raise(ErrorCode::InvalidValue, "star coordinates must be finite");
    }
    if (!(s.flux > 0.0)) raise(ErrorCode::InvalidValue, "star flux must be positive");
  }
  std::sort(stars.begin(), stars.end(), [](const Star& a, const Star& b) {
    if (a.flux != b.flux) return a.flux > b.flux;
    if (a.y != b.y) return a.y < b.y;
    return a.x < b.x;
  });
  return StarList{std::move(stars)};
}

StarList detect_stars(const Grid& image, std::size_t max_stars, const DetectParams& params) {
  if (image.width < 3 || image.height < 3) {
    raise(ErrorCode::ShapeMismatch, "detect_stars needs at least a 3x3 image");
  }
  const double sigma = estimate_noise_sigma(image);
  const std::uint32_t margin = kBackgroundRing;

  std::vector<Star> found;
  if (image.width <= 2 * margin || image.height <= 2 * margin) return StarList{};
  for (std::uint32_t y = margin; y + margin < image.height; ++y) {
    for (std::uint32_t x = margin; x + margin < image.width; ++x) {
      const double v = image.at(x, y);
      bool is_peak = true;
      for (int oy = -1; oy <= 1 && is_peak; ++oy) {
        for (int ox = -1; ox <= 1; ++ox) {
          if (ox == 0 && oy == 0) continue;
          if (image.at(x + ox, y + oy) >= v) {
            is_peak = false;
            break;
          }
        }
      }
      if (!is_peak) continue;
      const double background = local_background(image, x, y);
      if (!(v > background + params.threshold_sigmas * sigma)) continue;

      Star star{double(x), double(y), v - background};
      const PatchFit fit = fit_quadratic_3x3(image, x, y);
      if (fit.usable && std::fabs(fit.dx) <= 1.0 && std::fabs(fit.dy) <= 1.0) {
        star.x += fit.dx;
        star.y += fit.dy;
        star.flux = std::max(fit.value - background, v - background);
      }
      found.push_back(star);
    }
  }

  StarList list = StarList::from_stars(std::move(found));

  // crowding rejection: fainter peaks too close to a kept star are duplicates
  // of the same source (or artifacts riding on it)
  if (params.min_separation > 0.0) {
    const double sep2 = params.min_separation * params.min_separation;
    std::vector<Star> kept;
    for (const Star& s : list.stars) {
      bool crowded = false;
      for (const Star& k : kept) {
        const double dx = s.x - k.x;
        const double dy = s.y - k.y;
        if (dx * dx + dy * dy < sep2) {
          crowded = true;
          break;
        }
      }
      if (!crowded) kept.push_back(s);
    }
    list.stars = std::move(kept);
  }

  if (list.stars.size() > max_stars) list.stars.resize(max_stars);
  return list;
}

}  // namespace enhance::registration
