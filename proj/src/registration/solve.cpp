#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>

#include "enhance/core/error.hpp"
#include "enhance/registration/registration.hpp"

namespace enhance::registration {

Point SimilarityTransform::apply(Point p) const {
  const double cs = scale * std::cos(rotation);
  const double sn = scale * std::sin(rotation);
  return Point{cs * p.x - sn * p.y + dx, sn * p.x + cs * p.y + dy};
}

SimilarityTransform SimilarityTransform::inverse() const {
  if (!(scale > 0.0)) raise(ErrorCode::InvalidValue, "transform scale must be positive");
  SimilarityTransform inv;
  inv.scale = 1.0 / scale;
  inv.rotation = -rotation;
  const double cs = inv.scale * std::cos(inv.rotation);
  const double sn = inv.scale * std::sin(inv.rotation);
  inv.dx = -(cs * dx - sn * dy);
  inv.dy = -(sn * dx + cs * dy);
  return inv;
}

namespace {

// Least-squares similarity p -> q over point pairs, complex formulation:
// q ~ a*p + b with a = sum((q-uq)*conj(p-up)) / sum(|p-up|^2), b = uq - a*up.
bool fit_similarity(const std::vector<Point>& from, const std::vector<Point>& to,
                    SimilarityTransform& out) {
  const std::size_t n = from.size();
  if (n < 2) return false;
  double upx = 0, upy = 0, uqx = 0, uqy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    upx += from[i].x;
    upy += from[i].y;
    uqx += to[i].x;
    uqy += to[i].y;
  }
  upx /= double(n);
  upy /= double(n);
  uqx /= double(n);
  uqy /= double(n);

  double num_re = 0, num_im = 0, den = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double px = from[i].x - upx, py = from[i].y - upy;
    const double qx = to[i].x - uqx, qy = to[i].y - uqy;
    num_re += qx * px + qy * py;
    num_im += qy * px - qx * py;
    den += px * px + py * py;
  }
  if (!(den > 0.0)) return false;
  const double are = num_re / den;
  const double aim = num_im / den;
  const double scale = std::hypot(are, aim);
  if (!(scale > 0.0) || !std::isfinite(scale)) return false;
  out.scale = scale;
  out.rotation = std::atan2(aim, are);
  out.dx = uqx - (are * upx - aim * upy);
  out.dy = uqy - (aim * upx + are * upy);
  return true;
}

struct Verification {
  std::size_t predicted = 0;
  std::size_t matches = 0;
  std::vector<std::pair<Point, Point>> pairs;  // detected -> catalog
  std::vector<double> residuals;               // prediction-to-detection distances
};

// Predict image positions of catalog stars other than the four in the quad
// and count those explained by a nearby detection.
Verification verify_proposal(const SimilarityTransform& proposal, const StarList& detected,
                             const StarList& catalog, const std::array<std::uint32_t, 4>& quad_ids,
                             const SolveParams& params) {
  Verification v;
  const SimilarityTransform inv = proposal.inverse();
  const double r2 = params.match_radius * params.match_radius;
  for (std::size_t ci = 0; ci < catalog.stars.size(); ++ci) {
    if (ci == quad_ids[0] || ci == quad_ids[1] || ci == quad_ids[2] || ci == quad_ids[3]) continue;
    const Star& cs = catalog.stars[ci];
    const Point pred = inv.apply({cs.x, cs.y});
    if (pred.x < -0.5 || pred.x > double(params.image_width) - 0.5 || pred.y < -0.5 ||
        pred.y > double(params.image_height) - 0.5) {
      continue;
    }
    ++v.predicted;
    double best = r2;
    const Star* hit = nullptr;
    for (const Star& ds : detected.stars) {
      const double ddx = ds.x - pred.x;
      const double ddy = ds.y - pred.y;
      const double d2 = ddx * ddx + ddy * ddy;
      if (d2 <= best) {
        best = d2;
        hit = &ds;
      }
    }
    if (hit) {
      ++v.matches;
      v.pairs.push_back({{hit->x, hit->y}, {cs.x, cs.y}});
      v.residuals.push_back(std::sqrt(best));
    }
  }
  return v;
}

double median_residual(std::vector<double> r) {
  const std::size_t mid = r.size() / 2;
  std::nth_element(r.begin(), r.begin() + mid, r.end());
  return r[mid];
}

}  // namespace

std::optional<Solution> solve(const StarList& detected, const QuadIndex& index,
                              const StarList& catalog, const SolveParams& params) {
  const std::size_t n = detected.stars.size();
  if (n < 4) raise(ErrorCode::TooFewStars, "solve needs at least 4 detected stars");
  if (params.image_width == 0 || params.image_height == 0) {
    raise(ErrorCode::InvalidValue, "solve: image dimensions must be set");
  }

  std::size_t tried = 0;
  for (std::size_t d = 3; d < n; ++d) {
    for (std::size_t c = 2; c < d; ++c) {
      for (std::size_t b = 1; b < c; ++b) {
        for (std::size_t a = 0; a < b; ++a) {
          if (tried >= params.max_quads_tried) return std::nullopt;
          ++tried;
          const auto& s = detected.stars;
          QuadHash hash;
          try {
            hash = quad_hash({s[a].x, s[a].y}, {s[b].x, s[b].y}, {s[c].x, s[c].y},
                             {s[d].x, s[d].y}, params.accept_radius);
          } catch (const Error& err) {
            if (err.code() != ErrorCode::DegenerateQuad) throw;
            continue;
          }
          const std::size_t arg_ids[4] = {a, b, c, d};

          for (const QuadIndex::Entry* entry : index.lookup(hash.code, params.code_tolerance)) {
            std::vector<Point> from(4), to(4);
            for (int i = 0; i < 4; ++i) {
              const Star& ds = s[arg_ids[hash.star_ids[i]]];
              const Star& cs = catalog.stars[entry->star_ids[i]];
              from[i] = {ds.x, ds.y};
              to[i] = {cs.x, cs.y};
            }
            SimilarityTransform proposal;
            if (!fit_similarity(from, to, proposal)) continue;

            Verification v = verify_proposal(proposal, detected, catalog, entry->star_ids, params);
            if (v.predicted < params.min_predicted) continue;
            const std::size_t need = std::min(params.min_matches, v.predicted);
            if (v.matches < need) continue;
            if (double(v.matches) < params.accept_fraction * double(v.predicted)) continue;
            if (median_residual(v.residuals) >
                params.max_median_residual_fraction * params.match_radius) {
              continue;
            }

            // polish with every verified correspondence plus the quad itself,
            // then once more against a tighter re-match so stray pairs from
            // the wide verification radius cannot skew the fit
            std::vector<Point> all_from = from;
            std::vector<Point> all_to = to;
            for (const auto& pr : v.pairs) {
              all_from.push_back(pr.first);
              all_to.push_back(pr.second);
            }
            SimilarityTransform polished = proposal;
            fit_similarity(all_from, all_to, polished);

            SolveParams tight = params;
            tight.match_radius = std::min(params.match_radius, 0.75);
            const Verification rv =
                verify_proposal(polished, detected, catalog, entry->star_ids, tight);
            if (rv.pairs.size() >= 8) {
              std::vector<Point> rf, rt;
              for (const auto& pr : rv.pairs) {
                rf.push_back(pr.first);
                rt.push_back(pr.second);
              }
              fit_similarity(rf, rt, polished);
            }

            return Solution{polished, v.matches, v.predicted, tried};
          }
        }
      }
    }
  }
  return std::nullopt;
}

ObservedImage resample(const Grid& image, const SimilarityTransform& transform,
                       const Canvas& canvas) {
  const SimilarityTransform inv = transform.inverse();
  const std::size_t total = canvas.pixel_count();
  ObservedImage out{canvas, std::vector<double>(total, 0.0),
                    std::vector<std::uint8_t>(total, 0), {}};

  // inverse map is affine: walk each row incrementally
  const double cs = inv.scale * std::cos(inv.rotation);
  const double sn = inv.scale * std::sin(inv.rotation);
  std::size_t p = 0;
  for (std::uint32_t y = 0; y < canvas.height; ++y) {
    double sx = cs * 0.0 - sn * double(y) + inv.dx;
    double sy = sn * 0.0 + cs * double(y) + inv.dy;
    for (std::uint32_t x = 0; x < canvas.width; ++x, ++p, sx += cs, sy += sn) {
      const long ix = std::lround(sx);
      const long iy = std::lround(sy);
      if (ix < 0 || iy < 0 || ix >= long(image.width) || iy >= long(image.height)) continue;
      out.values[p] = image.at(std::uint32_t(ix), std::uint32_t(iy));
      out.mask[p] = 1;
    }
  }
  return out;
}

void write_transform_sidecar(const SimilarityTransform& t, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) raise(ErrorCode::IoError, "cannot open " + path + " for writing");
  char buf[256];
  std::snprintf(buf, sizeof buf, "scale=%.17g\nrotation_deg=%.17g\ndx=%.17g\ndy=%.17g\n", t.scale,
                t.rotation * 180.0 / 3.14159265358979323846, t.dx, t.dy);
  out << buf;
  if (!out) raise(ErrorCode::IoError, "short write to " + path);
}

SimilarityTransform read_transform_sidecar(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorCode::IoError, "cannot open " + path);
  SimilarityTransform t;
  bool have_scale = false, have_rot = false, have_dx = false, have_dy = false;
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(0, eq);
    const double value = std::strtod(line.c_str() + eq + 1, nullptr);
    if (key == "scale") {
      t.scale = value;
      have_scale = true;
    } else if (key == "rotation_deg") {
      t.rotation = value * 3.14159265358979323846 / 180.0;
      have_rot = true;
    } else if (key == "dx") {
      t.dx = value;
      have_dx = true;
    } else if (key == "dy") {
      t.dy = value;
      have_dy = true;
    }
  }
  if (!have_scale || !have_rot || !have_dx || !have_dy) {
    raise(ErrorCode::FormatError, "sidecar missing scale/rotation_deg/dx/dy in " + path);
  }
  if (!(t.scale > 0.0)) raise(ErrorCode::FormatError, "sidecar scale must be positive");
  return t;
}

}  // namespace enhance::registration
