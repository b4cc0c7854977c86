#include <algorithm>
#include <cmath>

#include "enhance/core/error.hpp"
#include "enhance/registration/registration.hpp"

namespace enhance::registration {

namespace {

struct Mapped {
  Point c, d;
};

// Map the plane so a -> (0,0), b -> (1,1): z -> (z - a) * (1+i) / (b - a)
// in complex form. Returns the images of c and d.
Mapped map_to_hash_frame(Point a, Point b, Point c, Point d) {
  const double bx = b.x - a.x;
  const double by = b.y - a.y;
  const double norm = bx * bx + by * by;
  // multiplier (1+i)/(bx + i by)
  const double mre = (bx + by) / norm;
  const double mim = (bx - by) / norm;
  auto fwd = [&](Point p) {
    const double zx = p.x - a.x;
    const double zy = p.y - a.y;
    return Point{zx * mre - zy * mim, zx * mim + zy * mre};
  };
  return Mapped{fwd(c), fwd(d)};
}

bool inside_acceptance(Point p, double radius) {
  const double dx = p.x - 0.5;
  const double dy = p.y - 0.5;
  return dx * dx + dy * dy <= radius * radius;
}

bool code_less(const std::array<double, 4>& a, const std::array<double, 4>& b) {
  for (int i = 0; i < 4; ++i) {
    if (a[i] != b[i]) return a[i] < b[i];
  }
  return false;
}

}  // namespace

QuadHash quad_hash(Point a, Point b, Point c, Point d, double accept_radius) {
  const Point pts[4] = {a, b, c, d};

  // baseline = the most separated pair; exact-distance ties break by the
  // lexicographically smallest endpoint pair so any input permutation of the
  // same four points selects the same baseline
  int bi = -1, bj = -1;
  double best = -1.0;
  auto lex_less = [](Point p, Point q) { return p.x != q.x ? p.x < q.x : p.y < q.y; };
  for (int i = 0; i < 4; ++i) {
    for (int j = i + 1; j < 4; ++j) {
      const double dx = pts[i].x - pts[j].x;
      const double dy = pts[i].y - pts[j].y;
      const double dist = dx * dx + dy * dy;
      bool take = dist > best;
      if (dist == best && best >= 0.0) {
        Point lo1 = lex_less(pts[i], pts[j]) ? pts[i] : pts[j];
        Point hi1 = lex_less(pts[i], pts[j]) ? pts[j] : pts[i];
        Point lo2 = lex_less(pts[bi], pts[bj]) ? pts[bi] : pts[bj];
        Point hi2 = lex_less(pts[bi], pts[bj]) ? pts[bj] : pts[bi];
        take = lex_less(lo1, lo2) || (lo1.x == lo2.x && lo1.y == lo2.y && lex_less(hi1, hi2));
      }
      if (take) {
        best = dist;
        bi = i;
        bj = j;
      }
    }
  }
  if (!(best > 0.0)) raise(ErrorCode::DegenerateQuad, "zero-length baseline");

  int rest[2];
  int k = 0;
  for (int i = 0; i < 4; ++i) {
    if (i != bi && i != bj) rest[k++] = i;
  }

  // candidate codes for both baseline orientations; C/D sorted within each
  auto build = [&](int ia, int ib) {
    Mapped m = map_to_hash_frame(pts[ia], pts[ib], pts[rest[0]], pts[rest[1]]);
    std::array<std::uint32_t, 4> ids{std::uint32_t(ia), std::uint32_t(ib),
                                     std::uint32_t(rest[0]), std::uint32_t(rest[1])};
    if (m.c.x > m.d.x || (m.c.x == m.d.x && m.c.y > m.d.y)) {
      std::swap(m.c, m.d);
      std::swap(ids[2], ids[3]);
    }
    QuadHash h;
    h.code = {m.c.x, m.c.y, m.d.x, m.d.y};
    h.star_ids = ids;
    return h;
  };

  QuadHash fwd = build(bi, bj);
  if (!inside_acceptance({fwd.code[0], fwd.code[1]}, accept_radius) ||
      !inside_acceptance({fwd.code[2], fwd.code[3]}, accept_radius)) {
    raise(ErrorCode::DegenerateQuad, "inner stars outside the acceptance region");
  }

  const double sum = fwd.code[0] + fwd.code[2];
  if (sum < 1.0) return fwd;
  QuadHash rev = build(bj, bi);
  if (sum > 1.0) return rev;
  return code_less(fwd.code, rev.code) ? fwd : rev;  // sum exactly 1: pick deterministically
}

QuadIndex QuadIndex::build(const StarList& catalog, std::size_t max_quads, double accept_radius) {
  const std::size_t n = catalog.stars.size();
  if (n < 4) raise(ErrorCode::TooFewStars, "quad index needs at least 4 catalog stars");

  QuadIndex index;
  index.entries_.reserve(std::min<std::size_t>(max_quads, 4096));
  // combinations in brightness order, brightest outward: the largest member
  // index grows last, so all quads of the top-k stars come before star k+1
  for (std::size_t d = 3; d < n && index.entries_.size() < max_quads; ++d) {
    for (std::size_t c = 2; c < d && index.entries_.size() < max_quads; ++c) {
      for (std::size_t b = 1; b < c && index.entries_.size() < max_quads; ++b) {
        for (std::size_t a = 0; a < b && index.entries_.size() < max_quads; ++a) {
          const auto& s = catalog.stars;
          try {
            QuadHash h = quad_hash({s[a].x, s[a].y}, {s[b].x, s[b].y}, {s[c].x, s[c].y},
                                   {s[d].x, s[d].y}, accept_radius);
            const std::size_t ids[4] = {a, b, c, d};
            Entry e;
            e.code = h.code;
            for (int i = 0; i < 4; ++i) e.star_ids[i] = std::uint32_t(ids[h.star_ids[i]]);
            index.entries_.push_back(e);
          } catch (const Error& err) {
            if (err.code() != ErrorCode::DegenerateQuad) throw;
          }
        }
      }
    }
  }
  std::sort(index.entries_.begin(), index.entries_.end(),
            [](const Entry& a, const Entry& b) { return a.code[0] < b.code[0]; });
  return index;
}

std::vector<const QuadIndex::Entry*> QuadIndex::lookup(const std::array<double, 4>& code,
                                                       double radius) const {
  // entries are sorted by code[0]; scan the [code[0]-r, code[0]+r] window
  const double r2 = radius * radius;
  auto lo = std::lower_bound(entries_.begin(), entries_.end(), code[0] - radius,
                             [](const Entry& e, double v) { return e.code[0] < v; });
  std::vector<const Entry*> hits;
  for (auto it = lo; it != entries_.end() && it->code[0] <= code[0] + radius; ++it) {
    double d2 = 0.0;
    for (int i = 0; i < 4; ++i) {
      const double d = it->code[i] - code[i];
      d2 += d * d;
    }
    if (d2 <= r2) hits.push_back(&*it);
  }
  return hits;
}

}  // namespace enhance::registration
