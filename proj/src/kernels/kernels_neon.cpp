// NEON (AArch64) kernel variants for the two-lane double vectors. Same
// operation order as the scalar kernels, no FMA, so results stay bit-equal
// for finite inputs. Entry points with no profitable two-lane form fall back
// to the scalar implementations.

#if defined(__aarch64__)

#include <arm_neon.h>

#include <algorithm>
#include <cmath>

#include "enhance/kernels/kernels.hpp"

namespace enhance::kernels {

namespace {

void fuse_scores_neon(const double* votes, const double* rank_cons, const double* rank_data,
                      const double* w, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    float64x2_t v = vld1q_f64(votes + i);
    float64x2_t rc = vld1q_f64(rank_cons + i);
    float64x2_t rd = vld1q_f64(rank_data + i);
    float64x2_t wt = vld1q_f64(w + i);
    float64x2_t num = vaddq_f64(vmulq_f64(v, rc), vmulq_f64(wt, rd));
    vst1q_f64(out + i, vdivq_f64(num, vaddq_f64(v, wt)));
  }
  for (; i < n; ++i) {
    out[i] = (votes[i] * rank_cons[i] + w[i] * rank_data[i]) / (votes[i] + w[i]);
  }
}

void merge_scores_neon(const double* va, const double* ra, const double* vb, const double* rb,
                       double* out, std::size_t n) {
  const float64x2_t zero = vdupq_n_f64(0.0);
  const float64x2_t half = vdupq_n_f64(0.5);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    float64x2_t a = vld1q_f64(va + i);
    float64x2_t x = vld1q_f64(ra + i);
    float64x2_t b = vld1q_f64(vb + i);
    float64x2_t y = vld1q_f64(rb + i);
    float64x2_t total = vaddq_f64(a, b);
    float64x2_t num = vaddq_f64(vmulq_f64(a, x), vmulq_f64(b, y));
    float64x2_t weighted = vdivq_f64(num, total);
    float64x2_t fallback = vmulq_f64(vaddq_f64(x, y), half);
    uint64x2_t use_fallback = vceqq_f64(total, zero);
    vst1q_f64(out + i, vbslq_f64(use_fallback, fallback, weighted));
  }
  for (; i < n; ++i) {
    const double total = va[i] + vb[i];
    out[i] = (total == 0.0) ? (ra[i] + rb[i]) * 0.5
                            : (va[i] * ra[i] + vb[i] * rb[i]) / total;
  }
}

void add_inplace_neon(double* v, const double* w, std::size_t n) {
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    vst1q_f64(v + i, vaddq_f64(vld1q_f64(v + i), vld1q_f64(w + i)));
  }
  for (; i < n; ++i) v[i] += w[i];
}

double min_value_neon(const double* v, std::size_t n) {
  if (n < 2) return v[0];
  float64x2_t acc = vld1q_f64(v);
  std::size_t i = 2;
  for (; i + 2 <= n; i += 2) {
    float64x2_t x = vld1q_f64(v + i);
    // keep the accumulator on equality, like std::min(acc, x)
    acc = vbslq_f64(vcltq_f64(x, acc), x, acc);
  }
  double m = std::min(vgetq_lane_f64(acc, 0), vgetq_lane_f64(acc, 1));
  for (; i < n; ++i) m = std::min(m, v[i]);
  return m;
}

void affine_clip_neon(const double* in, double gain, double offset, double lo, double hi,
                      double* out, std::size_t n) {
  const float64x2_t g = vdupq_n_f64(gain);
  const float64x2_t o = vdupq_n_f64(offset);
  const float64x2_t l = vdupq_n_f64(lo);
  const float64x2_t h = vdupq_n_f64(hi);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    float64x2_t t = vaddq_f64(vmulq_f64(g, vld1q_f64(in + i)), o);
    t = vbslq_f64(vcltq_f64(t, l), l, t);
    t = vbslq_f64(vcgtq_f64(t, h), h, t);
    vst1q_f64(out + i, t);
  }
  for (; i < n; ++i) {
    out[i] = std::min(std::max(gain * in[i] + offset, lo), hi);
  }
}

void quantize_levels_neon(double* x, double lo, double hi, int levels, std::size_t n) {
  const double scale_s = double(levels - 1) / (hi - lo);
  const double step_s = (hi - lo) / double(levels - 1);
  const float64x2_t scale = vdupq_n_f64(scale_s);
  const float64x2_t step = vdupq_n_f64(step_s);
  const float64x2_t l = vdupq_n_f64(lo);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    float64x2_t t = vmulq_f64(vsubq_f64(vld1q_f64(x + i), l), scale);
    t = vrndnq_f64(t);  // round to nearest even, like nearbyint
    vst1q_f64(x + i, vaddq_f64(l, vmulq_f64(t, step)));
  }
  for (; i < n; ++i) {
    x[i] = lo + std::nearbyint((x[i] - lo) * scale_s) * step_s;
  }
}

const KernelTable make_neon_table() {
  KernelTable t = scalar_table();  // gather/masked_accumulate stay scalar
  t.fuse_scores = fuse_scores_neon;
  t.merge_scores = merge_scores_neon;
  t.add_inplace = add_inplace_neon;
  t.min_value = min_value_neon;
  t.affine_clip = affine_clip_neon;
  t.quantize_levels = quantize_levels_neon;
  return t;
}

const KernelTable kNeon = make_neon_table();

}  // namespace

const KernelTable* neon_table() { return &kNeon; }

}  // namespace enhance::kernels

#endif  // __aarch64__
