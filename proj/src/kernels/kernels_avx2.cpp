// AVX2 kernel variants. Compiled with -mavx2 in this translation unit only;
// only reached after a runtime cpuid check. Operation order matches the
// scalar kernels and FMA contraction is disabled, so results are bit-equal
// to the scalar reference for finite inputs.

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include <algorithm>
#include <cmath>
#include <cstring>

#include "enhance/kernels/kernels.hpp"

namespace enhance::kernels {

namespace {

void fuse_scores_avx2(const double* votes, const double* rank_cons, const double* rank_data,
                      const double* w, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d v = _mm256_loadu_pd(votes + i);
    __m256d rc = _mm256_loadu_pd(rank_cons + i);
    __m256d rd = _mm256_loadu_pd(rank_data + i);
    __m256d wt = _mm256_loadu_pd(w + i);
    __m256d num = _mm256_add_pd(_mm256_mul_pd(v, rc), _mm256_mul_pd(wt, rd));
    __m256d den = _mm256_add_pd(v, wt);
    _mm256_storeu_pd(out + i, _mm256_div_pd(num, den));
  }
  for (; i < n; ++i) {
    out[i] = (votes[i] * rank_cons[i] + w[i] * rank_data[i]) / (votes[i] + w[i]);
  }
}

void merge_scores_avx2(const double* va, const double* ra, const double* vb, const double* rb,
                       double* out, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  const __m256d half = _mm256_set1_pd(0.5);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d a = _mm256_loadu_pd(va + i);
    __m256d x = _mm256_loadu_pd(ra + i);
    __m256d b = _mm256_loadu_pd(vb + i);
    __m256d y = _mm256_loadu_pd(rb + i);
    __m256d total = _mm256_add_pd(a, b);
    __m256d num = _mm256_add_pd(_mm256_mul_pd(a, x), _mm256_mul_pd(b, y));
    __m256d weighted = _mm256_div_pd(num, total);
    __m256d fallback = _mm256_mul_pd(_mm256_add_pd(x, y), half);
    __m256d use_fallback = _mm256_cmp_pd(total, zero, _CMP_EQ_OQ);
    _mm256_storeu_pd(out + i, _mm256_blendv_pd(weighted, fallback, use_fallback));
  }
  for (; i < n; ++i) {
    const double total = va[i] + vb[i];
    out[i] = (total == 0.0) ? (ra[i] + rb[i]) * 0.5
                            : (va[i] * ra[i] + vb[i] * rb[i]) / total;
  }
}

void add_inplace_avx2(double* v, const double* w, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(v + i, _mm256_add_pd(_mm256_loadu_pd(v + i), _mm256_loadu_pd(w + i)));
  }
  for (; i < n; ++i) v[i] += w[i];
}

double min_value_avx2(const double* v, std::size_t n) {
  std::size_t i = 0;
  double m = v[0];
  if (n >= 4) {
    __m256d acc = _mm256_loadu_pd(v);
    for (i = 4; i + 4 <= n; i += 4) {
      // lane value first, accumulator second: equal values keep the accumulator,
      // matching std::min(acc, x)
      acc = _mm256_min_pd(_mm256_loadu_pd(v + i), acc);
    }
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, acc);
    m = std::min(std::min(lanes[0], lanes[1]), std::min(lanes[2], lanes[3]));
  } else {
    i = 1;
    for (; i < n; ++i) m = std::min(m, v[i]);
    return m;
  }
  for (; i < n; ++i) m = std::min(m, v[i]);
  return m;
}

void gather_avx2(const double* src, const std::uint32_t* idx, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m128i vi = _mm_loadu_si128(reinterpret_cast<const __m128i*>(idx + i));
    _mm256_storeu_pd(out + i, _mm256_i32gather_pd(src, vi, 8));
  }
  for (; i < n; ++i) out[i] = src[idx[i]];
}

void affine_clip_avx2(const double* in, double gain, double offset, double lo, double hi,
                      double* out, std::size_t n) {
  const __m256d g = _mm256_set1_pd(gain);
  const __m256d o = _mm256_set1_pd(offset);
  const __m256d l = _mm256_set1_pd(lo);
  const __m256d h = _mm256_set1_pd(hi);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d x = _mm256_loadu_pd(in + i);
    __m256d t = _mm256_add_pd(_mm256_mul_pd(g, x), o);
    // constants first so equal values keep the data operand, as std::min/max do
    t = _mm256_max_pd(l, t);
    t = _mm256_min_pd(h, t);
    _mm256_storeu_pd(out + i, t);
  }
  for (; i < n; ++i) {
    out[i] = std::min(std::max(gain * in[i] + offset, lo), hi);
  }
}

void quantize_levels_avx2(double* x, double lo, double hi, int levels, std::size_t n) {
  const double scale_s = double(levels - 1) / (hi - lo);
  const double step_s = (hi - lo) / double(levels - 1);
  const __m256d scale = _mm256_set1_pd(scale_s);
  const __m256d step = _mm256_set1_pd(step_s);
  const __m256d l = _mm256_set1_pd(lo);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d v = _mm256_loadu_pd(x + i);
    __m256d t = _mm256_mul_pd(_mm256_sub_pd(v, l), scale);
    t = _mm256_round_pd(t, _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
    _mm256_storeu_pd(x + i, _mm256_add_pd(l, _mm256_mul_pd(t, step)));
  }
  for (; i < n; ++i) {
    x[i] = lo + std::nearbyint((x[i] - lo) * scale_s) * step_s;
  }
}

void masked_accumulate_avx2(double* sum, double* count, const double* vals,
                            const std::uint8_t* mask, std::size_t n) {
  const __m256i zero64 = _mm256_setzero_si256();
  const __m256d one = _mm256_set1_pd(1.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    std::uint32_t packed;
    std::memcpy(&packed, mask + i, 4);
    __m256i lanes = _mm256_cvtepu8_epi64(_mm_cvtsi32_si128(int(packed)));
    __m256d off = _mm256_castsi256_pd(_mm256_cmpeq_epi64(lanes, zero64));
    __m256d s_old = _mm256_loadu_pd(sum + i);
    __m256d c_old = _mm256_loadu_pd(count + i);
    __m256d s_new = _mm256_add_pd(s_old, _mm256_loadu_pd(vals + i));
    __m256d c_new = _mm256_add_pd(c_old, one);
    // masked-off lanes keep their old bits exactly
    _mm256_storeu_pd(sum + i, _mm256_blendv_pd(s_new, s_old, off));
    _mm256_storeu_pd(count + i, _mm256_blendv_pd(c_new, c_old, off));
  }
  for (; i < n; ++i) {
    if (mask[i]) {
      sum[i] += vals[i];
      count[i] += 1.0;
    }
  }
}

const KernelTable kAvx2 = {
    fuse_scores_avx2,   merge_scores_avx2, add_inplace_avx2,
    min_value_avx2,     gather_avx2,       affine_clip_avx2,
    quantize_levels_avx2, masked_accumulate_avx2,
};

}  // namespace

const KernelTable* avx2_table() { return &kAvx2; }

}  // namespace enhance::kernels

#endif  // x86_64
