#include "enhance/kernels/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <cstring>

namespace enhance::kernels {

namespace {

void fuse_scores_scalar(const double* votes, const double* rank_cons, const double* rank_data,
                        const double* w, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = (votes[i] * rank_cons[i] + w[i] * rank_data[i]) / (votes[i] + w[i]);
  }
}

void merge_scores_scalar(const double* va, const double* ra, const double* vb, const double* rb,
                         double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double total = va[i] + vb[i];
    out[i] = (total == 0.0) ? (ra[i] + rb[i]) * 0.5
                            : (va[i] * ra[i] + vb[i] * rb[i]) / total;
  }
}

void add_inplace_scalar(double* v, const double* w, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) v[i] += w[i];
}

double min_value_scalar(const double* v, std::size_t n) {
  double m = v[0];
  for (std::size_t i = 1; i < n; ++i) m = std::min(m, v[i]);
  return m;
}

void gather_scalar(const double* src, const std::uint32_t* idx, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = src[idx[i]];
}

void affine_clip_scalar(const double* in, double gain, double offset, double lo, double hi,
                        double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = std::min(std::max(gain * in[i] + offset, lo), hi);
  }
}

void quantize_levels_scalar(double* x, double lo, double hi, int levels, std::size_t n) {
  const double scale = double(levels - 1) / (hi - lo);
  const double step = (hi - lo) / double(levels - 1);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = lo + std::nearbyint((x[i] - lo) * scale) * step;
  }
}

void masked_accumulate_scalar(double* sum, double* count, const double* vals,
                              const std::uint8_t* mask, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    if (mask[i]) {
      sum[i] += vals[i];
      count[i] += 1.0;
    }
  }
}

const KernelTable kScalar = {
    fuse_scores_scalar,   merge_scores_scalar, add_inplace_scalar,
    min_value_scalar,     gather_scalar,       affine_clip_scalar,
    quantize_levels_scalar, masked_accumulate_scalar,
};

Backend detect_backend() {
#if defined(__x86_64__) || defined(_M_X64)
  if (__builtin_cpu_supports("avx2")) return Backend::Avx2;
#elif defined(__aarch64__)
  return Backend::Neon;
#endif
  return Backend::Scalar;
}

Backend initial_backend() {
  if (const char* env = std::getenv("ENHANCE_KERNELS")) {
    if (std::strcmp(env, "scalar") == 0) return Backend::Scalar;
    if (std::strcmp(env, "avx2") == 0 && table_for(Backend::Avx2)) return Backend::Avx2;
    if (std::strcmp(env, "neon") == 0 && table_for(Backend::Neon)) return Backend::Neon;
  }
  return detect_backend();
}

Backend g_backend = initial_backend();

}  // namespace

#if defined(__x86_64__) || defined(_M_X64)
const KernelTable* avx2_table();  // kernels_avx2.cpp
#endif
#if defined(__aarch64__)
const KernelTable* neon_table();  // kernels_neon.cpp
#endif

const KernelTable& scalar_table() { return kScalar; }

const KernelTable* table_for(Backend b) {
  switch (b) {
    case Backend::Scalar:
      return &kScalar;
    case Backend::Avx2:
#if defined(__x86_64__) || defined(_M_X64)
      return __builtin_cpu_supports("avx2") ? avx2_table() : nullptr;
#else
      return nullptr;
#endif
    case Backend::Neon:
#if defined(__aarch64__)
      return neon_table();
#else
      return nullptr;
#endif
  }
  return nullptr;
}

const KernelTable& active() {
  const KernelTable* t = table_for(g_backend);
  return t ? *t : kScalar;
}

Backend active_backend() { return g_backend; }

void set_backend(Backend b) {
  if (table_for(b)) g_backend = b;
}

const char* backend_name(Backend b) {
  switch (b) {
    case Backend::Scalar: return "scalar";
    case Backend::Avx2: return "avx2";
    case Backend::Neon: return "neon";
  }
  return "?";
}

}  // namespace enhance::kernels
