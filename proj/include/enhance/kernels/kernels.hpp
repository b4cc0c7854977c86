#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

namespace enhance::kernels {

// Data-parallel inner loops shared by the consensus update, merge, tone
// mapping and the mask-weighted average. Every entry point has a scalar
// reference implementation and may have AVX2/NEON variants selected at
// runtime. All variants are bit-identical to the scalar kernels: they use
// the same operation order and no FMA contraction, so higher-level results
// do not depend on the selected backend.
struct KernelTable {
  // out[i] = (votes[i]*rank_cons[i] + w[i]*rank_data[i]) / (votes[i] + w[i])
  void (*fuse_scores)(const double* votes, const double* rank_cons, const double* rank_data,
                      const double* w, double* out, std::size_t n);

  // out[i] = (va[i]*ra[i] + vb[i]*rb[i]) / (va[i]+vb[i]), or (ra[i]+rb[i])*0.5
  // when va[i]+vb[i] == 0.
  void (*merge_scores)(const double* va, const double* ra, const double* vb, const double* rb,
                       double* out, std::size_t n);

  // v[i] += w[i]
  void (*add_inplace)(double* v, const double* w, std::size_t n);

  // min over v[0..n); n >= 1
  double (*min_value)(const double* v, std::size_t n);

  // out[i] = src[idx[i]]
  void (*gather)(const double* src, const std::uint32_t* idx, double* out, std::size_t n);

  // out[i] = clamp(gain*in[i] + offset, lo, hi)
  void (*affine_clip)(const double* in, double gain, double offset, double lo, double hi,
                      double* out, std::size_t n);

  // x[i] = lo + nearbyint((x[i]-lo)/(hi-lo) * (levels-1)) * (hi-lo)/(levels-1)
  // (round-half-to-even, matching the scalar nearbyint in the default mode)
  void (*quantize_levels)(double* x, double lo, double hi, int levels, std::size_t n);

  // sum[i] += mask[i] ? vals[i] : 0;  count[i] += mask[i] ? 1 : 0
  void (*masked_accumulate)(double* sum, double* count, const double* vals,
                            const std::uint8_t* mask, std::size_t n);
};

enum class Backend { Scalar, Avx2, Neon };

// Table of scalar reference kernels; always available.
const KernelTable& scalar_table();

// Table for an explicit backend, or nullptr when unsupported on this CPU.
const KernelTable* table_for(Backend b);

// Active table: best supported backend, unless overridden by set_backend()
// or the ENHANCE_KERNELS environment variable ("scalar", "avx2", "neon").
const KernelTable& active();
Backend active_backend();
void set_backend(Backend b);

const char* backend_name(Backend b);

}  // namespace enhance::kernels
