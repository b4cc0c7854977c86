#include "enhance/rank/rank.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "enhance/core/error.hpp"
#include "enhance/core/rng.hpp"

namespace enhance::rank {

namespace {

void require_finite(std::span<const double> v, const char* who) {
  for (double x : v) {
    if (!std::isfinite(x)) raise(ErrorCode::InvalidValue, std::string(who) + ": non-finite entry");
  }
}

bool all_tied(std::span<const double> v) {
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] != v[0]) return false;
  }
  return true;
}

// Count pairs i<j with seq[i] > seq[j] (strict inversions) by bottom-up
// merge sort. Equal elements are kept stable and not counted.
std::uint64_t merge_count_inversions(std::vector<double>& seq) {
  const std::size_t n = seq.size();
  std::vector<double> buf(n);
  std::uint64_t inversions = 0;
  for (std::size_t width = 1; width < n; width *= 2) {
    for (std::size_t lo = 0; lo + width < n; lo += 2 * width) {
      const std::size_t mid = lo + width;
      const std::size_t hi = std::min(lo + 2 * width, n);
      std::size_t i = lo, j = mid, k = lo;
      while (i < mid && j < hi) {
        if (seq[j] < seq[i]) {
          inversions += mid - i;
          buf[k++] = seq[j++];
        } else {
          buf[k++] = seq[i++];
        }
      }
      while (i < mid) buf[k++] = seq[i++];
      while (j < hi) buf[k++] = seq[j++];
      std::copy(buf.begin() + lo, buf.begin() + hi, seq.begin() + lo);
    }
  }
  return inversions;
}

std::uint64_t tied_pair_count(std::vector<double>& sorted) {
  std::uint64_t pairs = 0;
  std::size_t i = 0;
  while (i < sorted.size()) {
    std::size_t j = i + 1;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    const std::uint64_t run = j - i;
    pairs += run * (run - 1) / 2;
    i = j;
  }
  return pairs;
}

}  // namespace

std::vector<std::uint32_t> argsort(std::span<const double> v) {
  require_finite(v, "argsort");
  std::vector<std::uint32_t> order(v.size());
  std::iota(order.begin(), order.end(), 0u);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::uint32_t a, std::uint32_t b) { return v[a] < v[b]; });
  return order;
}

std::vector<std::uint32_t> argsort_indices(std::span<const double> values,
                                           std::span<const std::uint32_t> indices) {
  for (std::uint32_t i : indices) {
    if (!std::isfinite(values[i])) raise(ErrorCode::InvalidValue, "argsort: non-finite entry");
  }
  std::vector<std::uint32_t> order(indices.begin(), indices.end());
  std::stable_sort(order.begin(), order.end(),
                   [&](std::uint32_t a, std::uint32_t b) { return values[a] < values[b]; });
  return order;
}

void tied_ranks_from_order(std::span<const double> v, std::span<const std::uint32_t> order,
                           std::span<double> out) {
  const std::size_t n = order.size();
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i + 1;
    while (j < n && v[order[j]] == v[order[i]]) ++j;
    // mean of 1-based positions i+1 .. j; exact half-integer
    const double r = (double(i + 1) + double(j)) * 0.5;
    for (std::size_t k = i; k < j; ++k) out[order[k]] = r;
    i = j;
  }
}

std::vector<double> tied_ranks(std::span<const double> v) {
  const auto order = argsort(v);
  std::vector<double> out(v.size());
  tied_ranks_from_order(v, order, out);
  return out;
}

double kendall_tau(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) raise(ErrorCode::ShapeMismatch, "kendall_tau: length mismatch");
  const std::size_t n = a.size();
  if (n < 2) raise(ErrorCode::DegenerateInput, "kendall_tau: need at least 2 entries");
  require_finite(a, "kendall_tau");
  require_finite(b, "kendall_tau");
  if (all_tied(a) || all_tied(b)) {
    raise(ErrorCode::DegenerateInput, "kendall_tau: all entries tied in one input");
  }

  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(), [&](std::uint32_t i, std::uint32_t j) {
    if (a[i] != a[j]) return a[i] < a[j];
    return b[i] < b[j];
  });

  // tie counts in a, and joint ties, from the (a, b)-sorted sequence
  std::uint64_t n1 = 0, n3 = 0;
  {
    std::size_t i = 0;
    while (i < n) {
      std::size_t j = i + 1;
      while (j < n && a[order[j]] == a[order[i]]) ++j;
      const std::uint64_t run = j - i;
      n1 += run * (run - 1) / 2;
      std::size_t k = i;
      while (k < j) {
        std::size_t m = k + 1;
        while (m < j && b[order[m]] == b[order[k]]) ++m;
        const std::uint64_t jr = m - k;
        n3 += jr * (jr - 1) / 2;
        k = m;
      }
      i = j;
    }
  }

  std::vector<double> bseq(n);
  for (std::size_t i = 0; i < n; ++i) bseq[i] = b[order[i]];
  const std::uint64_t discordant = merge_count_inversions(bseq);
  const std::uint64_t n2 = tied_pair_count(bseq);  // bseq is sorted now

  const std::uint64_t n0 = std::uint64_t(n) * (n - 1) / 2;
  // C - D = n0 - n1 - n2 + n3 - 2D; evaluate signed, n3 can undershoot transiently
  const std::int64_t concordant_minus_discordant =
      std::int64_t(n0) - std::int64_t(n1) - std::int64_t(n2) + std::int64_t(n3) -
      2 * std::int64_t(discordant);
  const double numerator = double(concordant_minus_discordant);
  // equal tie counts collapse the geometric mean; keeps tau(a, a) exactly 1
  const double denominator = n1 == n2
                                 ? double(n0 - n1)
                                 : std::sqrt(double(n0 - n1)) * std::sqrt(double(n0 - n2));
  return numerator / denominator;
}

SampledTau kendall_tau_sampled(std::span<const double> a, std::span<const double> b,
                               std::uint64_t num_pairs, std::uint64_t seed) {
  if (a.size() != b.size()) raise(ErrorCode::ShapeMismatch, "kendall_tau_sampled: length mismatch");
  const std::size_t n = a.size();
  if (n < 2) raise(ErrorCode::DegenerateInput, "kendall_tau_sampled: need at least 2 entries");
  if (num_pairs < 1) raise(ErrorCode::InvalidValue, "kendall_tau_sampled: num_pairs must be >= 1");
  require_finite(a, "kendall_tau_sampled");
  require_finite(b, "kendall_tau_sampled");
  if (all_tied(a) || all_tied(b)) {
    raise(ErrorCode::DegenerateInput, "kendall_tau_sampled: all entries tied in one input");
  }

  Rng rng(seed);
  double sum = 0.0;
  double sum_sq = 0.0;
  for (std::uint64_t k = 0; k < num_pairs; ++k) {
    const std::size_t i = std::size_t(rng.next_below(n));
    std::size_t j = std::size_t(rng.next_below(n - 1));
    if (j >= i) ++j;
    const double da = a[i] - a[j];
    const double db = b[i] - b[j];
    const double s = (da == 0.0 || db == 0.0) ? 0.0 : ((da > 0) == (db > 0) ? 1.0 : -1.0);
    sum += s;
    sum_sq += s * s;
  }
  SampledTau result;
  const double m = double(num_pairs);
  result.estimate = sum / m;
  if (num_pairs > 1) {
    const double var = std::max(0.0, (sum_sq - sum * sum / m) / (m - 1.0));
    result.standard_error = std::sqrt(var / m);
  }
  return result;
}

}  // namespace enhance::rank
