#include <doctest.h>

#include <cstring>
#include <vector>

#include "enhance/core/rng.hpp"
#include "enhance/kernels/kernels.hpp"

using namespace enhance;

namespace {

std::vector<double> random_positive(Rng& rng, std::size_t n, double lo, double hi) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

bool bitwise_equal(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() &&
         (a.empty() || std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
}

// every backend the host CPU can run
std::vector<kernels::Backend> available_backends() {
  std::vector<kernels::Backend> out{kernels::Backend::Scalar};
  for (auto b : {kernels::Backend::Avx2, kernels::Backend::Neon}) {
    if (kernels::table_for(b)) out.push_back(b);
  }
  return out;
}

}  // namespace

TEST_CASE("simd variants are bit-identical to the scalar kernels") {
  const auto& scalar = kernels::scalar_table();
  Rng rng(20240808);

  for (auto backend : available_backends()) {
    const auto* table = kernels::table_for(backend);
    REQUIRE(table != nullptr);
    CAPTURE(kernels::backend_name(backend));

    // odd lengths exercise the vector tails
    for (std::size_t n : {std::size_t(0), std::size_t(1), std::size_t(2), std::size_t(3),
                          std::size_t(4), std::size_t(5), std::size_t(7), std::size_t(8),
                          std::size_t(13), std::size_t(64), std::size_t(1001)}) {
      const auto votes = random_positive(rng, n, 0.0, 50.0);
      const auto rc = random_positive(rng, n, 1.0, double(n) + 1.0);
      const auto rd = random_positive(rng, n, 1.0, double(n) + 1.0);
      const auto w = random_positive(rng, n, 0.25, 4.0);

      std::vector<double> got(n), want(n);
      table->fuse_scores(votes.data(), rc.data(), rd.data(), w.data(), got.data(), n);
      scalar.fuse_scores(votes.data(), rc.data(), rd.data(), w.data(), want.data(), n);
      CHECK(bitwise_equal(got, want));

      // merge: sprinkle exact zero vote pairs to hit the fallback lane
      auto va = votes;
      auto vb = random_positive(rng, n, 0.0, 8.0);
      for (std::size_t i = 0; i + 3 < n; i += 4) va[i] = vb[i] = 0.0;
      table->merge_scores(va.data(), rc.data(), vb.data(), rd.data(), got.data(), n);
      scalar.merge_scores(va.data(), rc.data(), vb.data(), rd.data(), want.data(), n);
      CHECK(bitwise_equal(got, want));

      got = votes;
      want = votes;
      table->add_inplace(got.data(), w.data(), n);
      scalar.add_inplace(want.data(), w.data(), n);
      CHECK(bitwise_equal(got, want));

      if (n > 0) {
        CHECK(table->min_value(votes.data(), n) == scalar.min_value(votes.data(), n));
      }

      std::vector<std::uint32_t> idx(n);
      for (std::size_t i = 0; i < n; ++i) idx[i] = std::uint32_t(rng.next_below(n ? n : 1));
      table->gather(votes.data(), idx.data(), got.data(), n);
      scalar.gather(votes.data(), idx.data(), want.data(), n);
      CHECK(bitwise_equal(got, want));

      table->affine_clip(rd.data(), 1.7, -0.3, 0.0, 1.0, got.data(), n);
      scalar.affine_clip(rd.data(), 1.7, -0.3, 0.0, 1.0, want.data(), n);
      CHECK(bitwise_equal(got, want));

      got = rd;
      want = rd;
      table->quantize_levels(got.data(), 0.5, double(n) + 1.5, 17, n);
      scalar.quantize_levels(want.data(), 0.5, double(n) + 1.5, 17, n);
      CHECK(bitwise_equal(got, want));

      std::vector<std::uint8_t> mask(n);
      for (auto& m : mask) m = std::uint8_t(rng.next_below(2));
      auto sum_got = votes, sum_want = votes;
      auto cnt_got = w, cnt_want = w;
      table->masked_accumulate(sum_got.data(), cnt_got.data(), rd.data(), mask.data(), n);
      scalar.masked_accumulate(sum_want.data(), cnt_want.data(), rd.data(), mask.data(), n);
      CHECK(bitwise_equal(sum_got, sum_want));
      CHECK(bitwise_equal(cnt_got, cnt_want));
    }
  }
}

TEST_CASE("kernel backend selection") {
  const auto original = kernels::active_backend();
  kernels::set_backend(kernels::Backend::Scalar);
  CHECK(kernels::active_backend() == kernels::Backend::Scalar);

  // setting an unsupported backend is a no-op
  kernels::set_backend(kernels::Backend::Neon);
#if !defined(__aarch64__)
  CHECK(kernels::active_backend() == kernels::Backend::Scalar);
#endif
  kernels::set_backend(original);
  CHECK(kernels::active_backend() == original);
}

TEST_CASE("scalar kernel semantics") {
  const auto& k = kernels::scalar_table();

  const double votes[3] = {0.0, 2.0, 1.0};
  const double rc[3] = {3.0, 1.0, 2.0};
  const double rd[3] = {1.0, 2.0, 3.0};
  const double w[3] = {1.0, 1.0, 1.0};
  double out[3];
  k.fuse_scores(votes, rc, rd, w, out, 3);
  CHECK(out[0] == doctest::Approx(1.0));             // no votes: data rank wins
  CHECK(out[1] == doctest::Approx((2.0 * 1 + 2) / 3.0));
  CHECK(out[2] == doctest::Approx((1.0 * 2 + 3) / 2.0));

  const double va[2] = {0.0, 1.0};
  const double vb[2] = {0.0, 3.0};
  const double ra[2] = {1.0, 1.0};
  const double rb[2] = {2.0, 2.0};
  double m[2];
  k.merge_scores(va, ra, vb, rb, m, 2);
  CHECK(m[0] == doctest::Approx(1.5));  // both zero: plain mean
  CHECK(m[1] == doctest::Approx((1.0 + 6.0) / 4.0));

  const double vals[5] = {5, 4, 3, 2, 1};
  CHECK(k.min_value(vals, 5) == 1.0);
  CHECK(k.min_value(vals, 1) == 5.0);
}
