#include <doctest.h>

#include <cmath>
#include <vector>

#include "enhance/core/error.hpp"
#include "enhance/core/rng.hpp"
#include "enhance/rank/rank.hpp"
#include "oracles.hpp"

using namespace enhance;

namespace {

std::vector<double> random_vector(Rng& rng, std::size_t n, bool with_ties) {
  std::vector<double> v(n);
  for (double& x : v) {
    // a coarse lattice forces ties, a fine one avoids them
    const double step = with_ties ? 8.0 : 1e9;
    x = std::floor(rng.uniform(-4.0, 4.0) * step) / step;
  }
  return v;
}

}  // namespace

TEST_CASE("argsort basics") {
  CHECK(rank::argsort(std::vector<double>{30, 10, 20}) ==
        std::vector<std::uint32_t>{1, 2, 0});
  CHECK(rank::argsort(std::vector<double>{1, 2, 3}) == std::vector<std::uint32_t>{0, 1, 2});
  // stability on the tied pair
  CHECK(rank::argsort(std::vector<double>{2, 1, 1}) == std::vector<std::uint32_t>{1, 2, 0});
  CHECK(rank::argsort(std::vector<double>{}).empty());

  CHECK_THROWS_AS(rank::argsort(std::vector<double>{1.0, std::nan("")}), Error);
}

TEST_CASE("tied ranks") {
  CHECK(rank::tied_ranks(std::vector<double>{10, 20, 30}) == std::vector<double>{1, 2, 3});
  CHECK(rank::tied_ranks(std::vector<double>{3, 1, 1, 2}) ==
        std::vector<double>{4, 1.5, 1.5, 3});
  CHECK(rank::tied_ranks(std::vector<double>{5, 5, 5, 5}) ==
        std::vector<double>{2.5, 2.5, 2.5, 2.5});

  Rng rng(11);
  for (int it = 0; it < 50; ++it) {
    const std::size_t n = 1 + std::size_t(rng.next_below(60));
    const auto v = random_vector(rng, n, it % 2 == 0);
    const auto got = rank::tied_ranks(v);
    CHECK(got == oracles::tied_ranks(v));
    // sums to n(n+1)/2 exactly (half-integer arithmetic)
    double sum = 0.0;
    for (double r : got) {
      sum += r;
      CHECK(r >= 1.0);
      CHECK(r <= double(n));
    }
    CHECK(sum == double(n) * double(n + 1) / 2.0);
  }
}

TEST_CASE("tied ranks are invariant under strictly increasing maps") {
  Rng rng(12);
  for (int it = 0; it < 40; ++it) {
    const std::size_t n = 2 + std::size_t(rng.next_below(50));
    auto v = random_vector(rng, n, true);
    auto mapped = v;
    for (double& x : mapped) x = x * 4.0 - 3.0;  // exact in binary floating point
    CHECK(rank::tied_ranks(v) == rank::tied_ranks(mapped));
    for (double& x : mapped) x = x * x * x + x;  // strictly increasing
    CHECK(rank::tied_ranks(v) == rank::tied_ranks(mapped));
  }
}

TEST_CASE("kendall tau matches the quadratic oracle") {
  CHECK(rank::kendall_tau(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2, 3}) ==
        doctest::Approx(1.0));
  CHECK(rank::kendall_tau(std::vector<double>{1, 2, 3}, std::vector<double>{3, 2, 1}) ==
        doctest::Approx(-1.0));
  // C=1, D=0, one tied pair on each side
  CHECK(rank::kendall_tau(std::vector<double>{1, 1, 2}, std::vector<double>{1, 2, 2}) ==
        doctest::Approx(0.5));

  Rng rng(13);
  for (int it = 0; it < 200; ++it) {
    const std::size_t n = 2 + std::size_t(rng.next_below(199));
    const auto a = random_vector(rng, n, it % 2 == 0);
    const auto b = random_vector(rng, n, it % 3 == 0);
    bool degenerate_a = true, degenerate_b = true;
    for (double x : a) degenerate_a &= (x == a[0]);
    for (double x : b) degenerate_b &= (x == b[0]);
    if (degenerate_a || degenerate_b) continue;
    const double got = rank::kendall_tau(a, b);
    const double want = oracles::tau_b(a, b);
    CHECK(std::fabs(got - want) <= 1e-12);
    CHECK(got >= -1.0);
    CHECK(got <= 1.0);
    // symmetry, and self-correlation is exactly 1
    CHECK(rank::kendall_tau(b, a) == doctest::Approx(got).epsilon(1e-14));
    CHECK(rank::kendall_tau(a, a) == 1.0);
  }
}

TEST_CASE("kendall tau error contract") {
  const std::vector<double> a{1, 2, 3};
  CHECK_THROWS_AS(rank::kendall_tau(a, std::vector<double>{1, 2}), Error);
  CHECK_THROWS_AS(rank::kendall_tau(std::vector<double>{1, 1, 1}, a), Error);
  CHECK_THROWS_AS(rank::kendall_tau(a, std::vector<double>{2, 2, 2}), Error);
  CHECK_THROWS_AS(rank::kendall_tau(std::vector<double>{1}, std::vector<double>{1}), Error);

  try {
    rank::kendall_tau(a, std::vector<double>{1, 2});
    FAIL("expected a throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ShapeMismatch);
  }
}

TEST_CASE("sampled tau") {
  // all-distinct identical vectors: every drawn pair is concordant
  std::vector<double> a(64);
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = double(i * 37 % 101);
  const auto st = rank::kendall_tau_sampled(a, a, 1000, 99);
  CHECK(st.estimate == 1.0);
  CHECK(st.standard_error == 0.0);

  // full reversal: every drawn pair is discordant
  std::vector<double> up(1000), down(1000);
  for (std::size_t i = 0; i < up.size(); ++i) {
    up[i] = double(i + 1);
    down[i] = double(up.size() - i);
  }
  CHECK(rank::kendall_tau_sampled(up, down, 500, 7).estimate == -1.0);

  // determinism
  Rng rng(14);
  const auto x = random_vector(rng, 200, true);
  const auto y = random_vector(rng, 200, false);
  const auto s1 = rank::kendall_tau_sampled(x, y, 5000, 42);
  const auto s2 = rank::kendall_tau_sampled(x, y, 5000, 42);
  CHECK(s1.estimate == s2.estimate);
  CHECK(s1.standard_error == s2.standard_error);

  // agreement with the exact tau-a within 3 standard errors
  const auto s3 = rank::kendall_tau_sampled(x, y, 100000, 4242);
  const double exact = oracles::tau_a(x, y);
  CHECK(std::fabs(s3.estimate - exact) <= 3.0 * s3.standard_error + 1e-12);
}
