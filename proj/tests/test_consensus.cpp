#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <vector>

#include "enhance/consensus/consensus.hpp"
#include "enhance/core/error.hpp"
#include "enhance/core/rng.hpp"
#include "oracles.hpp"

using namespace enhance;
using consensus::ConsensusState;

namespace {

ObservedImage full_image(const Canvas& canvas, std::vector<double> values) {
  return ObservedImage{canvas, std::move(values),
                       std::vector<std::uint8_t>(canvas.pixel_count(), 1), {}};
}

std::string temp_path(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected a throw");
  return ErrorCode::InvalidValue;
}

}  // namespace

TEST_CASE("init_random") {
  const Canvas canvas(2, 2);
  const auto s1 = consensus::init_random(canvas, 5);
  const auto s2 = consensus::init_random(canvas, 5);
  CHECK(s1 == s2);
  CHECK(oracles::is_permutation_1_to_p(s1.ranks));
  CHECK(s1.votes == std::vector<double>{0, 0, 0, 0});

  const auto tiny = consensus::init_random(Canvas(1, 1), 9);
  CHECK(tiny.ranks == std::vector<double>{1});
  CHECK(tiny.votes == std::vector<double>{0});

  // different seeds give different permutations essentially always at P=64
  const auto a = consensus::init_random(Canvas(8, 8), 1);
  const auto b = consensus::init_random(Canvas(8, 8), 2);
  CHECK(a.ranks != b.ranks);
}

TEST_CASE("init_from_image") {
  const Canvas canvas(2, 2);
  const auto s = consensus::init_from_image(full_image(canvas, {10, 30, 20, 40}), 0);
  CHECK(s.ranks == std::vector<double>{1, 3, 2, 4});
  CHECK(s.votes == std::vector<double>{0, 0, 0, 0});

  // ties resolve by seed, but the strictly larger value always ranks last
  const Canvas c3(3, 1);
  bool saw_12 = false, saw_21 = false;
  for (std::uint64_t seed = 0; seed < 24; ++seed) {
    const auto t = consensus::init_from_image(full_image(c3, {5, 5, 9}), seed);
    CHECK(t.ranks[2] == 3.0);
    saw_12 |= (t.ranks[0] == 1.0 && t.ranks[1] == 2.0);
    saw_21 |= (t.ranks[0] == 2.0 && t.ranks[1] == 1.0);
  }
  CHECK(saw_12);
  CHECK(saw_21);

  // constant image: a seeded permutation
  const auto flat = consensus::init_from_image(full_image(canvas, {7, 7, 7, 7}), 3);
  CHECK(oracles::is_permutation_1_to_p(flat.ranks));

  ObservedImage partial = full_image(canvas, {1, 2, 3, 4});
  partial.mask[2] = 0;
  CHECK(code_of([&] { consensus::init_from_image(partial, 0); }) == ErrorCode::MaskNotFull);
}

TEST_CASE("update: worked example") {
  const Canvas canvas(4, 1);
  ConsensusState state{canvas, {2, 4, 1, 3}, {0, 0, 0, 0}};
  consensus::update(state, full_image(canvas, {10, 20, 20, 5}));
  CHECK(state.ranks == std::vector<double>{2, 4, 3, 1});
  CHECK(state.votes == std::vector<double>{1, 1, 1, 1});
}

TEST_CASE("update: first image with distinct values imposes its order") {
  const Canvas canvas(3, 2);
  auto state = consensus::init_random(canvas, 77);
  consensus::update(state, full_image(canvas, {0.5, -2, 9, 4, 1, 3}));
  CHECK(state.ranks == std::vector<double>{2, 1, 6, 5, 3, 4});
}

TEST_CASE("update: constant image leaves ranks alone, votes grow") {
  const Canvas canvas(3, 1);
  ConsensusState state{canvas, {2, 3, 1}, {1, 1, 1}};
  consensus::update(state, full_image(canvas, {4, 4, 4}));
  CHECK(state.ranks == std::vector<double>{2, 3, 1});
  CHECK(state.votes == std::vector<double>{2, 2, 2});
}

TEST_CASE("update error contract") {
  const Canvas canvas(2, 2);
  auto state = consensus::init_random(canvas, 0);

  CHECK(code_of([&] {
          auto img = full_image(Canvas(3, 2), {1, 2, 3, 4, 5, 6});
          consensus::update(state, img);
        }) == ErrorCode::ShapeMismatch);

  ObservedImage one = full_image(canvas, {1, 2, 3, 4});
  one.mask = {0, 0, 1, 0};
  CHECK(code_of([&] { consensus::update(state, one); }) == ErrorCode::DegenerateMask);

  ObservedImage bad_weight = full_image(canvas, {1, 2, 3, 4});
  bad_weight.weights = {1, 1, 0, 1};
  CHECK(code_of([&] { consensus::update(state, bad_weight); }) == ErrorCode::InvalidValue);
}

TEST_CASE("update equals the from-definitions oracle on random masked runs") {
  Rng rng(404);
  const Canvas canvas(8, 6);
  const std::size_t total = canvas.pixel_count();
  auto state = consensus::init_random(canvas, 1);
  oracles::NaiveState naive{state.ranks, state.votes};

  for (int it = 0; it < 300; ++it) {
    ObservedImage img{canvas, std::vector<double>(total),
                      std::vector<std::uint8_t>(total, 0), {}};
    std::size_t masked = 0;
    for (std::size_t p = 0; p < total; ++p) {
      img.values[p] = std::floor(rng.uniform(0.0, 16.0));  // coarse: plenty of ties
      img.mask[p] = rng.next_below(4) != 0;
      masked += img.mask[p];
    }
    if (masked < 2) continue;
    if (it % 3 == 0) {
      img.weights.assign(total, 1.0);
      for (auto& w : img.weights) w = 0.5 + rng.uniform(0.0, 2.0);
    }

    consensus::update(state, img);
    oracles::naive_update(naive, img.values, img.mask, img.weights);
    REQUIRE(state.ranks == naive.ranks);
    REQUIRE(state.votes == naive.votes);
    REQUIRE(oracles::is_permutation_1_to_p(state.ranks));
  }
}

TEST_CASE("update is exactly invariant under monotone value maps") {
  Rng rng(505);
  const Canvas canvas(6, 5);
  const std::size_t total = canvas.pixel_count();
  for (int it = 0; it < 30; ++it) {
    auto s1 = consensus::init_random(canvas, 100 + it);
    // give the state some history
    for (int h = 0; h < 3; ++h) {
      ObservedImage img{canvas, std::vector<double>(total),
                        std::vector<std::uint8_t>(total, 1), {}};
      for (auto& v : img.values) v = std::floor(rng.uniform(0.0, 12.0));
      consensus::update(s1, img);
    }
    auto s2 = s1;

    ObservedImage img{canvas, std::vector<double>(total),
                      std::vector<std::uint8_t>(total, 0), {}};
    std::size_t masked = 0;
    for (std::size_t p = 0; p < total; ++p) {
      img.values[p] = std::floor(rng.uniform(-8.0, 8.0)) / 4.0;
      img.mask[p] = rng.next_below(3) != 0;
      masked += img.mask[p];
    }
    if (masked < 2) continue;

    ObservedImage mapped = img;
    for (auto& v : mapped.values) v = v * v * v + 2.0 * v;  // strictly increasing, exact here

    consensus::update(s1, img);
    consensus::update(s2, mapped);
    REQUIRE(s1.ranks == s2.ranks);
    REQUIRE(s1.votes == s2.votes);
  }
}

TEST_CASE("merge") {
  const Canvas canvas(2, 1);

  // zero-vote state defers to the voted one
  ConsensusState a{canvas, {1, 2}, {0, 0}};
  ConsensusState b{canvas, {2, 1}, {3, 3}};
  const auto ab = consensus::merge(a, b);
  CHECK(ab.ranks == b.ranks);
  CHECK(ab.votes == b.votes);

  // self-merge doubles the votes
  const auto bb = consensus::merge(b, b);
  CHECK(bb.ranks == b.ranks);
  CHECK(bb.votes == std::vector<double>{6, 6});

  // worked example
  ConsensusState c{canvas, {1, 2}, {1, 1}};
  const auto cb = consensus::merge(c, b);
  CHECK(cb.ranks == std::vector<double>{2, 1});
  CHECK(cb.votes == std::vector<double>{4, 4});

  CHECK(code_of([&] {
          ConsensusState other{Canvas(3, 1), {1, 2, 3}, {0, 0, 0}};
          consensus::merge(a, other);
        }) == ErrorCode::ShapeMismatch);
}

TEST_CASE("merge is commutative and preserves the permutation invariant") {
  Rng rng(606);
  const Canvas canvas(5, 5);
  const std::size_t total = canvas.pixel_count();
  for (int it = 0; it < 40; ++it) {
    auto a = consensus::init_random(canvas, 2 * it);
    auto b = consensus::init_random(canvas, 2 * it + 1);
    for (std::size_t p = 0; p < total; ++p) {
      a.votes[p] = double(rng.next_below(4));
      b.votes[p] = double(rng.next_below(4));
    }
    const auto ab = consensus::merge(a, b);
    const auto ba = consensus::merge(b, a);
    REQUIRE(ab == ba);
    REQUIRE(oracles::is_permutation_1_to_p(ab.ranks));
  }
}

TEST_CASE("is_frozen") {
  const Canvas canvas(2, 2);
  ConsensusState state{canvas, {1, 2, 3, 4}, {4, 4, 4, 4}};
  CHECK(consensus::is_frozen(state));
  state.votes = {4, 4, 4, 3};
  CHECK(!consensus::is_frozen(state));
}

TEST_CASE("frozen states ignore further unit-weight updates") {
  Rng rng(707);
  const Canvas canvas(4, 4);  // P = 16
  const std::size_t total = canvas.pixel_count();
  auto state = consensus::init_random(canvas, 3);
  state.votes.assign(total, double(total));
  REQUIRE(consensus::is_frozen(state));
  const auto frozen_ranks = state.ranks;

  for (int it = 0; it < 100; ++it) {
    ObservedImage img{canvas, std::vector<double>(total),
                      std::vector<std::uint8_t>(total, 0), {}};
    std::size_t masked = 0;
    for (std::size_t p = 0; p < total; ++p) {
      img.values[p] = rng.uniform(0.0, 1.0);
      img.mask[p] = rng.next_below(3) != 0;
      masked += img.mask[p];
    }
    if (masked < 2) continue;
    consensus::update(state, img);
    REQUIRE(state.ranks == frozen_ranks);
  }
}

TEST_CASE("render") {
  const Canvas canvas(4, 1);
  ConsensusState state{canvas, {2, 4, 1, 3}, {0, 0, 0, 0}};

  const auto identity = consensus::HistogramSource::from_values({0, 1, 2, 3});
  CHECK(consensus::render(state, identity) == std::vector<double>{1, 3, 0, 2});

  const auto flat = consensus::HistogramSource::from_values({7, 7, 7, 7});
  CHECK(consensus::render(state, flat) == std::vector<double>{7, 7, 7, 7});

  const auto src = consensus::HistogramSource::from_values({9, 0, 5, 0});
  CHECK(consensus::render(state, src) == std::vector<double>{0, 9, 0, 5});

  CHECK(code_of([&] {
          consensus::render(state, consensus::HistogramSource::from_values({1, 2}));
        }) == ErrorCode::ShapeMismatch);
}

TEST_CASE("rendered histogram never changes") {
  Rng rng(808);
  const Canvas canvas(6, 6);
  const std::size_t total = canvas.pixel_count();
  std::vector<double> source_values(total);
  for (auto& v : source_values) v = std::floor(rng.uniform(0.0, 40.0));
  const auto source = consensus::HistogramSource::from_values(source_values);

  auto state = consensus::init_random(canvas, 1);
  auto initial = consensus::render(state, source);
  std::sort(initial.begin(), initial.end());

  for (int it = 0; it < 50; ++it) {
    ObservedImage img{canvas, std::vector<double>(total),
                      std::vector<std::uint8_t>(total, 0), {}};
    std::size_t masked = 0;
    for (std::size_t p = 0; p < total; ++p) {
      img.values[p] = std::floor(rng.uniform(0.0, 9.0));
      img.mask[p] = rng.next_below(5) != 0;
      masked += img.mask[p];
    }
    if (masked < 2) continue;
    consensus::update(state, img);
    auto rendered = consensus::render(state, source);
    std::sort(rendered.begin(), rendered.end());
    REQUIRE(rendered == initial);  // bit-exact multiset equality
  }
}

TEST_CASE("histogram_weights") {
  const Canvas canvas(4, 1);

  // all distinct: uniform weights
  CHECK(consensus::histogram_weights(full_image(canvas, {4, 2, 9, 7})) ==
        std::vector<double>{1, 1, 1, 1});

  // 3:1 split
  const auto w = consensus::histogram_weights(full_image(canvas, {1, 1, 1, 2}));
  CHECK(w[0] == doctest::Approx(1.0 / 3.0));
  CHECK(w[1] == doctest::Approx(1.0 / 3.0));
  CHECK(w[2] == doctest::Approx(1.0 / 3.0));
  CHECK(w[3] == doctest::Approx(3.0));

  // constant region: uniform after the mean-1 rescale
  CHECK(consensus::histogram_weights(full_image(canvas, {5, 5, 5, 5})) ==
        std::vector<double>{1, 1, 1, 1});

  ObservedImage tiny = full_image(canvas, {1, 2, 3, 4});
  tiny.mask = {1, 0, 0, 0};
  CHECK(code_of([&] { consensus::histogram_weights(tiny); }) == ErrorCode::DegenerateMask);
}

TEST_CASE("state persistence") {
  const std::string path = temp_path("enhance_state_test.enhc");

  auto state = consensus::init_random(Canvas(30, 20), 9);
  state.votes[5] = 2.5;
  state.votes[599] = 17.0;
  consensus::save_state(state, path);
  const auto loaded = consensus::load_state(path);
  CHECK(loaded == state);

  // truncation
  {
    std::ifstream in(path, std::ios::binary);
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::ofstream out(path + ".trunc", std::ios::binary);
    out.write(buf.data(), std::streamsize(buf.size() / 2));
  }
  CHECK(code_of([&] { consensus::load_state(path + ".trunc"); }) == ErrorCode::FormatError);

  // duplicated rank value
  {
    std::ifstream in(path, std::ios::binary);
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::memcpy(buf.data() + 16, buf.data() + 24, 8);
    std::ofstream out(path + ".dup", std::ios::binary);
    out.write(buf.data(), std::streamsize(buf.size()));
  }
  CHECK(code_of([&] { consensus::load_state(path + ".dup"); }) == ErrorCode::IntegrityError);

  // bad magic
  {
    std::ifstream in(path, std::ios::binary);
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    buf[0] = 'X';
    std::ofstream out(path + ".magic", std::ios::binary);
    out.write(buf.data(), std::streamsize(buf.size()));
  }
  CHECK(code_of([&] { consensus::load_state(path + ".magic"); }) == ErrorCode::FormatError);

  for (const char* suffix : {"", ".trunc", ".dup", ".magic"}) {
    std::filesystem::remove(path + suffix);
  }
}
