#include "enhance/consensus/consensus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>
#include <unordered_map>

#include "enhance/core/error.hpp"
#include "enhance/core/rng.hpp"
#include "enhance/kernels/kernels.hpp"
#include "enhance/rank/rank.hpp"

namespace enhance::consensus {

namespace {

std::vector<std::uint32_t> masked_indices(const ObservedImage& image) {
  std::vector<std::uint32_t> idx;
  idx.reserve(image.mask.size());
  for (std::size_t p = 0; p < image.mask.size(); ++p) {
    if (image.mask[p]) idx.push_back(std::uint32_t(p));
  }
  return idx;
}

void check_image(const ConsensusState& state, const ObservedImage& image) {
  if (image.canvas != state.canvas) {
    raise(ErrorCode::ShapeMismatch, "image canvas does not match consensus canvas");
  }
  if (image.values.size() != state.ranks.size() || image.mask.size() != state.ranks.size()) {
    raise(ErrorCode::ShapeMismatch, "image buffers do not match canvas size");
  }
  if (!image.weights.empty() && image.weights.size() != state.ranks.size()) {
    raise(ErrorCode::ShapeMismatch, "weight buffer does not match canvas size");
  }
}

}  // namespace

HistogramSource HistogramSource::from_values(std::vector<double> values) {
  for (double v : values) {
    if (!std::isfinite(v)) raise(ErrorCode::InvalidValue, "histogram source: non-finite value");
  }
  std::sort(values.begin(), values.end());
  return HistogramSource{std::move(values)};
}

ConsensusState init_random(const Canvas& canvas, std::uint64_t seed) {
  const std::size_t p = canvas.pixel_count();
  ConsensusState state{canvas, std::vector<double>(p), std::vector<double>(p, 0.0)};
  std::iota(state.ranks.begin(), state.ranks.end(), 1.0);
  Rng rng(seed);
  rng.shuffle(state.ranks);
  return state;
}

ConsensusState init_from_image(const ObservedImage& image, std::uint64_t seed) {
  const std::size_t p = image.canvas.pixel_count();
  for (std::uint8_t m : image.mask) {
    if (!m) raise(ErrorCode::MaskNotFull, "init_from_image requires a full mask");
  }
  if (image.values.size() != p || image.mask.size() != p) {
    raise(ErrorCode::ShapeMismatch, "image buffers do not match canvas size");
  }

  // random tiebreak tags make the induced order strict and seed-reproducible
  std::vector<std::uint32_t> tag(p);
  std::iota(tag.begin(), tag.end(), 0u);
  Rng rng(seed);
  rng.shuffle(tag);

  std::vector<std::uint32_t> order(p);
  std::iota(order.begin(), order.end(), 0u);
  for (double v : image.values) {
    if (!std::isfinite(v)) raise(ErrorCode::InvalidValue, "init_from_image: non-finite value");
  }
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    if (image.values[a] != image.values[b]) return image.values[a] < image.values[b];
    return tag[a] < tag[b];
  });

  ConsensusState state{image.canvas, std::vector<double>(p), std::vector<double>(p, 0.0)};
  for (std::size_t k = 0; k < p; ++k) state.ranks[order[k]] = double(k + 1);
  return state;
}

void update(ConsensusState& state, const ObservedImage& image) {
  check_image(state, image);
  const auto idx = masked_indices(image);
  const std::size_t n = idx.size();
  if (n < 2) raise(ErrorCode::DegenerateMask, "update needs at least 2 masked pixels");

  const auto& kern = kernels::active();

  std::vector<double> values(n);
  kern.gather(image.values.data(), idx.data(), values.data(), n);
  for (double v : values) {
    if (!std::isfinite(v)) raise(ErrorCode::InvalidValue, "update: non-finite masked value");
  }

  std::vector<double> weights(n, 1.0);
  if (!image.weights.empty()) {
    kern.gather(image.weights.data(), idx.data(), weights.data(), n);
    for (double w : weights) {
      if (!std::isfinite(w) || w <= 0.0) {
        raise(ErrorCode::InvalidValue, "update: weights must be positive inside the mask");
      }
    }
  }

  // tied ranks of the data inside the footprint
  std::vector<std::uint32_t> local(n);
  std::iota(local.begin(), local.end(), 0u);
  std::vector<std::uint32_t> order_d = local;
  std::stable_sort(order_d.begin(), order_d.end(),
                   [&](std::uint32_t a, std::uint32_t b) { return values[a] < values[b]; });
  std::vector<double> rank_data(n);
  rank::tied_ranks_from_order(values, order_d, rank_data);

  // consensus ranks restricted to the footprint; distinct by invariant, so
  // the within-mask re-ranking is a plain sort
  std::vector<double> cons(n);
  kern.gather(state.ranks.data(), idx.data(), cons.data(), n);
  std::vector<std::uint32_t> order_c = local;
  std::sort(order_c.begin(), order_c.end(),
            [&](std::uint32_t a, std::uint32_t b) { return cons[a] < cons[b]; });
  std::vector<double> rank_cons(n);
  std::vector<double> sorted_rank_values(n);
  for (std::size_t k = 0; k < n; ++k) {
    rank_cons[order_c[k]] = double(k + 1);
    sorted_rank_values[k] = cons[order_c[k]];
  }

  std::vector<double> votes(n);
  kern.gather(state.votes.data(), idx.data(), votes.data(), n);

  std::vector<double> score(n);
  kern.fuse_scores(votes.data(), rank_cons.data(), rank_data.data(), weights.data(),
                   score.data(), n);

  // reassign the footprint's existing rank values in score order; score ties
  // fall back to the current consensus order (minimal perturbation)
  std::vector<std::uint32_t> order_s = std::move(local);
  std::sort(order_s.begin(), order_s.end(), [&](std::uint32_t a, std::uint32_t b) {
    if (score[a] != score[b]) return score[a] < score[b];
    return rank_cons[a] < rank_cons[b];
  });

  for (std::size_t k = 0; k < n; ++k) {
    state.ranks[idx[order_s[k]]] = sorted_rank_values[k];
  }
  for (std::size_t k = 0; k < n; ++k) {
    state.votes[idx[k]] += weights[k];
  }
}

ConsensusState merge(const ConsensusState& a, const ConsensusState& b) {
  if (a.canvas != b.canvas) raise(ErrorCode::ShapeMismatch, "merge: canvas mismatch");
  const std::size_t p = a.ranks.size();
  const auto& kern = kernels::active();

  std::vector<double> score(p);
  kern.merge_scores(a.votes.data(), a.ranks.data(), b.votes.data(), b.ranks.data(),
                    score.data(), p);

  std::vector<std::uint32_t> order(p);
  std::iota(order.begin(), order.end(), 0u);
  // stable sort: score ties resolve by ascending pixel index
  std::stable_sort(order.begin(), order.end(),
                   [&](std::uint32_t i, std::uint32_t j) { return score[i] < score[j]; });

  ConsensusState out{a.canvas, std::vector<double>(p), a.votes};
  for (std::size_t k = 0; k < p; ++k) out.ranks[order[k]] = double(k + 1);
  kern.add_inplace(out.votes.data(), b.votes.data(), p);
  return out;
}

bool is_frozen(const ConsensusState& state) {
  if (state.votes.empty()) return true;
  const double m = kernels::active().min_value(state.votes.data(), state.votes.size());
  return m >= double(state.pixel_count());
}

std::vector<double> render(const ConsensusState& state, const HistogramSource& source) {
  const std::size_t p = state.pixel_count();
  if (source.sorted_values.size() != p) {
    raise(ErrorCode::ShapeMismatch, "render: histogram source length != pixel count");
  }
  std::vector<double> out(p);
  for (std::size_t i = 0; i < p; ++i) {
    out[i] = source.sorted_values[std::size_t(state.ranks[i]) - 1];
  }
  return out;
}

std::vector<double> histogram_weights(const ObservedImage& image) {
  const auto idx = masked_indices(image);
  const std::size_t n = idx.size();
  if (n < 2) raise(ErrorCode::DegenerateMask, "histogram_weights needs at least 2 masked pixels");

  std::unordered_map<double, std::size_t> counts;
  counts.reserve(n * 2);
  for (std::uint32_t p : idx) {
    const double v = image.values[p];
    if (!std::isfinite(v)) raise(ErrorCode::InvalidValue, "histogram_weights: non-finite value");
    ++counts[v];
  }

  // raw weight 1/h^2 with h the occupancy fraction of the pixel's exact value
  std::vector<double> out(image.values.size(), 0.0);
  double sum = 0.0;
  for (std::uint32_t p : idx) {
    const double h = double(counts[image.values[p]]) / double(n);
    const double w = 1.0 / (h * h);
    out[p] = w;
    sum += w;
  }
  const double scale = double(n) / sum;
  for (std::uint32_t p : idx) out[p] *= scale;
  return out;
}

namespace {

constexpr char kMagic[4] = {'E', 'N', 'H', 'C'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(char((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(const unsigned char* p) {
  return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 |
         std::uint32_t(p[3]) << 24;
}

std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

void put_u64(std::string& buf, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf.push_back(char((v >> (8 * i)) & 0xff));
}

}  // namespace

void save_state(const ConsensusState& state, const std::string& path) {
  const std::size_t p = state.pixel_count();
  std::string buf;
  buf.reserve(16 + 16 * p);
  buf.append(kMagic, 4);
  put_u32(buf, kVersion);
  put_u32(buf, state.canvas.width);
  put_u32(buf, state.canvas.height);
  for (std::size_t i = 0; i < p; ++i) put_u64(buf, std::uint64_t(state.ranks[i]));
  for (std::size_t i = 0; i < p; ++i) {
    std::uint64_t bits;
    static_assert(sizeof(double) == 8);
    std::memcpy(&bits, &state.votes[i], 8);
    put_u64(buf, bits);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) raise(ErrorCode::IoError, "cannot open " + path + " for writing");
  out.write(buf.data(), std::streamsize(buf.size()));
  if (!out) raise(ErrorCode::IoError, "short write to " + path);
}

ConsensusState load_state(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorCode::IoError, "cannot open " + path);
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (buf.size() < 16) raise(ErrorCode::FormatError, "state file truncated");
  const auto* p = reinterpret_cast<const unsigned char*>(buf.data());
  if (std::memcmp(p, kMagic, 4) != 0) raise(ErrorCode::FormatError, "bad magic");
  if (get_u32(p + 4) != kVersion) raise(ErrorCode::FormatError, "unsupported version");
  const std::uint32_t width = get_u32(p + 8);
  const std::uint32_t height = get_u32(p + 12);
  if (width < 1 || height < 1) raise(ErrorCode::FormatError, "bad canvas dimensions");
  const std::size_t count = std::size_t(width) * height;
  if (buf.size() != 16 + 16 * count) raise(ErrorCode::FormatError, "state file length mismatch");

  ConsensusState state{Canvas(width, height), std::vector<double>(count),
                       std::vector<double>(count)};
  std::vector<std::uint8_t> seen(count, 0);
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint64_t r = get_u64(p + 16 + 8 * i);
    if (r < 1 || r > count || seen[r - 1]) {
      raise(ErrorCode::IntegrityError, "rank array is not a permutation of 1..P");
    }
    seen[r - 1] = 1;
    state.ranks[i] = double(r);
  }
  const std::size_t vote_base = 16 + 8 * count;
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint64_t bits = get_u64(p + vote_base + 8 * i);
    double v;
    std::memcpy(&v, &bits, 8);
    if (!std::isfinite(v) || v < 0.0) {
      raise(ErrorCode::IntegrityError, "vote entries must be finite and non-negative");
    }
    state.votes[i] = v;
  }
  return state;
}

}  // namespace enhance::consensus
