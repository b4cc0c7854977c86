#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "enhance/core/error.hpp"
#include "enhance/core/rng.hpp"
#include "enhance/kernels/kernels.hpp"
#include "enhance/pipeline/image_io.hpp"
#include "enhance/pipeline/run.hpp"
#include "enhance/rank/rank.hpp"

namespace enhance::pipeline {

namespace {

using consensus::ConsensusState;
using registration::SimilarityTransform;

struct InputRecord {
  std::string path;
  SimilarityTransform transform;
  bool color = false;
};

std::string expand_channel(const std::string& pattern, std::size_t channel) {
  std::string out = pattern;
  const std::string token = "{channel}";
  const auto pos = out.find(token);
  if (pos != std::string::npos) out.replace(pos, token.size(), std::to_string(channel));
  return out;
}

Grid channel_grid(const DecodedImage& img, ChannelMode mode, std::size_t channel) {
  if (mode == ChannelMode::Luminance) return to_luminance(img);
  return img.channels[std::min(channel, img.channels.size() - 1)];
}

// masked values all equal => the update would only bump votes
bool is_uninformative(const ObservedImage& obs) {
  bool seen = false;
  double first = 0.0;
  for (std::size_t p = 0; p < obs.mask.size(); ++p) {
    if (!obs.mask[p]) continue;
    if (!seen) {
      first = obs.values[p];
      seen = true;
    } else if (obs.values[p] != first) {
      return false;
    }
  }
  return true;
}

double exact_tau_or_skip(std::span<const double> a, std::span<const double> b, bool& ok) {
  try {
    ok = true;
    return rank::kendall_tau(a, b);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::DegenerateInput) throw;
    ok = false;
    return 0.0;
  }
}

}  // namespace

WeightedAverage weighted_average_baseline(const std::vector<ObservedImage>& images) {
  if (images.empty()) raise(ErrorCode::InvalidValue, "weighted average needs at least one image");
  const Canvas canvas = images[0].canvas;
  const std::size_t total = canvas.pixel_count();
  Grid sum(canvas.width, canvas.height, 0.0);
  std::vector<double> count(total, 0.0);
  const auto& kern = kernels::active();
  for (const ObservedImage& img : images) {
    if (img.canvas != canvas) raise(ErrorCode::ShapeMismatch, "weighted average: canvas mismatch");
    kern.masked_accumulate(sum.values.data(), count.data(), img.values.data(), img.mask.data(),
                           total);
  }
  WeightedAverage out{Grid(canvas.width, canvas.height, 0.0),
                      std::vector<std::uint8_t>(total, 0)};
  for (std::size_t p = 0; p < total; ++p) {
    if (count[p] > 0.0) {
      out.image.values[p] = sum.values[p] / count[p];
      out.coverage[p] = 1;
    }
  }
  return out;
}

std::string MetricsReport::to_text(const Canvas& canvas) const {
  std::ostringstream os;
  os << "== enhance combine report ==\n";
  os << "canvas           : " << canvas.width << " x " << canvas.height << "\n";
  os << "images_in        : " << images_in << "\n";
  os << "images_used      : " << images_used << "\n";
  os << "images_skipped   : " << images_skipped << "\n";
  for (const auto& [path, reason] : skipped) {
    os << "  skipped " << path << " (" << reason << ")\n";
  }
  char buf[160];
  auto line = [&](const char* key, std::size_t ch, double v) {
    std::snprintf(buf, sizeof buf, "%s_ch%zu=%.6f\n", key, ch, v);
    os << buf;
  };
  os << "-- metrics (key=value) --\n";
  os << "images_in=" << images_in << "\n";
  os << "images_used=" << images_used << "\n";
  os << "images_skipped=" << images_skipped << "\n";
  for (std::size_t c = 0; c < channels.size(); ++c) {
    const ChannelMetrics& m = channels[c];
    if (m.consensus_vs_reference) line("consensus_vs_reference_tau", c, *m.consensus_vs_reference);
    if (m.weighted_average_vs_reference) {
      line("weighted_average_vs_reference_tau", c, *m.weighted_average_vs_reference);
    }
    if (m.best_single_vs_reference) line("best_single_vs_reference_tau", c, *m.best_single_vs_reference);
    if (m.mean_inter_image_tau) {
      line("mean_inter_image_tau", c, *m.mean_inter_image_tau);
      os << "inter_image_pairs_ch" << c << "=" << m.inter_image_pairs_used << "\n";
    }
    if (m.mean_image_consensus_tau) line("mean_image_consensus_tau", c, *m.mean_image_consensus_tau);
    for (const auto& [path, tau] : m.per_image_vs_reference) {
      std::snprintf(buf, sizeof buf, "image_vs_reference_tau_ch%zu %s=%.6f\n", c, path.c_str(), tau);
      os << buf;
    }
  }
  return os.str();
}

RunResult run_combine(const RunConfig& config) {
  const Canvas canvas = config.canvas;
  const std::size_t total = canvas.pixel_count();
  const std::size_t num_channels = config.channel_mode == ChannelMode::PerChannel ? 3 : 1;

  std::optional<registration::StarList> catalog;
  std::optional<registration::QuadIndex> index;
  if (config.solve == SolveMode::Solve) {
    catalog = read_catalog(config.catalog_path);
    index = registration::QuadIndex::build(*catalog, 50000);
  }

  MetricsReport report;
  report.images_in = config.inputs.size();
  report.channels.resize(num_channels);

  // resample an input's channel onto the canvas, with optional reliability weights
  auto register_channel = [&](const InputRecord& rec, const DecodedImage& img,
                              std::size_t channel) {
    const Grid grid = channel_grid(img, config.channel_mode, channel);
    ObservedImage obs = registration::resample(grid, rec.transform, canvas);
    if (config.weight_mode == WeightMode::Histogram) {
      obs.weights = consensus::histogram_weights(obs);
    }
    return obs;
  };

  // ---- pass 1: registration, usability, per-channel running mean ----
  std::vector<InputRecord> used;
  std::vector<Grid> mean_sum(num_channels, Grid(canvas.width, canvas.height, 0.0));
  std::vector<std::vector<double>> mean_count(num_channels, std::vector<double>(total, 0.0));
  const auto& kern = kernels::active();

  for (const std::string& path : config.inputs) {
    try {
      const DecodedImage img = decode_image(path);
      InputRecord rec;
      rec.path = path;
      rec.color = img.is_color();

      if (config.solve == SolveMode::Sidecar) {
        rec.transform = registration::read_transform_sidecar(path + ".transform");
      } else {
        const Grid lum = to_luminance(img);
        const registration::StarList stars =
            registration::detect_stars(lum, config.detect_max_stars,
                                       {config.detect_threshold_sigmas});
        registration::SolveParams params = config.solve_params;
        params.image_width = lum.width;
        params.image_height = lum.height;
        const auto solution = registration::solve(stars, *index, *catalog, params);
        if (!solution) raise(ErrorCode::DegenerateInput, "plate solve failed");
        rec.transform = solution->transform;
      }

      // usability gate on the first channel; geometry is shared
      const ObservedImage probe = register_channel(rec, img, 0);
      if (probe.masked_count() < 2) {
        raise(ErrorCode::DegenerateMask, "footprint covers fewer than 2 canvas pixels");
      }
      if (config.skip_uninformative && is_uninformative(probe)) {
        raise(ErrorCode::DegenerateInput, "constant inside footprint");
      }

      for (std::size_t c = 0; c < num_channels; ++c) {
        const ObservedImage obs = c == 0 ? probe : register_channel(rec, img, c);
        kern.masked_accumulate(mean_sum[c].values.data(), mean_count[c].data(),
                               obs.values.data(), obs.mask.data(), total);
      }
      used.push_back(rec);
    } catch (const Error& e) {
      report.skipped.emplace_back(path, e.what());
      std::cerr << "enhance: skipping " << path << ": " << e.what() << "\n";
    }
  }

  report.images_used = used.size();
  report.images_skipped = report.skipped.size();
  if (used.empty()) raise(ErrorCode::EmptyRun, "no input image survived registration");

  std::vector<Grid> mean_image(num_channels, Grid(canvas.width, canvas.height, 0.0));
  for (std::size_t c = 0; c < num_channels; ++c) {
    for (std::size_t p = 0; p < total; ++p) {
      if (mean_count[c][p] > 0.0) {
        mean_image[c].values[p] = mean_sum[c].values[p] / mean_count[c][p];
      }
    }
  }

  // ---- init ----
  std::vector<ConsensusState> states;
  states.reserve(num_channels);
  for (std::size_t c = 0; c < num_channels; ++c) {
    const std::uint64_t channel_seed = Rng::derive_seed(config.seed, c);
    if (config.init == InitMode::Random) {
      states.push_back(consensus::init_random(canvas, channel_seed));
    } else {
      ObservedImage full{canvas, mean_image[c].values,
                         std::vector<std::uint8_t>(total, 1), {}};
      states.push_back(consensus::init_from_image(full, channel_seed));
    }
  }

  // ---- pass 2: consensus updates in the deterministic order ----
  for (const InputRecord& rec : used) {
    const DecodedImage img = decode_image(rec.path);
    for (std::size_t c = 0; c < num_channels; ++c) {
      const ObservedImage obs = register_channel(rec, img, c);
      consensus::update(states[c], obs);
    }
  }

  // ---- outputs ----
  std::vector<Grid> reference(num_channels);
  bool have_reference = false;
  if (!config.reference.empty()) {
    const DecodedImage ref = decode_image(config.reference);
    if (ref.width() != canvas.width || ref.height() != canvas.height) {
      raise(ErrorCode::ShapeMismatch, "reference image does not match the canvas");
    }
    for (std::size_t c = 0; c < num_channels; ++c) {
      reference[c] = channel_grid(ref, config.channel_mode, c);
    }
    have_reference = true;
  }

  if (!config.render_out.empty()) {
    DecodedImage out;
    out.bit_depth = 16;
    for (std::size_t c = 0; c < num_channels; ++c) {
      std::vector<double> source_values;
      if (config.render_match.empty() || config.render_match == "mean") {
        source_values = mean_image[c].values;
      } else {
        const DecodedImage match = decode_image(config.render_match);
        if (std::size_t(match.width()) * match.height() != total) {
          raise(ErrorCode::ShapeMismatch, "render_match image does not match the canvas");
        }
        source_values = channel_grid(match, config.channel_mode, c).values;
      }
      const auto source = consensus::HistogramSource::from_values(std::move(source_values));
      std::vector<double> rendered = consensus::render(states[c], source);
      // stretch to the full 16-bit range for display
      const auto [lo_it, hi_it] = std::minmax_element(rendered.begin(), rendered.end());
      const double lo = *lo_it, hi = *hi_it;
      const double scale = hi > lo ? 65535.0 / (hi - lo) : 0.0;
      Grid g(canvas.width, canvas.height);
      for (std::size_t p = 0; p < total; ++p) g.values[p] = (rendered[p] - lo) * scale;
      out.channels.push_back(std::move(g));
    }
    encode_image(out, config.render_out);
  }

  if (!config.state_out.empty()) {
    for (std::size_t c = 0; c < num_channels; ++c) {
      consensus::save_state(states[c], expand_channel(config.state_out, c));
    }
  }

  // ---- metrics ----
  for (std::size_t c = 0; c < num_channels; ++c) {
    ChannelMetrics& m = report.channels[c];

    if (have_reference) {
      bool ok = false;
      const double tau = exact_tau_or_skip(states[c].ranks, reference[c].values, ok);
      if (ok) m.consensus_vs_reference = tau;

      WeightedAverage avg{mean_image[c], {}};
      const double tau_avg = exact_tau_or_skip(avg.image.values, reference[c].values, ok);
      if (ok) m.weighted_average_vs_reference = tau_avg;
    }

    // sampled per-image metrics
    double sum_img_cons = 0.0;
    std::size_t n_img_cons = 0;
    double best_single = -2.0;
    for (std::size_t i = 0; i < used.size(); ++i) {
      const DecodedImage img = decode_image(used[i].path);
      const ObservedImage obs = register_channel(used[i], img, c);
      std::vector<double> vals, cons, refv;
      vals.reserve(total / 2);
      for (std::size_t p = 0; p < total; ++p) {
        if (!obs.mask[p]) continue;
        vals.push_back(obs.values[p]);
        cons.push_back(states[c].ranks[p]);
        if (have_reference) refv.push_back(reference[c].values[p]);
      }
      try {
        const auto st = rank::kendall_tau_sampled(vals, cons, config.metrics_pixel_pairs,
                                                  Rng::derive_seed(config.seed, 1000 + i));
        sum_img_cons += st.estimate;
        ++n_img_cons;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::DegenerateInput) throw;
      }
      if (have_reference) {
        try {
          const auto st = rank::kendall_tau_sampled(vals, refv, config.metrics_pixel_pairs,
                                                    Rng::derive_seed(config.seed, 2000 + i));
          best_single = std::max(best_single, st.estimate);
          if (config.metrics_per_image) {
            m.per_image_vs_reference.emplace_back(used[i].path, st.estimate);
          }
        } catch (const Error& e) {
          if (e.code() != ErrorCode::DegenerateInput) throw;
        }
      }
    }
    if (n_img_cons > 0) m.mean_image_consensus_tau = sum_img_cons / double(n_img_cons);
    if (best_single > -2.0) m.best_single_vs_reference = best_single;

    // sampled inter-image pairs
    if (used.size() >= 2 && config.metrics_image_pairs > 0) {
      Rng rng(Rng::derive_seed(config.seed, 777));
      double sum_tau = 0.0;
      std::size_t pairs_used = 0;
      for (std::uint64_t k = 0; k < config.metrics_image_pairs; ++k) {
        const std::size_t i = std::size_t(rng.next_below(used.size()));
        std::size_t j = std::size_t(rng.next_below(used.size() - 1));
        if (j >= i) ++j;
        const DecodedImage img_i = decode_image(used[i].path);
        const DecodedImage img_j = decode_image(used[j].path);
        const ObservedImage a = register_channel(used[i], img_i, c);
        const ObservedImage b = register_channel(used[j], img_j, c);
        std::vector<double> va, vb;
        for (std::size_t p = 0; p < total; ++p) {
          if (a.mask[p] && b.mask[p]) {
            va.push_back(a.values[p]);
            vb.push_back(b.values[p]);
          }
        }
        try {
          const auto st = rank::kendall_tau_sampled(va, vb, config.metrics_pixel_pairs,
                                                    rng.next_u64());
          sum_tau += st.estimate;
          ++pairs_used;
        } catch (const Error& e) {
          if (e.code() != ErrorCode::DegenerateInput) throw;
        }
      }
      if (pairs_used > 0) {
        m.mean_inter_image_tau = sum_tau / double(pairs_used);
        m.inter_image_pairs_used = pairs_used;
      }
    }
  }

  if (!config.report_out.empty()) {
    std::ofstream out(config.report_out, std::ios::trunc);
    if (!out) raise(ErrorCode::IoError, "cannot open " + config.report_out + " for writing");
    out << report.to_text(canvas);
  }

  return RunResult{std::move(states), std::move(report)};
}

}  // namespace enhance::pipeline
